//! Document corpus and taxonomy loading, indexing and validation.
//!
//! The corpus file is line-delimited: one document record per line, either as
//! a JSON object (`jsonl`, the default) or as six tab-separated columns
//! (`tsv`). The taxonomy file is tab-separated `(term_id, name, tree_path)`
//! with one tree position per row.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One document: text fields plus citation and annotation metadata.
///
/// `internal_refs` are citations to documents inside the collection,
/// `external_refs` are opaque ids of cited works outside it, and
/// `annotations` are the raw taxonomy term ids assigned to the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub internal_refs: BTreeSet<String>,
    #[serde(default)]
    pub external_refs: BTreeSet<String>,
    #[serde(default)]
    pub annotations: BTreeSet<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: String::new(),
            abstract_text: String::new(),
            internal_refs: BTreeSet::new(),
            external_refs: BTreeSet::new(),
            annotations: BTreeSet::new(),
        }
    }

    /// True when both title and abstract are blank.
    pub fn text_is_empty(&self) -> bool {
        self.title.trim().is_empty() && self.abstract_text.trim().is_empty()
    }

    /// A document never cites itself; drop a self-reference if present.
    fn normalize(&mut self) {
        let own = self.doc_id.clone();
        self.internal_refs.remove(&own);
    }
}

/// On-disk corpus encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::InvalidParameter {
                what: "corpus format",
                why: format!("unknown format {other:?} (expected jsonl or tsv)"),
            }),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusFormat::Jsonl => write!(f, "jsonl"),
            CorpusFormat::Tsv => write!(f, "tsv"),
        }
    }
}

/// Aggregate corpus counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub internal_refs: usize,
    pub external_refs: usize,
    pub annotations: usize,
    pub distinct_terms: usize,
}

/// An immutable document collection indexed by `doc_id`.
///
/// Documents are held sorted by id, so the position of a document doubles as
/// a stable dense index used by the network builders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
    index: HashMap<String, u32>,
}

impl Corpus {
    /// Build a corpus from records, rejecting duplicate ids.
    pub fn from_documents(mut docs: Vec<Document>) -> Result<Self> {
        for doc in &mut docs {
            doc.normalize();
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut index = HashMap::with_capacity(docs.len());
        for (pos, doc) in docs.iter().enumerate() {
            if index.insert(doc.doc_id.clone(), pos as u32).is_some() {
                return Err(Error::DuplicateDocId(doc.doc_id.clone()));
            }
        }
        Ok(Corpus { docs, index })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents in ascending `doc_id` order.
    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&pos| &self.docs[pos as usize])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.index.contains_key(doc_id)
    }

    /// Dense position of a document in [`Corpus::docs`] order.
    pub fn position(&self, doc_id: &str) -> Option<u32> {
        self.index.get(doc_id).copied()
    }

    pub fn stats(&self) -> CorpusStats {
        let mut terms = BTreeSet::new();
        let mut internal = 0;
        let mut external = 0;
        let mut annotations = 0;
        for doc in &self.docs {
            internal += doc.internal_refs.len();
            external += doc.external_refs.len();
            annotations += doc.annotations.len();
            terms.extend(doc.annotations.iter().cloned());
        }
        CorpusStats {
            documents: self.docs.len(),
            internal_refs: internal,
            external_refs: external,
            annotations,
            distinct_terms: terms.len(),
        }
    }
}

fn parse_tsv_list(field: &str) -> BTreeSet<String> {
    field
        .split('|')
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

fn join_tsv_list(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join("|")
}

fn check_plain(field: &str, what: &str, path: &Path, line_no: usize) -> Result<()> {
    if field.contains('\t') || field.contains('\n') {
        return Err(Error::parse(
            path,
            line_no,
            format!("{what} must not contain tabs or newlines"),
        ));
    }
    Ok(())
}

fn parse_tsv_document(line: &str, path: &Path, line_no: usize) -> Result<Document> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 6 {
        return Err(Error::parse(
            path,
            line_no,
            format!("expected 6 tab-separated columns, found {}", cols.len()),
        ));
    }
    if cols[0].is_empty() {
        return Err(Error::parse(path, line_no, "empty doc_id"));
    }
    Ok(Document {
        doc_id: cols[0].to_string(),
        title: cols[1].to_string(),
        abstract_text: cols[2].to_string(),
        internal_refs: parse_tsv_list(cols[3]),
        external_refs: parse_tsv_list(cols[4]),
        annotations: parse_tsv_list(cols[5]),
    })
}

/// Load a corpus from a line-delimited file. Parse failures carry the
/// offending line number; duplicate ids are rejected.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = match format {
            CorpusFormat::Jsonl => serde_json::from_str::<Document>(&line)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?,
            CorpusFormat::Tsv => parse_tsv_document(&line, path, line_no)?,
        };
        if doc.doc_id.is_empty() {
            return Err(Error::parse(path, line_no, "empty doc_id"));
        }
        check_plain(&doc.doc_id, "doc_id", path, line_no)?;
        for r in doc.internal_refs.iter().chain(&doc.external_refs) {
            check_plain(r, "reference id", path, line_no)?;
        }
        for t in &doc.annotations {
            check_plain(t, "term id", path, line_no)?;
        }
        docs.push(doc);
    }
    Corpus::from_documents(docs)
}

/// Write a corpus back to disk in the given format, one record per line in
/// ascending `doc_id` order.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for doc in corpus.docs() {
        match format {
            CorpusFormat::Jsonl => {
                let line =
                    serde_json::to_string(doc).map_err(|e| Error::parse(path, 0, e.to_string()))?;
                writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
            }
            CorpusFormat::Tsv => {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    doc.doc_id,
                    doc.title,
                    doc.abstract_text,
                    join_tsv_list(&doc.internal_refs),
                    join_tsv_list(&doc.external_refs),
                    join_tsv_list(&doc.annotations),
                )
                .map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Branch code of a tree path: the leading alphabetic prefix of its first
/// segment (`"C01.123"` -> `"C"`).
pub fn branch_of_path(path: &str) -> &str {
    let first = path.split('.').next().unwrap_or(path);
    let end = first
        .char_indices()
        .find(|(_, c)| !c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(first.len());
    &first[..end]
}

/// Parent of a tree path: the path with its last dot-separated segment
/// removed, or `None` for a root-level (single-segment) path.
pub fn parent_path(path: &str) -> Option<&str> {
    path.rfind('.').map(|i| &path[..i])
}

/// Depth of a tree path: the number of dot-separated segments.
pub fn path_depth(path: &str) -> usize {
    path.split('.').count()
}

/// The term taxonomy: term names plus their positions in the tree.
///
/// A term may hold several tree positions, possibly under different branches,
/// but each tree position belongs to exactly one term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    names: BTreeMap<String, String>,
    positions: BTreeMap<String, BTreeSet<String>>,
    path_owner: BTreeMap<String, String>,
}

impl Taxonomy {
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut names: BTreeMap<String, String> = BTreeMap::new();
        let mut positions: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut path_owner: BTreeMap<String, String> = BTreeMap::new();
        for (term_id, name, path) in rows {
            let (term_id, name, path) = (term_id.into(), name.into(), path.into());
            if branch_of_path(&path).is_empty() {
                return Err(Error::InvalidParameter {
                    what: "tree path",
                    why: format!("path {path:?} has no alphabetic branch prefix"),
                });
            }
            match names.get(&term_id) {
                Some(existing) if existing != &name => {
                    return Err(Error::ConflictingTermName {
                        term_id,
                        first: existing.clone(),
                        second: name,
                    });
                }
                Some(_) => {}
                None => {
                    names.insert(term_id.clone(), name);
                }
            }
            if let Some(owner) = path_owner.get(&path) {
                if owner != &term_id {
                    return Err(Error::AmbiguousTreePath {
                        path,
                        first: owner.clone(),
                        second: term_id,
                    });
                }
            } else {
                path_owner.insert(path.clone(), term_id.clone());
            }
            positions.entry(term_id).or_default().insert(path);
        }

        let orphans: Vec<String> = path_owner
            .keys()
            .filter(|p| matches!(parent_path(p), Some(parent) if !path_owner.contains_key(parent)))
            .cloned()
            .collect();
        if !orphans.is_empty() {
            return Err(Error::OrphanTreePaths(orphans));
        }

        Ok(Taxonomy {
            names,
            positions,
            path_owner,
        })
    }

    pub fn term_count(&self) -> usize {
        self.names.len()
    }

    pub fn contains_term(&self, term_id: &str) -> bool {
        self.names.contains_key(term_id)
    }

    pub fn name_of(&self, term_id: &str) -> Option<&str> {
        self.names.get(term_id).map(|s| s.as_str())
    }

    /// Tree positions of a term, ascending.
    pub fn positions_of(&self, term_id: &str) -> Option<&BTreeSet<String>> {
        self.positions.get(term_id)
    }

    /// The term owning a tree path.
    pub fn term_of_path(&self, path: &str) -> Option<&str> {
        self.path_owner.get(path).map(|s| s.as_str())
    }

    /// The term owning the parent of a tree path, if the path is not root-level.
    pub fn parent_term(&self, path: &str) -> Option<&str> {
        parent_path(path).and_then(|p| self.term_of_path(p))
    }

    /// All `(term_id, name)` pairs, ascending by term id.
    pub fn terms(&self) -> impl Iterator<Item = (&str, &str)> {
        self.names.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Total number of tree positions a term holds, across all branches.
    pub fn instance_count(&self, term_id: &str) -> usize {
        self.positions.get(term_id).map_or(0, |s| s.len())
    }
}

/// Load a taxonomy from a tab-separated `(term_id, name, tree_path)` file,
/// one tree position per row. Lines starting with `#` are skipped.
pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].is_empty() || cols[2].is_empty() {
            return Err(Error::parse(path, line_no, "empty term_id or tree_path"));
        }
        rows.push((
            cols[0].to_string(),
            cols[1].to_string(),
            cols[2].to_string(),
        ));
    }
    Taxonomy::from_rows(rows)
}

/// Write a taxonomy as tab-separated `(term_id, name, tree_path)` rows.
pub fn save_taxonomy(taxonomy: &Taxonomy, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (term_id, positions) in &taxonomy.positions {
        let name = taxonomy.name_of(term_id).unwrap_or("");
        for p in positions {
            writeln!(w, "{term_id}\t{name}\t{p}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Report-only consistency check of a corpus against a taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `(doc_id, cited id)` pairs where the cited id is not in the corpus.
    pub dangling_refs: Vec<(String, String)>,
    /// `(doc_id, term_id)` pairs where the term is not in the taxonomy.
    pub unknown_terms: Vec<(String, String)>,
    /// Documents with blank title and abstract.
    pub empty_text: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.dangling_refs.is_empty() && self.unknown_terms.is_empty() && self.empty_text.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.dangling_refs.len() + self.unknown_terms.len() + self.empty_text.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "validation: {} dangling refs, {} unknown terms, {} empty-text docs",
            self.dangling_refs.len(),
            self.unknown_terms.len(),
            self.empty_text.len()
        )?;
        for (doc, r) in &self.dangling_refs {
            writeln!(f, "  dangling-ref\t{doc}\t{r}")?;
        }
        for (doc, t) in &self.unknown_terms {
            writeln!(f, "  unknown-term\t{doc}\t{t}")?;
        }
        for doc in &self.empty_text {
            writeln!(f, "  empty-text\t{doc}")?;
        }
        Ok(())
    }
}

/// Check every document's internal references, annotations and text. Never
/// mutates anything; callers decide what to do with the report.
pub fn validate(corpus: &Corpus, taxonomy: &Taxonomy) -> ValidationReport {
    let mut report = ValidationReport::default();
    for doc in corpus.docs() {
        for r in &doc.internal_refs {
            if !corpus.contains(r) {
                report.dangling_refs.push((doc.doc_id.clone(), r.clone()));
            }
        }
        for t in &doc.annotations {
            if !taxonomy.contains_term(t) {
                report.unknown_terms.push((doc.doc_id.clone(), t.clone()));
            }
        }
        if doc.text_is_empty() {
            report.empty_text.push(doc.doc_id.clone());
        }
    }
    report
}
