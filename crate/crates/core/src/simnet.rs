//! Similarity network construction: extended direct citation and BM25 text.
//!
//! Both builders are deterministic: identical inputs yield bit-identical edge
//! lists after canonical (`u < v`, sorted) ordering, regardless of thread
//! scheduling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

/// Which similarity metric a network encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkLabel {
    Citation,
    Text,
}

impl fmt::Display for NetworkLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkLabel::Citation => write!(f, "citation"),
            NetworkLabel::Text => write!(f, "text"),
        }
    }
}

impl FromStr for NetworkLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "citation" => Ok(NetworkLabel::Citation),
            "text" => Ok(NetworkLabel::Text),
            other => Err(Error::InvalidParameter {
                what: "network label",
                why: format!("unknown label {other:?}"),
            }),
        }
    }
}

/// Node kind: a corpus document or an auxiliary external work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Core,
    Auxiliary,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Core => write!(f, "core"),
            NodeKind::Auxiliary => write!(f, "aux"),
        }
    }
}

/// A weighted undirected graph over document nodes, plus auxiliary
/// external-work nodes in citation networks.
///
/// Nodes are held in canonical order (core nodes sorted by id, then auxiliary
/// nodes sorted by id); edges are `(u, v, w)` with `u < v` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityNetwork {
    label: NetworkLabel,
    nodes: Vec<(String, NodeKind)>,
    edges: Vec<(u32, u32, f64)>,
    index: HashMap<String, u32>,
}

impl SimilarityNetwork {
    /// Build a network, enforcing the structural invariants: unique node ids,
    /// no self-loops, no duplicate edges, strictly positive weights, and
    /// auxiliary nodes only in citation networks.
    pub fn new(
        label: NetworkLabel,
        nodes: Vec<(String, NodeKind)>,
        edges: Vec<(String, String, f64)>,
    ) -> Result<Self> {
        let mut cores: Vec<String> = Vec::new();
        let mut auxes: Vec<String> = Vec::new();
        for (id, kind) in &nodes {
            match kind {
                NodeKind::Core => cores.push(id.clone()),
                NodeKind::Auxiliary => auxes.push(id.clone()),
            }
        }
        if label != NetworkLabel::Citation && !auxes.is_empty() {
            return Err(Error::InvalidEdge(
                "auxiliary nodes are only allowed in citation networks".into(),
            ));
        }
        cores.sort();
        auxes.sort();
        let mut ordered: Vec<(String, NodeKind)> = Vec::with_capacity(nodes.len());
        ordered.extend(cores.into_iter().map(|id| (id, NodeKind::Core)));
        ordered.extend(auxes.into_iter().map(|id| (id, NodeKind::Auxiliary)));

        let mut index = HashMap::with_capacity(ordered.len());
        for (pos, (id, kind)) in ordered.iter().enumerate() {
            if let Some(prev) = index.insert(id.clone(), pos as u32) {
                let (_, prev_kind) = &ordered[prev as usize];
                if *prev_kind != *kind {
                    return Err(Error::NodeIdCollision(id.clone()));
                }
                return Err(Error::InvalidEdge(format!("duplicate node id {id:?}")));
            }
        }

        let mut canonical: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len());
        let mut seen: BTreeSet<(u32, u32)> = BTreeSet::new();
        for (a, b, w) in edges {
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::InvalidEdge(format!("edge endpoint {a:?} is not a node")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::InvalidEdge(format!("edge endpoint {b:?} is not a node")))?;
            if ia == ib {
                return Err(Error::InvalidEdge(format!("self-loop on {a:?}")));
            }
            let weight_ok = w.is_finite() && w > 0.0;
            if !weight_ok {
                return Err(Error::InvalidEdge(format!(
                    "edge {a:?}-{b:?} has non-positive weight {w}"
                )));
            }
            let (u, v) = if ia < ib { (ia, ib) } else { (ib, ia) };
            if !seen.insert((u, v)) {
                return Err(Error::InvalidEdge(format!("duplicate edge {a:?}-{b:?}")));
            }
            canonical.push((u, v, w));
        }
        canonical.sort_by_key(|a| (a.0, a.1));

        Ok(SimilarityNetwork {
            label,
            nodes: ordered,
            edges: canonical,
            index,
        })
    }

    pub fn label(&self) -> NetworkLabel {
        self.label
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in canonical order.
    pub fn nodes(&self) -> &[(String, NodeKind)] {
        &self.nodes
    }

    /// Edges `(u, v, w)` with `u < v`, as canonical node indices.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn node_id(&self, idx: u32) -> &str {
        &self.nodes[idx as usize].0
    }

    pub fn node_kind(&self, idx: u32) -> NodeKind {
        self.nodes[idx as usize].1
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    /// Number of core (document) nodes.
    pub fn core_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|(_, k)| *k == NodeKind::Core)
            .count()
    }

    /// Write the network as plain text: a header line with the label and node
    /// count, one node line per node, then one edge line per edge.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "similarity-network\t{}\t{}",
            self.label,
            self.nodes.len()
        )
        .map_err(|e| Error::io(path, e))?;
        for (id, kind) in &self.nodes {
            writeln!(w, "{id}\t{kind}").map_err(|e| Error::io(path, e))?;
        }
        for &(u, v, weight) in &self.edges {
            writeln!(w, "{}\t{}\t{}", self.node_id(u), self.node_id(v), weight)
                .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();

        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() != 3 || cols[0] != "similarity-network" {
            return Err(Error::parse(path, 1, "malformed network header"));
        }
        let label: NetworkLabel = cols[1].parse()?;
        let node_count: usize = cols[2]
            .parse()
            .map_err(|_| Error::parse(path, 1, "bad node count"))?;

        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, "unexpected end of node section"))?;
            let line = line.map_err(|e| Error::io(path, e))?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::parse(path, idx + 1, "malformed node line"));
            }
            let kind = match cols[1] {
                "core" => NodeKind::Core,
                "aux" => NodeKind::Auxiliary,
                other => {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        format!("bad node kind {other:?}"),
                    ))
                }
            };
            nodes.push((cols[0].to_string(), kind));
        }

        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, idx + 1, "malformed edge line"));
            }
            let w: f64 = cols[2]
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, "bad edge weight"))?;
            edges.push((cols[0].to_string(), cols[1].to_string(), w));
        }
        SimilarityNetwork::new(label, nodes, edges)
    }
}

/// Term extraction settings: stopwords plus the maximum n-gram length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionConfig {
    pub stopwords: BTreeSet<String>,
    pub max_ngram: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            stopwords: default_stopwords(),
            max_ngram: 2,
        }
    }
}

/// A small built-in English stopword list, used when the config does not
/// supply one.
pub fn default_stopwords() -> BTreeSet<String> {
    [
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "if",
        "in", "into", "is", "it", "its", "no", "not", "of", "on", "or", "such", "that", "the",
        "their", "then", "there", "these", "they", "this", "to", "was", "we", "were", "which",
        "will", "with",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Extract the term multiset of a document: lowercased alphanumeric tokens
/// from title and abstract, stopwords removed, then contiguous n-grams up to
/// `max_ngram` over the filtered token sequence of each field.
pub fn extract_terms(doc: &Document, config: &ExtractionConfig) -> BTreeMap<String, u32> {
    let mut terms: BTreeMap<String, u32> = BTreeMap::new();
    for field in [&doc.title, &doc.abstract_text] {
        let tokens: Vec<String> = tokenize(field)
            .into_iter()
            .filter(|t| !config.stopwords.contains(t))
            .collect();
        for n in 1..=config.max_ngram.max(1) {
            if tokens.len() < n {
                break;
            }
            for window in tokens.windows(n) {
                *terms.entry(window.join(" ")).or_insert(0) += 1;
            }
        }
    }
    terms
}

/// Per-term and per-document statistics backing BM25 scoring.
///
/// Statistics cover exactly the documents with a nonempty extracted term
/// multiset; `avgdl` is the mean multiset size over those documents.
#[derive(Debug, Clone)]
pub struct TermStatistics {
    terms: Vec<String>,
    doc_ids: Vec<String>,
    doc_index: HashMap<String, u32>,
    doc_terms: Vec<Vec<(u32, u32)>>,
    doc_len: Vec<u32>,
    doc_freq: Vec<u32>,
    n_docs: u32,
    avgdl: f64,
}

impl TermStatistics {
    pub fn build(corpus: &Corpus, config: &ExtractionConfig) -> Self {
        let raw: Vec<BTreeMap<String, u32>> = corpus
            .docs()
            .par_iter()
            .map(|doc| extract_terms(doc, config))
            .collect();

        // Term ids in lexicographic order so that iteration and summation
        // order are stable across runs.
        let mut vocab: BTreeSet<&str> = BTreeSet::new();
        for terms in &raw {
            vocab.extend(terms.keys().map(|s| s.as_str()));
        }
        let terms: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
        let term_ids: HashMap<&str, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();

        let mut doc_terms = Vec::with_capacity(raw.len());
        let mut doc_len = Vec::with_capacity(raw.len());
        let mut doc_freq = vec![0u32; terms.len()];
        let mut n_docs = 0u32;
        let mut total_len = 0u64;
        for counts in &raw {
            let mut row: Vec<(u32, u32)> = counts
                .iter()
                .map(|(t, &f)| (term_ids[t.as_str()], f))
                .collect();
            row.sort_unstable_by_key(|&(t, _)| t);
            let len: u32 = row.iter().map(|&(_, f)| f).sum();
            for &(t, _) in &row {
                doc_freq[t as usize] += 1;
            }
            if len > 0 {
                n_docs += 1;
                total_len += u64::from(len);
            }
            doc_len.push(len);
            doc_terms.push(row);
        }
        let avgdl = if n_docs > 0 {
            total_len as f64 / f64::from(n_docs)
        } else {
            0.0
        };

        let doc_ids: Vec<String> = corpus.docs().iter().map(|d| d.doc_id.clone()).collect();
        let doc_index = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();

        TermStatistics {
            terms,
            doc_ids,
            doc_index,
            doc_terms,
            doc_len,
            doc_freq,
            n_docs,
            avgdl,
        }
    }

    /// Number of documents covered by the statistics (nonempty term multiset).
    pub fn doc_count(&self) -> u32 {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Document frequency of a term.
    pub fn doc_frequency(&self, term: &str) -> u32 {
        match self.terms.binary_search_by(|t| t.as_str().cmp(term)) {
            Ok(i) => self.doc_freq[i],
            Err(_) => 0,
        }
    }

    /// Term multiset size of a document.
    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.doc_index
            .get(doc_id)
            .map(|&i| self.doc_len[i as usize])
    }

    fn idf(&self, term_id: u32) -> f64 {
        let n = f64::from(self.n_docs);
        let n_t = f64::from(self.doc_freq[term_id as usize]);
        ((n - n_t + 0.5) / (n_t + 0.5) + 1.0).ln()
    }

    fn freq_in(&self, doc_pos: u32, term_id: u32) -> u32 {
        let row = &self.doc_terms[doc_pos as usize];
        match row.binary_search_by_key(&term_id, |&(t, _)| t) {
            Ok(i) => row[i].1,
            Err(_) => 0,
        }
    }

    fn score_positions(&self, query: u32, target: u32, params: Bm25Params) -> f64 {
        let norm = params.k1
            * (1.0 - params.b + params.b * f64::from(self.doc_len[target as usize]) / self.avgdl);
        let mut score = 0.0;
        for &(t, _) in &self.doc_terms[query as usize] {
            let f = self.freq_in(target, t);
            if f > 0 {
                let f = f64::from(f);
                score += self.idf(t) * f * (params.k1 + 1.0) / (f + norm);
            }
        }
        score
    }
}

/// BM25 parameters. The standard defaults are `k1 = 1.2`, `b = 0.75`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        let k1_ok = self.k1.is_finite() && self.k1 > 0.0;
        if !k1_ok {
            return Err(Error::InvalidParameter {
                what: "k1",
                why: format!("must be > 0, got {}", self.k1),
            });
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter {
                what: "b",
                why: format!("must be in [0, 1], got {}", self.b),
            });
        }
        Ok(())
    }
}

/// BM25 score of a target document for the distinct terms of a query
/// document. Zero when the two share no extracted terms.
pub fn bm25_score(
    stats: &TermStatistics,
    query_doc: &str,
    target_doc: &str,
    params: Bm25Params,
) -> Result<f64> {
    params.validate()?;
    let q = *stats
        .doc_index
        .get(query_doc)
        .ok_or_else(|| Error::InvalidParameter {
            what: "query doc",
            why: format!("{query_doc:?} not in statistics"),
        })?;
    let d = *stats
        .doc_index
        .get(target_doc)
        .ok_or_else(|| Error::InvalidParameter {
            what: "target doc",
            why: format!("{target_doc:?} not in statistics"),
        })?;
    if stats.doc_len[d as usize] == 0 || stats.doc_len[q as usize] == 0 {
        return Ok(0.0);
    }
    Ok(stats.score_positions(q, d, params))
}

/// Build the BM25 text similarity network.
///
/// For each document the `top_k` highest-scoring targets are kept as directed
/// candidates (ties broken by smaller target doc id). The undirected edge
/// weight is the mean of the two directed scores when both directions
/// survive, else the surviving score. Documents with empty text become
/// isolated nodes.
pub fn build_bm25_network(
    corpus: &Corpus,
    config: &ExtractionConfig,
    params: Bm25Params,
    top_k: usize,
) -> Result<SimilarityNetwork> {
    params.validate()?;
    if top_k == 0 {
        return Err(Error::InvalidParameter {
            what: "top_k",
            why: "must be >= 1".into(),
        });
    }
    let stats = TermStatistics::build(corpus, config);
    let n = stats.doc_ids.len();

    // Postings lists per term, in ascending document position.
    let mut postings: Vec<Vec<(u32, u32)>> = vec![Vec::new(); stats.terms.len()];
    for (pos, row) in stats.doc_terms.iter().enumerate() {
        for &(t, f) in row {
            postings[t as usize].push((pos as u32, f));
        }
    }
    let idf: Vec<f64> = (0..stats.terms.len() as u32)
        .map(|t| stats.idf(t))
        .collect();
    let norm: Vec<f64> = stats
        .doc_len
        .iter()
        .map(|&len| {
            if stats.avgdl > 0.0 {
                params.k1 * (1.0 - params.b + params.b * f64::from(len) / stats.avgdl)
            } else {
                params.k1
            }
        })
        .collect();

    // Per-document top-k directed candidates; independent per document, so
    // the parallel map is deterministic.
    let survivors: Vec<Vec<(u32, f64)>> = (0..n as u32)
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n], Vec::<u32>::new()),
            |(acc, touched), q| {
                let row = &stats.doc_terms[q as usize];
                if row.is_empty() {
                    return Vec::new();
                }
                for &(t, _) in row {
                    let w_idf = idf[t as usize];
                    for &(d, f) in &postings[t as usize] {
                        if d == q {
                            continue;
                        }
                        if acc[d as usize] == 0.0 {
                            touched.push(d);
                        }
                        let f = f64::from(f);
                        acc[d as usize] += w_idf * f * (params.k1 + 1.0) / (f + norm[d as usize]);
                    }
                }
                let mut cands: Vec<(u32, f64)> =
                    touched.iter().map(|&d| (d, acc[d as usize])).collect();
                for &d in touched.iter() {
                    acc[d as usize] = 0.0;
                }
                touched.clear();
                // Descending score; ties broken by smaller target doc id
                // (positions follow doc id order).
                cands.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                cands.truncate(top_k);
                cands
            },
        )
        .collect();

    // Merge directed survivors into undirected edges.
    let mut directed: HashMap<(u32, u32), f64> = HashMap::new();
    for (q, cands) in survivors.iter().enumerate() {
        for &(d, s) in cands {
            directed.insert((q as u32, d), s);
        }
    }
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    let mut done: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (&(q, d), &s) in &directed {
        let (u, v) = if q < d { (q, d) } else { (d, q) };
        if !done.insert((u, v)) {
            continue;
        }
        let forward = directed.get(&(u, v)).copied();
        let backward = directed.get(&(v, u)).copied();
        let weight = match (forward, backward) {
            (Some(a), Some(b)) => (a + b) / 2.0,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!(),
        };
        if weight > 0.0 {
            edges.push((
                stats.doc_ids[u as usize].clone(),
                stats.doc_ids[v as usize].clone(),
                weight,
            ));
        }
        let _ = s;
    }

    let nodes: Vec<(String, NodeKind)> = stats
        .doc_ids
        .iter()
        .map(|id| (id.clone(), NodeKind::Core))
        .collect();
    SimilarityNetwork::new(NetworkLabel::Text, nodes, edges)
}

/// Build the extended direct citation network.
///
/// Every document is a core node; a citation between two corpus documents
/// becomes a weight-1 edge (direction discarded, parallel citations
/// collapsed). Each external work cited by at least `min_external_support`
/// core documents becomes an auxiliary node with weight-1 edges to its
/// citers. Dangling internal references are ignored.
pub fn build_extended_citation_network(
    corpus: &Corpus,
    min_external_support: usize,
) -> Result<SimilarityNetwork> {
    if min_external_support == 0 {
        return Err(Error::InvalidParameter {
            what: "min_external_support",
            why: "must be >= 1".into(),
        });
    }
    let mut core_edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut citers: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (pos, doc) in corpus.docs().iter().enumerate() {
        let pos = pos as u32;
        for r in &doc.internal_refs {
            if let Some(target) = corpus.position(r) {
                let (u, v) = if pos < target {
                    (pos, target)
                } else {
                    (target, pos)
                };
                if u != v {
                    core_edges.insert((u, v));
                }
            }
        }
        for x in &doc.external_refs {
            citers.entry(x.as_str()).or_default().insert(pos);
        }
    }

    let mut nodes: Vec<(String, NodeKind)> = corpus
        .docs()
        .iter()
        .map(|d| (d.doc_id.clone(), NodeKind::Core))
        .collect();
    let mut edges: Vec<(String, String, f64)> = core_edges
        .into_iter()
        .map(|(u, v)| {
            (
                corpus.docs()[u as usize].doc_id.clone(),
                corpus.docs()[v as usize].doc_id.clone(),
                1.0,
            )
        })
        .collect();

    for (ext, docs) in citers {
        if docs.len() >= min_external_support {
            if corpus.contains(ext) {
                return Err(Error::NodeIdCollision(ext.to_string()));
            }
            nodes.push((ext.to_string(), NodeKind::Auxiliary));
            for &d in &docs {
                edges.push((
                    corpus.docs()[d as usize].doc_id.clone(),
                    ext.to_string(),
                    1.0,
                ));
            }
        }
    }

    SimilarityNetwork::new(NetworkLabel::Citation, nodes, edges)
}
