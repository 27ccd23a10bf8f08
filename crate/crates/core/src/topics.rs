//! Topic preparation: expand raw document annotations to taxonomy ancestors,
//! then filter by size, remove redundant topics, filter small branches and
//! assign size bins.
//!
//! A topic is a `(term, branch)` pair: the same term reached through tree
//! positions in different branches yields distinct topics. The pipeline order
//! is fixed: expand, size filter, redundancy removal, branch filter, bins.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{branch_of_path, parent_path, path_depth, Corpus, Taxonomy};
use crate::error::{Error, Result};

/// A topic: a term paired with one branch, plus its expanded document set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicTerm {
    pub term_id: String,
    pub branch: String,
    /// Sorted, deduplicated document ids.
    pub documents: Vec<String>,
    /// Label of the size bin, once assigned; `None` outside every retained bin.
    pub size_bin: Option<String>,
}

impl TopicTerm {
    pub fn new(
        term_id: impl Into<String>,
        branch: impl Into<String>,
        mut docs: Vec<String>,
    ) -> Self {
        docs.sort();
        docs.dedup();
        TopicTerm {
            term_id: term_id.into(),
            branch: branch.into(),
            documents: docs,
            size_bin: None,
        }
    }

    pub fn size(&self) -> u64 {
        self.documents.len() as u64
    }
}

/// An annotation that could not be expanded (term has no tree position).
pub type SkippedAnnotation = (String, String); // (doc_id, term_id)

fn sort_topics(topics: &mut [TopicTerm]) {
    topics.sort_by(|a, b| {
        (a.term_id.as_str(), a.branch.as_str()).cmp(&(b.term_id.as_str(), b.branch.as_str()))
    });
}

/// Expand every document annotation to the annotated term and all of its
/// ancestors along each tree position, pairing each with that position's
/// branch. Document sets are unions. Annotations whose term has no tree
/// position are skipped and reported.
pub fn expand_annotations(
    corpus: &Corpus,
    taxonomy: &Taxonomy,
) -> (Vec<TopicTerm>, Vec<SkippedAnnotation>) {
    let mut sets: BTreeMap<(String, String), BTreeSet<u32>> = BTreeMap::new();
    let mut skipped: Vec<SkippedAnnotation> = Vec::new();
    for (pos, doc) in corpus.docs().iter().enumerate() {
        let pos = pos as u32;
        for term in &doc.annotations {
            let positions = match taxonomy.positions_of(term) {
                Some(p) if !p.is_empty() => p,
                _ => {
                    skipped.push((doc.doc_id.clone(), term.clone()));
                    continue;
                }
            };
            for tree_path in positions {
                let branch = branch_of_path(tree_path).to_string();
                let mut current: Option<&str> = Some(tree_path.as_str());
                while let Some(p) = current {
                    if let Some(owner) = taxonomy.term_of_path(p) {
                        sets.entry((owner.to_string(), branch.clone()))
                            .or_default()
                            .insert(pos);
                    }
                    current = parent_path(p);
                }
            }
        }
    }
    let topics = sets
        .into_iter()
        .map(|((term_id, branch), docs)| TopicTerm {
            term_id,
            branch,
            documents: docs
                .into_iter()
                .map(|p| corpus.docs()[p as usize].doc_id.clone())
                .collect(),
            size_bin: None,
        })
        .collect();
    (topics, skipped)
}

/// Retain topics with `min_exclusive < size <= max_inclusive`.
pub fn filter_by_size(
    topics: Vec<TopicTerm>,
    min_exclusive: u64,
    max_inclusive: u64,
) -> Vec<TopicTerm> {
    topics
        .into_iter()
        .filter(|t| t.size() > min_exclusive && t.size() <= max_inclusive)
        .collect()
}

/// Jaccard similarity of two sorted, deduplicated document slices.
/// Defined as 0 when both are empty.
pub fn jaccard(a: &[String], b: &[String]) -> f64 {
    let inter = intersection_size(a, b);
    let union = a.len() as u64 + b.len() as u64 - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn intersection_size(a: &[String], b: &[String]) -> u64 {
    let mut i = 0;
    let mut j = 0;
    let mut count = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Exact test of `|a n b| / |a u b| >= threshold` without float rounding at
/// the boundary; the threshold is taken at its shortest decimal rendering.
fn jaccard_at_least(a: &[String], b: &[String], threshold: (u64, u64)) -> bool {
    let inter = intersection_size(a, b) as u128;
    let union = (a.len() as u64 + b.len() as u64) as u128 - inter;
    if union == 0 {
        return false;
    }
    inter * u128::from(threshold.1) >= u128::from(threshold.0) * union
}

/// Parse a non-negative f64 into an exact decimal fraction `(num, den)` using
/// its shortest round-trip rendering (`0.9` becomes `9/10`).
pub(crate) fn decimal_fraction(x: f64) -> Result<(u64, u64)> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParameter {
            what: "decimal fraction",
            why: format!("{x} is not a finite non-negative number"),
        });
    }
    let text = format!("{x}");
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };
    let digits: String = format!("{int_part}{frac_part}");
    let num: u64 = digits.parse().map_err(|_| Error::InvalidParameter {
        what: "decimal fraction",
        why: format!("{x} has too many significant digits"),
    })?;
    let den = 10u64
        .checked_pow(frac_part.len() as u32)
        .ok_or_else(|| Error::InvalidParameter {
            what: "decimal fraction",
            why: format!("{x} has too many decimal places"),
        })?;
    let g = gcd(num.max(1), den);
    Ok((num / g, den / g))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Group near-duplicate topics by complete-linkage agglomeration under
/// distance `1 - jaccard`, merging while the complete-linkage distance stays
/// within `1 - threshold`, and keep only the smallest topic of each group.
///
/// Ties on size are broken by the deepest tree position within the topic's
/// branch, then by the largest number of tree positions anywhere in the tree,
/// then by term id and branch.
pub fn remove_redundant(
    topics: Vec<TopicTerm>,
    threshold: f64,
    taxonomy: &Taxonomy,
) -> Result<Vec<TopicTerm>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter {
            what: "jaccard threshold",
            why: format!("must be in [0, 1], got {threshold}"),
        });
    }
    let frac = decimal_fraction(threshold)?;
    let n = topics.len();
    if n <= 1 {
        let mut topics = topics;
        sort_topics(&mut topics);
        return Ok(topics);
    }

    // Pairwise eligibility and distance. A pair can only reach the threshold
    // when the smaller set is at least `threshold` of the larger one, so most
    // pairs are ruled out by size alone.
    let mut eligible: Vec<Vec<bool>> = vec![vec![false; n]; n];
    let mut dist: Vec<Vec<f64>> = vec![vec![2.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&topics[i].documents, &topics[j].documents);
            let (small, large) = if a.len() <= b.len() {
                (a.len(), b.len())
            } else {
                (b.len(), a.len())
            };
            if (small as u128) * u128::from(frac.1) < u128::from(frac.0) * (large as u128) {
                continue;
            }
            if jaccard_at_least(a, b, frac) {
                eligible[i][j] = true;
                eligible[j][i] = true;
                let d = 1.0 - jaccard(a, b);
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
    }

    // Agglomerate: groups are index sets; merge the closest eligible pair of
    // groups until none remains. Under complete linkage a group pair is
    // eligible only if every cross pair is.
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut g_eligible: Vec<Vec<bool>> = eligible.clone();
    let mut g_dist: Vec<Vec<f64>> = dist.clone();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                if !g_eligible[i][j] {
                    continue;
                }
                let d = g_dist[i][j];
                if best.is_none_or(|(bd, bi, bj)| d < bd || (d == bd && (i, j) < (bi, bj))) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let merged = groups.remove(j);
        groups[i].extend(merged);
        for k in 0..g_dist.len() {
            g_dist[i][k] = g_dist[i][k].max(g_dist[j][k]);
            g_eligible[i][k] = g_eligible[i][k] && g_eligible[j][k];
        }
        for k in 0..g_dist.len() {
            g_dist[k][i] = g_dist[i][k];
            g_eligible[k][i] = g_eligible[i][k];
        }
        g_dist.remove(j);
        g_eligible.remove(j);
        for row in g_dist.iter_mut() {
            row.remove(j);
        }
        for row in g_eligible.iter_mut() {
            row.remove(j);
        }
    }

    let mut kept: Vec<TopicTerm> = Vec::with_capacity(groups.len());
    let mut topics_opt: Vec<Option<TopicTerm>> = topics.into_iter().map(Some).collect();
    for group in groups {
        let keeper = *group
            .iter()
            .min_by_key(|&&i| {
                let t = topics_opt[i].as_ref().unwrap();
                (
                    t.size(),
                    std::cmp::Reverse(branch_depth(taxonomy, t)),
                    std::cmp::Reverse(taxonomy.instance_count(&t.term_id)),
                    t.term_id.clone(),
                    t.branch.clone(),
                )
            })
            .unwrap();
        kept.push(topics_opt[keeper].take().unwrap());
    }
    sort_topics(&mut kept);
    Ok(kept)
}

/// Deepest tree position of the topic's term within the topic's branch.
fn branch_depth(taxonomy: &Taxonomy, topic: &TopicTerm) -> usize {
    taxonomy
        .positions_of(&topic.term_id)
        .map(|positions| {
            positions
                .iter()
                .filter(|p| branch_of_path(p) == topic.branch)
                .map(|p| path_depth(p))
                .max()
                .unwrap_or(0)
        })
        .unwrap_or(0)
}

/// Retain topics whose branch holds at least `min_terms` topics.
pub fn filter_branches(topics: Vec<TopicTerm>, min_terms: usize) -> Vec<TopicTerm> {
    let mut per_branch: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &topics {
        *per_branch.entry(t.branch.as_str()).or_insert(0) += 1;
    }
    let keep: BTreeSet<String> = per_branch
        .into_iter()
        .filter(|&(_, c)| c >= min_terms)
        .map(|(b, _)| b.to_string())
        .collect();
    topics
        .into_iter()
        .filter(|t| keep.contains(&t.branch))
        .collect()
}

/// Ordered, disjoint size intervals `(lower exclusive, upper inclusive)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBins {
    intervals: Vec<(u64, u64)>,
}

impl SizeBins {
    pub fn new(intervals: Vec<(u64, u64)>) -> Result<Self> {
        let mut prev_hi = 0u64;
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if lo >= hi {
                return Err(Error::InvalidParameter {
                    what: "size bins",
                    why: format!("interval ({lo}, {hi}] is empty"),
                });
            }
            if i > 0 && lo < prev_hi {
                return Err(Error::InvalidParameter {
                    what: "size bins",
                    why: format!("interval ({lo}, {hi}] overlaps or precedes an earlier one"),
                });
            }
            prev_hi = hi;
        }
        Ok(SizeBins { intervals })
    }

    /// The five bins used for the full-scale corpus: 501-1,000 up to
    /// 8,001-16,000.
    pub fn paper_bins() -> Self {
        SizeBins {
            intervals: vec![
                (500, 1000),
                (1000, 2000),
                (2000, 4000),
                (4000, 8000),
                (8000, 16000),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(u64, u64)] {
        &self.intervals
    }

    pub fn bin_of(&self, size: u64) -> Option<usize> {
        self.intervals
            .iter()
            .position(|&(lo, hi)| size > lo && size <= hi)
    }

    pub fn label(&self, idx: usize) -> String {
        let (lo, hi) = self.intervals[idx];
        format!("{}-{}", lo + 1, hi)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.intervals.len()).map(|i| self.label(i)).collect()
    }
}

impl Default for SizeBins {
    fn default() -> Self {
        SizeBins::paper_bins()
    }
}

/// Assign each topic the bin containing its size. Bins that fail the
/// `min_terms_per_branch_per_bin` rule in any retained branch are dropped
/// globally; topics of dropped bins (and topics outside every bin) get
/// `None`.
pub fn assign_size_bins(
    mut topics: Vec<TopicTerm>,
    bins: &SizeBins,
    min_terms_per_branch_per_bin: usize,
) -> Vec<TopicTerm> {
    let branches: BTreeSet<&str> = topics.iter().map(|t| t.branch.as_str()).collect();
    let mut counts: BTreeMap<(&str, usize), usize> = BTreeMap::new();
    let assigned: Vec<Option<usize>> = topics.iter().map(|t| bins.bin_of(t.size())).collect();
    for (t, bin) in topics.iter().zip(&assigned) {
        if let Some(b) = bin {
            *counts.entry((t.branch.as_str(), *b)).or_insert(0) += 1;
        }
    }
    let retained_bins: BTreeSet<usize> = (0..bins.len())
        .filter(|&b| {
            branches.iter().all(|br| {
                counts.get(&(br, b)).copied().unwrap_or(0) >= min_terms_per_branch_per_bin
            })
        })
        .collect();
    let labels: Vec<String> = bins.labels();
    for (t, bin) in topics.iter_mut().zip(assigned) {
        t.size_bin = bin
            .filter(|b| retained_bins.contains(b))
            .map(|b| labels[b].clone());
    }
    topics
}

/// Settings of the topic preparation pipeline. Defaults follow the
/// full-scale configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicParams {
    pub min_size_exclusive: u64,
    pub max_size_inclusive: u64,
    pub jaccard_threshold: f64,
    pub branch_min_terms: usize,
    pub bins: SizeBins,
    pub min_terms_per_branch_per_bin: usize,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            min_size_exclusive: 500,
            max_size_inclusive: 300_000,
            jaccard_threshold: 0.9,
            branch_min_terms: 100,
            bins: SizeBins::paper_bins(),
            min_terms_per_branch_per_bin: 10,
        }
    }
}

/// Run the full topic pipeline in its fixed order:
/// expand, size filter, redundancy removal, branch filter, size bins.
pub fn prepare_topics(
    corpus: &Corpus,
    taxonomy: &Taxonomy,
    params: &TopicParams,
) -> Result<(Vec<TopicTerm>, Vec<SkippedAnnotation>)> {
    let (topics, skipped) = expand_annotations(corpus, taxonomy);
    let topics = filter_by_size(topics, params.min_size_exclusive, params.max_size_inclusive);
    let topics = remove_redundant(topics, params.jaccard_threshold, taxonomy)?;
    let topics = filter_branches(topics, params.branch_min_terms);
    let topics = assign_size_bins(topics, &params.bins, params.min_terms_per_branch_per_bin);
    Ok((topics, skipped))
}

/// Per-branch, per-bin topic counts as a tab-separated table.
pub fn branch_bin_table(topics: &[TopicTerm], bins: &SizeBins) -> String {
    let branches: BTreeSet<&str> = topics.iter().map(|t| t.branch.as_str()).collect();
    let labels = bins.labels();
    let mut out = String::from("branch");
    for l in &labels {
        out.push('\t');
        out.push_str(l);
    }
    out.push_str("\tunbinned\ttotal\n");
    for branch in branches {
        let mut row = vec![0usize; labels.len() + 1];
        let mut total = 0usize;
        for t in topics.iter().filter(|t| t.branch == branch) {
            total += 1;
            match &t.size_bin {
                Some(l) => match labels.iter().position(|x| x == l) {
                    Some(idx) => row[idx] += 1,
                    None => row[labels.len()] += 1,
                },
                None => row[labels.len()] += 1,
            }
        }
        out.push_str(branch);
        for c in &row {
            out.push('\t');
            out.push_str(&c.to_string());
        }
        out.push('\t');
        out.push_str(&total.to_string());
        out.push('\n');
    }
    out
}

/// Write topics as tab-separated rows:
/// `term_id, branch, size, size_bin, doc ids (;-joined)`.
pub fn save_topics(topics: &[TopicTerm], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "term_id\tbranch\tsize\tsize_bin\tdocs").map_err(|e| Error::io(path, e))?;
    for t in topics {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            t.term_id,
            t.branch,
            t.size(),
            t.size_bin.as_deref().unwrap_or("-"),
            t.documents.join(";"),
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<TopicTerm>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut topics = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(path, idx + 1, "expected 5 columns"));
        }
        let docs: Vec<String> = cols[4]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string())
            .collect();
        let mut topic = TopicTerm::new(cols[0], cols[1], docs);
        if cols[3] != "-" {
            topic.size_bin = Some(cols[3].to_string());
        }
        let declared: u64 = cols[2]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "bad size"))?;
        if declared != topic.size() {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("declared size {declared} != {} docs", topic.size()),
            ));
        }
        topics.push(topic);
    }
    Ok(topics)
}
