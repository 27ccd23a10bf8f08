//! Per-topic clustering effectiveness: coverage-based cluster selection,
//! Purity, ICC, and the citation-vs-text ratio metrics.
//!
//! For a topic with document set `D_M` and a cleaned solution, clusters are
//! selected in descending order of their topic-document count until the
//! selection covers at least a `Coverage` share of the topic documents
//! present in the solution. That greedy prefix is the smallest selection
//! meeting the coverage. Purity is the fraction of documents in the selected
//! clusters that belong to the topic; ICC is one over the number of selected
//! clusters.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leiden::ClusteringSolution;
use crate::simnet::NetworkLabel;
use crate::topics::{decimal_fraction, TopicTerm};

/// A coverage share in `(0, 1]`, kept as an exact decimal fraction so the
/// selection threshold `coverage * M` is compared without float rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coverage {
    num: u64,
    den: u64,
}

impl Coverage {
    pub fn from_f64(value: f64) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::InvalidParameter {
                what: "coverage",
                why: format!("must be in (0, 1], got {value}"),
            });
        }
        let (num, den) = decimal_fraction(value)?;
        Ok(Coverage { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// True when `covered` out of `total` meets the share.
    fn met(&self, covered: u64, total: u64) -> bool {
        u128::from(covered) * u128::from(self.den) >= u128::from(self.num) * u128::from(total)
    }
}

/// Select clusters for a topic: descending topic-document count, ties broken
/// by smaller cluster size then lower cluster id, taken until the cumulative
/// count reaches `coverage * M`, where `M` is the number of topic documents
/// present in the solution. No smaller selection meets the coverage.
pub fn select_clusters(
    topic_docs: &[String],
    solution: &ClusteringSolution,
    coverage: Coverage,
) -> Result<Vec<u32>> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for doc in topic_docs {
        if let Some(c) = solution.cluster_of(doc) {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::TopicDocsAbsent);
    }
    let mut order: Vec<(u32, u64)> = counts.into_iter().collect();
    order.sort_by_key(|&(c, m)| (Reverse(m), solution.cluster_size(c), c));

    let mut selected = Vec::new();
    let mut covered = 0u64;
    for (c, m) in order {
        selected.push(c);
        covered += m;
        if coverage.met(covered, total) {
            break;
        }
    }
    Ok(selected)
}

/// Purity numerator and denominator: topic documents inside the selected
/// clusters over all documents of the selected clusters.
pub fn purity_fraction(
    selected: &[u32],
    topic_docs: &[String],
    solution: &ClusteringSolution,
) -> (u64, u64) {
    let sel: BTreeMap<u32, ()> = selected.iter().map(|&c| (c, ())).collect();
    let mut num = 0u64;
    for doc in topic_docs {
        if let Some(c) = solution.cluster_of(doc) {
            if sel.contains_key(&c) {
                num += 1;
            }
        }
    }
    let den: u64 = selected
        .iter()
        .map(|&c| u64::from(solution.cluster_size(c)))
        .sum();
    (num, den)
}

/// Purity of a nonempty selection, in `[0, 1]`.
pub fn purity(selected: &[u32], topic_docs: &[String], solution: &ClusteringSolution) -> f64 {
    let (num, den) = purity_fraction(selected, topic_docs, solution);
    num as f64 / den as f64
}

/// Inverse count of clusters: one over the number of selected clusters.
pub fn icc(selected_count: usize) -> f64 {
    1.0 / selected_count as f64
}

/// Effectiveness of one topic for one solution at one coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessRecord {
    pub term_id: String,
    pub branch: String,
    pub size_bin: String,
    pub network: NetworkLabel,
    pub resolution: f64,
    pub coverage: f64,
    pub n_selected: usize,
    pub purity: f64,
    pub icc: f64,
}

/// Evaluate one topic against one solution at one coverage.
pub fn evaluate_topic(
    topic: &TopicTerm,
    solution: &ClusteringSolution,
    coverage: Coverage,
) -> Result<EffectivenessRecord> {
    let selected = select_clusters(&topic.documents, solution, coverage).map_err(|e| match e {
        Error::TopicDocsAbsent => Error::TopicAbsent {
            term_id: topic.term_id.clone(),
            branch: topic.branch.clone(),
        },
        other => other,
    })?;
    let purity = purity(&selected, &topic.documents, solution);
    Ok(EffectivenessRecord {
        term_id: topic.term_id.clone(),
        branch: topic.branch.clone(),
        size_bin: topic.size_bin.clone().unwrap_or_default(),
        network: solution.meta().network,
        resolution: solution.meta().resolution,
        coverage: coverage.as_f64(),
        n_selected: selected.len(),
        purity,
        icc: icc(selected.len()),
    })
}

/// Why a `(topic, solution, coverage)` combination produced no record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub term_id: String,
    pub branch: String,
    pub network: Option<NetworkLabel>,
    pub resolution: Option<f64>,
    pub coverage: Option<f64>,
    pub reason: String,
}

/// Evaluate every binned topic against every solution at every coverage.
/// Topics without a size bin are excluded; every absence is recorded as a
/// skip entry. The output is sorted and independent of thread scheduling.
pub fn evaluate_grid(
    topics: &[TopicTerm],
    solutions: &[ClusteringSolution],
    coverages: &[Coverage],
) -> (Vec<EffectivenessRecord>, Vec<SkipEntry>) {
    let mut skips: Vec<SkipEntry> = Vec::new();
    let mut binned: Vec<&TopicTerm> = Vec::new();
    for t in topics {
        if t.size_bin.is_some() {
            binned.push(t);
        } else {
            skips.push(SkipEntry {
                term_id: t.term_id.clone(),
                branch: t.branch.clone(),
                network: None,
                resolution: None,
                coverage: None,
                reason: "no size bin".into(),
            });
        }
    }

    let results: Vec<(Vec<EffectivenessRecord>, Vec<SkipEntry>)> = binned
        .par_iter()
        .map(|topic| {
            let mut records = Vec::new();
            let mut skips = Vec::new();
            for solution in solutions {
                for &coverage in coverages {
                    match evaluate_topic(topic, solution, coverage) {
                        Ok(r) => records.push(r),
                        Err(Error::TopicAbsent { term_id, branch }) => skips.push(SkipEntry {
                            term_id,
                            branch,
                            network: Some(solution.meta().network),
                            resolution: Some(solution.meta().resolution),
                            coverage: Some(coverage.as_f64()),
                            reason: "topic absent from solution".into(),
                        }),
                        Err(e) => skips.push(SkipEntry {
                            term_id: topic.term_id.clone(),
                            branch: topic.branch.clone(),
                            network: Some(solution.meta().network),
                            resolution: Some(solution.meta().resolution),
                            coverage: Some(coverage.as_f64()),
                            reason: e.to_string(),
                        }),
                    }
                }
            }
            (records, skips)
        })
        .collect();

    let mut records = Vec::new();
    for (r, s) in results {
        records.extend(r);
        skips.extend(s);
    }
    sort_records(&mut records);
    skips.sort_by_key(record_skip_key);
    (records, skips)
}

fn sort_records(records: &mut [EffectivenessRecord]) {
    records.sort_by_key(record_key);
}

fn record_key(r: &EffectivenessRecord) -> (String, String, NetworkLabel, u64, u64) {
    (
        r.term_id.clone(),
        r.branch.clone(),
        r.network,
        r.resolution.to_bits(),
        r.coverage.to_bits(),
    )
}

fn record_skip_key(s: &SkipEntry) -> (String, String, Option<NetworkLabel>, u64, u64) {
    (
        s.term_id.clone(),
        s.branch.clone(),
        s.network,
        s.resolution.map_or(0, f64::to_bits),
        s.coverage.map_or(0, f64::to_bits),
    )
}

/// The ratio of citation to text effectiveness for one topic and parameter
/// combination, as log2 ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub term_id: String,
    pub branch: String,
    pub size_bin: String,
    pub resolution: f64,
    pub coverage: f64,
    pub r_purity: f64,
    pub r_icc: f64,
}

/// Pair citation and text records on `(term, branch, resolution, coverage)`
/// and compute `rPurity = log2(C-Purity / T-Purity)` and
/// `rICC = log2(C-ICC / T-ICC)`. Computed as differences of logs, so swapping
/// the two tables negates every value exactly. Unmatched records become skip
/// entries.
pub fn ratio_records(
    citation: &[EffectivenessRecord],
    text: &[EffectivenessRecord],
) -> (Vec<RatioRecord>, Vec<SkipEntry>) {
    type Key = (String, String, u64, u64);
    let key = |r: &EffectivenessRecord| -> Key {
        (
            r.term_id.clone(),
            r.branch.clone(),
            r.resolution.to_bits(),
            r.coverage.to_bits(),
        )
    };
    let mut text_by_key: BTreeMap<Key, &EffectivenessRecord> = BTreeMap::new();
    for r in text {
        text_by_key.insert(key(r), r);
    }
    let mut ratios = Vec::new();
    let mut skips = Vec::new();
    let mut matched: BTreeMap<Key, ()> = BTreeMap::new();
    for c in citation {
        let k = key(c);
        match text_by_key.get(&k) {
            Some(t) if c.purity > 0.0 && t.purity > 0.0 => {
                matched.insert(k, ());
                ratios.push(RatioRecord {
                    term_id: c.term_id.clone(),
                    branch: c.branch.clone(),
                    size_bin: c.size_bin.clone(),
                    resolution: c.resolution,
                    coverage: c.coverage,
                    r_purity: c.purity.log2() - t.purity.log2(),
                    r_icc: c.icc.log2() - t.icc.log2(),
                });
            }
            Some(_) => {
                matched.insert(k, ());
                skips.push(SkipEntry {
                    term_id: c.term_id.clone(),
                    branch: c.branch.clone(),
                    network: None,
                    resolution: Some(c.resolution),
                    coverage: Some(c.coverage),
                    reason: "non-positive purity".into(),
                });
            }
            None => skips.push(SkipEntry {
                term_id: c.term_id.clone(),
                branch: c.branch.clone(),
                network: Some(NetworkLabel::Citation),
                resolution: Some(c.resolution),
                coverage: Some(c.coverage),
                reason: "no matching text record".into(),
            }),
        }
    }
    for t in text {
        if !matched.contains_key(&key(t)) {
            skips.push(SkipEntry {
                term_id: t.term_id.clone(),
                branch: t.branch.clone(),
                network: Some(NetworkLabel::Text),
                resolution: Some(t.resolution),
                coverage: Some(t.coverage),
                reason: "no matching citation record".into(),
            });
        }
    }
    ratios.sort_by(|a, b| {
        (
            &a.term_id,
            &a.branch,
            a.resolution.to_bits(),
            a.coverage.to_bits(),
        )
            .cmp(&(
                &b.term_id,
                &b.branch,
                b.resolution.to_bits(),
                b.coverage.to_bits(),
            ))
    });
    skips.sort_by_key(record_skip_key);
    (ratios, skips)
}

const RECORD_HEADER: &str =
    "term_id\tbranch\tsize_bin\tnetwork\tresolution\tcoverage\tn_selected\tpurity\ticc";

/// Write effectiveness records as a tab-separated table with a header.
pub fn save_records(records: &[EffectivenessRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{RECORD_HEADER}").map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.term_id,
            r.branch,
            r.size_bin,
            r.network,
            r.resolution,
            r.coverage,
            r.n_selected,
            r.purity,
            r.icc
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<EffectivenessRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if line != RECORD_HEADER {
                return Err(Error::parse(path, 1, "unexpected record header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(Error::parse(path, idx + 1, "expected 9 columns"));
        }
        let bad = |what: &'static str| Error::parse(path, idx + 1, format!("bad {what}"));
        records.push(EffectivenessRecord {
            term_id: cols[0].to_string(),
            branch: cols[1].to_string(),
            size_bin: cols[2].to_string(),
            network: cols[3].parse()?,
            resolution: cols[4].parse().map_err(|_| bad("resolution"))?,
            coverage: cols[5].parse().map_err(|_| bad("coverage"))?,
            n_selected: cols[6].parse().map_err(|_| bad("n_selected"))?,
            purity: cols[7].parse().map_err(|_| bad("purity"))?,
            icc: cols[8].parse().map_err(|_| bad("icc"))?,
        });
    }
    Ok(records)
}

const RATIO_HEADER: &str = "term_id\tbranch\tsize_bin\tresolution\tcoverage\tr_purity\tr_icc";

pub fn save_ratios(ratios: &[RatioRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{RATIO_HEADER}").map_err(|e| Error::io(path, e))?;
    for r in ratios {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.term_id, r.branch, r.size_bin, r.resolution, r.coverage, r.r_purity, r.r_icc
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_ratios(path: impl AsRef<Path>) -> Result<Vec<RatioRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ratios = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if line != RATIO_HEADER {
                return Err(Error::parse(path, 1, "unexpected ratio header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(Error::parse(path, idx + 1, "expected 7 columns"));
        }
        let bad = |what: &'static str| Error::parse(path, idx + 1, format!("bad {what}"));
        ratios.push(RatioRecord {
            term_id: cols[0].to_string(),
            branch: cols[1].to_string(),
            size_bin: cols[2].to_string(),
            resolution: cols[3].parse().map_err(|_| bad("resolution"))?,
            coverage: cols[4].parse().map_err(|_| bad("coverage"))?,
            r_purity: cols[5].parse().map_err(|_| bad("r_purity"))?,
            r_icc: cols[6].parse().map_err(|_| bad("r_icc"))?,
        });
    }
    Ok(ratios)
}

pub fn save_skips(skips: &[SkipEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "term_id\tbranch\tnetwork\tresolution\tcoverage\treason")
        .map_err(|e| Error::io(path, e))?;
    for s in skips {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.term_id,
            s.branch,
            s.network.map_or("-".to_string(), |n| n.to_string()),
            s.resolution.map_or("-".to_string(), |r| r.to_string()),
            s.coverage.map_or("-".to_string(), |c| c.to_string()),
            s.reason
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
