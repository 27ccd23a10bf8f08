//! Aggregation of effectiveness records into branch rankings, position-count
//! tables and box-plot summary statistics, exported as a deterministic
//! tab-separated report bundle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::effectiveness::{EffectivenessRecord, RatioRecord};
use crate::error::{Error, Result};
use crate::simnet::NetworkLabel;

/// One analysis cell: a network, resolution, coverage and size bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub network: NetworkLabel,
    pub resolution: f64,
    pub coverage: f64,
    pub size_bin: String,
}

impl CellKey {
    fn ord_key(&self) -> (NetworkLabel, u64, u64, &str) {
        (
            self.network,
            self.resolution.to_bits(),
            self.coverage.to_bits(),
            self.size_bin.as_str(),
        )
    }
}

impl Eq for CellKey {}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ord_key().cmp(&other.ord_key())
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/res={}/cov={}/bin={}",
            self.network, self.resolution, self.coverage, self.size_bin
        )
    }
}

/// Which record metric a ranking is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Purity,
    Icc,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Purity => write!(f, "purity"),
            Metric::Icc => write!(f, "icc"),
        }
    }
}

impl Metric {
    fn value(&self, r: &EffectivenessRecord) -> f64 {
        match self {
            Metric::Purity => r.purity,
            Metric::Icc => r.icc,
        }
    }
}

/// Statistic used to aggregate a branch's topic values within a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Median,
    Mean,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregate::Median => write!(f, "median"),
            Aggregate::Mean => write!(f, "mean"),
        }
    }
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Aggregate::Median),
            "mean" => Ok(Aggregate::Mean),
            other => Err(Error::InvalidParameter {
                what: "aggregate",
                why: format!("unknown aggregate {other:?} (expected median or mean)"),
            }),
        }
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

impl Aggregate {
    fn apply(&self, values: &mut [f64]) -> f64 {
        match self {
            Aggregate::Median => {
                values.sort_by(f64::total_cmp);
                median_sorted(values)
            }
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Branches of one cell ordered by descending aggregate metric.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRanking {
    pub cell: CellKey,
    /// `(branch, aggregate value)`, best first; ties broken by branch code.
    pub entries: Vec<(String, f64)>,
}

/// Rank the branches of one cell by the aggregate of `metric` over the
/// cell's records.
pub fn rank_branches(
    cell: CellKey,
    records: &[&EffectivenessRecord],
    metric: Metric,
    aggregate: Aggregate,
) -> Result<BranchRanking> {
    if records.is_empty() {
        return Err(Error::EmptyCell(cell.to_string()));
    }
    let mut by_branch: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_branch
            .entry(r.branch.as_str())
            .or_default()
            .push(metric.value(r));
    }
    let mut entries: Vec<(String, f64)> = by_branch
        .into_iter()
        .map(|(branch, mut values)| (branch.to_string(), aggregate.apply(&mut values)))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(BranchRanking { cell, entries })
}

/// How often each branch lands in each ranking position, over all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionCounts {
    /// Branches in ascending code order; rows of `counts` follow this order.
    pub branches: Vec<String>,
    /// `counts[branch][position]` over all rankings.
    pub counts: Vec<Vec<u64>>,
}

impl PositionCounts {
    pub fn cell_count(&self) -> u64 {
        self.counts.first().map_or(0, |row| row.iter().sum())
    }

    /// Row order by mean ranking position, best (lowest) first; ties broken
    /// by branch code.
    pub fn row_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.branches.len()).collect();
        let mean_pos: Vec<f64> = self
            .counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                let weighted: u64 = row
                    .iter()
                    .enumerate()
                    .map(|(pos, &c)| (pos as u64 + 1) * c)
                    .sum();
                weighted as f64 / total as f64
            })
            .collect();
        order.sort_by(|&a, &b| {
            mean_pos[a]
                .total_cmp(&mean_pos[b])
                .then_with(|| self.branches[a].cmp(&self.branches[b]))
        });
        order
    }
}

/// Count ranking positions over cells. All rankings must cover the same
/// branch set.
pub fn position_counts(rankings: &[BranchRanking]) -> Result<PositionCounts> {
    let Some(first) = rankings.first() else {
        return Err(Error::NothingToExport);
    };
    let branch_set: BTreeSet<&str> = first.entries.iter().map(|(b, _)| b.as_str()).collect();
    for r in rankings {
        let set: BTreeSet<&str> = r.entries.iter().map(|(b, _)| b.as_str()).collect();
        if set != branch_set {
            return Err(Error::InconsistentBranchSets(format!(
                "cell {} has branches {:?}, expected {:?}",
                r.cell, set, branch_set
            )));
        }
    }
    let branches: Vec<String> = branch_set.iter().map(|b| b.to_string()).collect();
    let index: BTreeMap<&str, usize> = branches
        .iter()
        .enumerate()
        .map(|(i, b)| (b.as_str(), i))
        .collect();
    let mut counts = vec![vec![0u64; branches.len()]; branches.len()];
    for r in rankings {
        for (pos, (branch, _)) in r.entries.iter().enumerate() {
            counts[index[branch.as_str()]][pos] += 1;
        }
    }
    Ok(PositionCounts { branches, counts })
}

/// Five-number summary of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub count: usize,
}

/// Box-plot summaries per group key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub groups: BTreeMap<String, FiveNumber>,
}

/// Five-number summaries using median-of-halves quartiles: the halves exclude
/// the middle element when the count is odd.
pub fn boxplot_stats(groups: &BTreeMap<String, Vec<f64>>) -> BoxplotSummary {
    let mut out = BTreeMap::new();
    for (key, values) in groups {
        if values.is_empty() {
            continue;
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let five = if n == 1 {
            FiveNumber {
                min: sorted[0],
                q1: sorted[0],
                median: sorted[0],
                q3: sorted[0],
                max: sorted[0],
                count: 1,
            }
        } else {
            let half = n / 2;
            FiveNumber {
                min: sorted[0],
                q1: median_sorted(&sorted[..half]),
                median: median_sorted(&sorted),
                q3: median_sorted(&sorted[n - half..]),
                max: sorted[n - 1],
                count: n,
            }
        };
        out.insert(key.clone(), five);
    }
    BoxplotSummary { groups: out }
}

/// Group records into analysis cells.
pub fn cells(records: &[EffectivenessRecord]) -> BTreeMap<CellKey, Vec<&EffectivenessRecord>> {
    let mut map: BTreeMap<CellKey, Vec<&EffectivenessRecord>> = BTreeMap::new();
    for r in records {
        let key = CellKey {
            network: r.network,
            resolution: r.resolution,
            coverage: r.coverage,
            size_bin: r.size_bin.clone(),
        };
        map.entry(key).or_default().push(r);
    }
    map
}

/// Machine-readable report metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSummary {
    pub aggregate: String,
    pub quartile_convention: String,
    pub coverage_denominator: String,
    pub records: usize,
    pub ratios: usize,
    pub branches: Vec<String>,
    pub cells_per_network: BTreeMap<String, usize>,
}

/// Paths written by [`export_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Export the full report bundle: branch rankings per cell, one
/// position-count table per metric per network, per-branch box plots of the
/// four metric combinations, and ratio box plots per parameter and per
/// branch. Rerunning on identical inputs writes byte-identical files.
pub fn export_report(
    records: &[EffectivenessRecord],
    ratios: &[RatioRecord],
    aggregate: Aggregate,
    dir: impl AsRef<Path>,
) -> Result<ReportBundle> {
    if records.is_empty() {
        return Err(Error::NothingToExport);
    }
    let dir = dir.as_ref();

    // Compute everything before writing anything.
    let by_cell = cells(records);
    let mut rankings_tsv =
        String::from("network\tresolution\tcoverage\tsize_bin\tposition\tbranch\tvalue\n");
    let mut pos_tables: BTreeMap<(Metric, NetworkLabel), Vec<BranchRanking>> = BTreeMap::new();
    for (cell, cell_records) in &by_cell {
        for metric in [Metric::Purity, Metric::Icc] {
            let ranking = rank_branches(cell.clone(), cell_records, metric, aggregate)?;
            if metric == Metric::Purity {
                for (pos, (branch, value)) in ranking.entries.iter().enumerate() {
                    rankings_tsv.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                        cell.network,
                        cell.resolution,
                        cell.coverage,
                        cell.size_bin,
                        pos + 1,
                        branch,
                        value
                    ));
                }
            }
            pos_tables
                .entry((metric, cell.network))
                .or_default()
                .push(ranking);
        }
    }

    let mut position_files: Vec<(String, String)> = Vec::new();
    for ((metric, network), rankings) in &pos_tables {
        let counts = position_counts(rankings)?;
        let mut tsv = String::from("branch");
        for pos in 1..=counts.branches.len() {
            tsv.push_str(&format!("\tpos{pos}"));
        }
        tsv.push('\n');
        for &row in &counts.row_order() {
            tsv.push_str(&counts.branches[row]);
            for c in &counts.counts[row] {
                tsv.push_str(&format!("\t{c}"));
            }
            tsv.push('\n');
        }
        position_files.push((format!("position_counts_{metric}_{network}.tsv"), tsv));
    }

    // Per-branch box plots of purity and icc, per network.
    let mut branch_box_tsv =
        String::from("network\tmetric\tbranch\tmin\tq1\tmedian\tq3\tmax\tcount\n");
    for network in [NetworkLabel::Citation, NetworkLabel::Text] {
        for metric in [Metric::Purity, Metric::Icc] {
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in records.iter().filter(|r| r.network == network) {
                groups
                    .entry(r.branch.clone())
                    .or_default()
                    .push(metric.value(r));
            }
            let summary = boxplot_stats(&groups);
            for (branch, f) in &summary.groups {
                branch_box_tsv.push_str(&format!(
                    "{network}\t{metric}\t{branch}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    f.min, f.q1, f.median, f.q3, f.max, f.count
                ));
            }
        }
    }

    // Ratio box plots per parameter value and per branch.
    let mut ratio_param_tsv =
        String::from("ratio_metric\tparameter\tvalue\tmin\tq1\tmedian\tq3\tmax\tcount\n");
    let mut ratio_branch_tsv =
        String::from("ratio_metric\tbranch\tmin\tq1\tmedian\tq3\tmax\tcount\n");
    for (name, pick) in [
        (
            "r_purity",
            (|r: &RatioRecord| r.r_purity) as fn(&RatioRecord) -> f64,
        ),
        ("r_icc", |r: &RatioRecord| r.r_icc),
    ] {
        for (param, key) in [
            (
                "size_bin",
                (|r: &RatioRecord| r.size_bin.clone()) as fn(&RatioRecord) -> String,
            ),
            ("resolution", |r: &RatioRecord| r.resolution.to_string()),
            ("coverage", |r: &RatioRecord| r.coverage.to_string()),
        ] {
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in ratios {
                groups.entry(key(r)).or_default().push(pick(r));
            }
            let summary = boxplot_stats(&groups);
            for (value, f) in &summary.groups {
                ratio_param_tsv.push_str(&format!(
                    "{name}\t{param}\t{value}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    f.min, f.q1, f.median, f.q3, f.max, f.count
                ));
            }
        }
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in ratios {
            groups.entry(r.branch.clone()).or_default().push(pick(r));
        }
        let summary = boxplot_stats(&groups);
        for (branch, f) in &summary.groups {
            ratio_branch_tsv.push_str(&format!(
                "{name}\t{branch}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                f.min, f.q1, f.median, f.q3, f.max, f.count
            ));
        }
    }

    let branches: BTreeSet<String> = records.iter().map(|r| r.branch.clone()).collect();
    let mut cells_per_network: BTreeMap<String, usize> = BTreeMap::new();
    for cell in by_cell.keys() {
        *cells_per_network
            .entry(cell.network.to_string())
            .or_insert(0) += 1;
    }
    let summary = ReportSummary {
        aggregate: aggregate.to_string(),
        quartile_convention: "median-of-halves".into(),
        coverage_denominator: "topic documents present in the cleaned solution".into(),
        records: records.len(),
        ratios: ratios.len(),
        branches: branches.into_iter().collect(),
        cells_per_network,
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(format!("summary serialization failed: {e}")))?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    write_file(dir, "rankings.tsv", &rankings_tsv, &mut files)?;
    for (name, tsv) in &position_files {
        write_file(dir, name, tsv, &mut files)?;
    }
    write_file(
        dir,
        "boxplot_branch_metrics.tsv",
        &branch_box_tsv,
        &mut files,
    )?;
    write_file(
        dir,
        "boxplot_ratio_by_parameter.tsv",
        &ratio_param_tsv,
        &mut files,
    )?;
    write_file(
        dir,
        "boxplot_ratio_by_branch.tsv",
        &ratio_branch_tsv,
        &mut files,
    )?;
    write_file(dir, "summary.json", &summary_json, &mut files)?;
    files.sort();
    Ok(ReportBundle {
        dir: dir.to_path_buf(),
        files,
    })
}
