//! Pipeline orchestration: a TOML config file, separable stages sharing a
//! work directory, content-hash caching of intermediates, and a lock file so
//! commands run one at a time per work directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, load_taxonomy, validate, Corpus, CorpusFormat, Taxonomy};
use crate::effectiveness::{
    evaluate_grid, ratio_records, save_ratios, save_records, save_skips, Coverage,
};
use crate::error::{Error, Result};
use crate::leiden::{
    clean_solution, leiden_cluster, solution_stats, ClusteringSolution, SolutionStats,
};
use crate::report::{export_report, Aggregate, ReportBundle};
use crate::simnet::{
    build_bm25_network, build_extended_citation_network, default_stopwords, Bm25Params,
    ExtractionConfig, NetworkLabel, SimilarityNetwork,
};
use crate::topics::{
    branch_bin_table, load_topics, prepare_topics, save_topics, SizeBins, TopicParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: PathBuf,
    pub taxonomy: PathBuf,
    pub work_dir: PathBuf,
    pub corpus_format: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            corpus: PathBuf::from("corpus.jsonl"),
            taxonomy: PathBuf::from("taxonomy.tsv"),
            work_dir: PathBuf::from("work"),
            corpus_format: "jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ValidationSection {
    /// When set, any validation report entry aborts the run.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub k1: f64,
    pub b: f64,
    pub top_k: usize,
    pub max_ngram: usize,
    /// Replaces the built-in stopword list when present.
    pub stopwords: Option<Vec<String>>,
    pub min_external_support: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            k1: 1.2,
            b: 0.75,
            top_k: 20,
            max_ngram: 2,
            stopwords: None,
            min_external_support: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub resolutions: Vec<f64>,
    pub seed: u64,
    pub min_cluster_size: u32,
    pub max_passes: usize,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        ClusteringSection {
            resolutions: vec![2e-6, 2e-5, 2e-4],
            seed: 42,
            min_cluster_size: 10,
            max_passes: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub min_size_exclusive: u64,
    pub max_size_inclusive: u64,
    pub jaccard_threshold: f64,
    pub branch_min_terms: usize,
    pub size_bins: Vec<(u64, u64)>,
    pub min_terms_per_branch_per_bin: usize,
}

impl Default for TopicsSection {
    fn default() -> Self {
        let d = TopicParams::default();
        TopicsSection {
            min_size_exclusive: d.min_size_exclusive,
            max_size_inclusive: d.max_size_inclusive,
            jaccard_threshold: d.jaccard_threshold,
            branch_min_terms: d.branch_min_terms,
            size_bins: d.bins.intervals().to_vec(),
            min_terms_per_branch_per_bin: d.min_terms_per_branch_per_bin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub coverages: Vec<f64>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            coverages: vec![0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub aggregate: String,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            aggregate: "median".into(),
        }
    }
}

/// The full pipeline configuration. Every default matches the full-scale
/// study configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsSection,
    pub validation: ValidationSection,
    pub network: NetworkSection,
    pub clustering: ClusteringSection,
    pub topics: TopicsSection,
    pub evaluation: EvaluationSection,
    pub report: ReportSection,
}

impl PipelineConfig {
    /// Parse a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.paths.corpus,
                &mut cfg.paths.taxonomy,
                &mut cfg.paths.work_dir,
            ] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        }
        cfg.validate_settings()?;
        Ok(cfg)
    }

    pub fn validate_settings(&self) -> Result<()> {
        self.corpus_format()?;
        self.bm25_params().validate()?;
        if self.network.top_k == 0 {
            return Err(Error::Config("network.top_k must be >= 1".into()));
        }
        if self.network.max_ngram == 0 {
            return Err(Error::Config("network.max_ngram must be >= 1".into()));
        }
        if self.network.min_external_support == 0 {
            return Err(Error::Config(
                "network.min_external_support must be >= 1".into(),
            ));
        }
        if self.clustering.resolutions.is_empty() {
            return Err(Error::Config(
                "clustering.resolutions must not be empty".into(),
            ));
        }
        if !self
            .clustering
            .resolutions
            .iter()
            .all(|&r| r.is_finite() && r > 0.0)
        {
            return Err(Error::Config(
                "clustering.resolutions must be positive".into(),
            ));
        }
        if self.clustering.max_passes == 0 {
            return Err(Error::Config("clustering.max_passes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.topics.jaccard_threshold) {
            return Err(Error::Config(
                "topics.jaccard_threshold must be in [0, 1]".into(),
            ));
        }
        SizeBins::new(self.topics.size_bins.clone())?;
        if self.evaluation.coverages.is_empty() {
            return Err(Error::Config(
                "evaluation.coverages must not be empty".into(),
            ));
        }
        self.coverages()?;
        self.aggregate()?;
        Ok(())
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        self.paths.corpus_format.parse()
    }

    pub fn extraction_config(&self) -> ExtractionConfig {
        ExtractionConfig {
            stopwords: match &self.network.stopwords {
                Some(words) => words.iter().cloned().collect(),
                None => default_stopwords(),
            },
            max_ngram: self.network.max_ngram,
        }
    }

    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.network.k1,
            b: self.network.b,
        }
    }

    pub fn topic_params(&self) -> Result<TopicParams> {
        Ok(TopicParams {
            min_size_exclusive: self.topics.min_size_exclusive,
            max_size_inclusive: self.topics.max_size_inclusive,
            jaccard_threshold: self.topics.jaccard_threshold,
            branch_min_terms: self.topics.branch_min_terms,
            bins: SizeBins::new(self.topics.size_bins.clone())?,
            min_terms_per_branch_per_bin: self.topics.min_terms_per_branch_per_bin,
        })
    }

    pub fn coverages(&self) -> Result<Vec<Coverage>> {
        self.evaluation
            .coverages
            .iter()
            .map(|&c| Coverage::from_f64(c))
            .collect()
    }

    pub fn aggregate(&self) -> Result<Aggregate> {
        self.report.aggregate.parse()
    }

    fn work_path(&self, rel: &str) -> PathBuf {
        self.paths.work_dir.join(rel)
    }

    pub fn network_path(&self, label: NetworkLabel) -> PathBuf {
        self.work_path(&format!("networks/{label}.net"))
    }

    pub fn solution_path(&self, label: NetworkLabel, resolution: f64) -> PathBuf {
        self.work_path(&format!("solutions/{label}_res{resolution}.tsv"))
    }

    pub fn topics_path(&self) -> PathBuf {
        self.work_path("topics/topics.tsv")
    }

    pub fn records_path(&self) -> PathBuf {
        self.work_path("records/effectiveness.tsv")
    }

    pub fn ratios_path(&self) -> PathBuf {
        self.work_path("records/ratios.tsv")
    }

    pub fn skips_path(&self) -> PathBuf {
        self.work_path("records/skips.tsv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.work_path("report")
    }
}

/// Exclusive lock on the work directory, released on drop.
pub struct WorkDirLock {
    path: PathBuf,
}

impl WorkDirLock {
    pub fn acquire(work_dir: &Path) -> Result<Self> {
        fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;
        let path = work_dir.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(WorkDirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::WorkDirLocked(path))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for WorkDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    entries: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    inputs: String,
    outputs: BTreeMap<String, String>,
}

fn manifest_path(work_dir: &Path) -> PathBuf {
    work_dir.join("manifest.json")
}

/// Load the cache manifest; a corrupted manifest is replaced (with a
/// warning) rather than aborting the run.
fn load_manifest(work_dir: &Path) -> (Manifest, Option<String>) {
    let path = manifest_path(work_dir);
    match fs::read_to_string(&path) {
        Ok(text) => match serde_json::from_str(&text) {
            Ok(manifest) => (manifest, None),
            Err(e) => (
                Manifest::default(),
                Some(format!(
                    "corrupted cache manifest {}: {e}; rebuilding",
                    path.display()
                )),
            ),
        },
        Err(_) => (Manifest::default(), None),
    }
}

fn save_manifest(work_dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = manifest_path(work_dir);
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn settings_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(
        serde_json::to_string(value)
            .expect("settings serialize")
            .as_bytes(),
    )
}

impl Manifest {
    /// True when the entry's recorded inputs match and every output file
    /// still exists with its recorded hash.
    fn is_fresh(&self, work_dir: &Path, key: &str, inputs: &str) -> bool {
        let Some(entry) = self.entries.get(key) else {
            return false;
        };
        if entry.inputs != inputs {
            return false;
        }
        entry.outputs.iter().all(|(rel, hash)| {
            file_hash(&work_dir.join(rel))
                .map(|h| &h == hash)
                .unwrap_or(false)
        })
    }

    fn record(
        &mut self,
        work_dir: &Path,
        key: &str,
        inputs: String,
        outputs: &[PathBuf],
    ) -> Result<()> {
        let mut map = BTreeMap::new();
        for path in outputs {
            let rel = path
                .strip_prefix(work_dir)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            map.insert(rel, file_hash(path)?);
        }
        self.entries.insert(
            key.to_string(),
            ManifestEntry {
                inputs,
                outputs: map,
            },
        );
        Ok(())
    }
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(Corpus, Taxonomy)> {
    let corpus = load_corpus(&cfg.paths.corpus, cfg.corpus_format()?)?;
    let taxonomy = load_taxonomy(&cfg.paths.taxonomy)?;
    let report = validate(&corpus, &taxonomy);
    if cfg.validation.strict && !report.is_clean() {
        return Err(Error::StrictValidation(report.to_string()));
    }
    Ok((corpus, taxonomy))
}

/// Outcome of `build-networks`.
#[derive(Debug, Clone)]
pub struct BuildNetworksOutcome {
    pub citation: PathBuf,
    pub text: PathBuf,
    pub citation_cached: bool,
    pub text_cached: bool,
    pub warnings: Vec<String>,
}

/// Build (or reuse) the citation and text network files.
pub fn cmd_build_networks(cfg: &PipelineConfig) -> Result<BuildNetworksOutcome> {
    let work_dir = cfg.paths.work_dir.clone();
    let _lock = WorkDirLock::acquire(&work_dir)?;
    let (mut manifest, warning) = load_manifest(&work_dir);
    let mut warnings: Vec<String> = warning.into_iter().collect();

    fs::create_dir_all(work_dir.join("networks"))
        .map_err(|e| Error::io(work_dir.join("networks"), e))?;
    let corpus_hash = file_hash(&cfg.paths.corpus)?;

    let citation_inputs = format!(
        "corpus:{corpus_hash} format:{} min_external_support:{}",
        cfg.paths.corpus_format, cfg.network.min_external_support
    );
    let text_inputs = format!(
        "corpus:{corpus_hash} format:{} bm25:{}",
        cfg.paths.corpus_format,
        settings_hash(&(
            cfg.network.k1,
            cfg.network.b,
            cfg.network.top_k,
            cfg.network.max_ngram,
            &cfg.network.stopwords,
        ))
    );

    let citation_path = cfg.network_path(NetworkLabel::Citation);
    let text_path = cfg.network_path(NetworkLabel::Text);
    let citation_cached = manifest.is_fresh(&work_dir, "network:citation", &citation_inputs);
    let text_cached = manifest.is_fresh(&work_dir, "network:text", &text_inputs);

    if !citation_cached || !text_cached {
        let (corpus, _taxonomy) = load_inputs(cfg)?;
        if !citation_cached {
            let net = build_extended_citation_network(&corpus, cfg.network.min_external_support)?;
            net.write_to(&citation_path)?;
            manifest.record(
                &work_dir,
                "network:citation",
                citation_inputs,
                std::slice::from_ref(&citation_path),
            )?;
        }
        if !text_cached {
            let net = build_bm25_network(
                &corpus,
                &cfg.extraction_config(),
                cfg.bm25_params(),
                cfg.network.top_k,
            )?;
            net.write_to(&text_path)?;
            manifest.record(
                &work_dir,
                "network:text",
                text_inputs,
                std::slice::from_ref(&text_path),
            )?;
        }
        save_manifest(&work_dir, &manifest)?;
    } else if !warnings.is_empty() {
        save_manifest(&work_dir, &manifest)?;
        warnings.push("cache hit after manifest rebuild".into());
    }

    Ok(BuildNetworksOutcome {
        citation: citation_path,
        text: text_path,
        citation_cached,
        text_cached,
        warnings,
    })
}

/// One clustered (network, resolution) pair.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub network: NetworkLabel,
    pub resolution: f64,
    pub path: PathBuf,
    pub stats: Option<SolutionStats>,
    pub cached: bool,
}

/// Outcome of `cluster`.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub runs: Vec<ClusterRun>,
    pub stats_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Cluster both networks at every configured resolution and clean the
/// results.
pub fn cmd_cluster(cfg: &PipelineConfig) -> Result<ClusterOutcome> {
    let work_dir = cfg.paths.work_dir.clone();
    let _lock = WorkDirLock::acquire(&work_dir)?;
    let (mut manifest, warning) = load_manifest(&work_dir);
    let warnings: Vec<String> = warning.into_iter().collect();

    fs::create_dir_all(work_dir.join("solutions"))
        .map_err(|e| Error::io(work_dir.join("solutions"), e))?;

    let mut runs = Vec::new();
    for label in [NetworkLabel::Citation, NetworkLabel::Text] {
        let net_path = cfg.network_path(label);
        if !net_path.exists() {
            return Err(Error::MissingArtifact {
                path: net_path,
                stage: "build-networks",
            });
        }
        let net_hash = file_hash(&net_path)?;
        let mut network: Option<SimilarityNetwork> = None;
        for &resolution in &cfg.clustering.resolutions {
            let key = format!("solution:{label}:{resolution}");
            let inputs = format!(
                "network:{net_hash} settings:{}",
                settings_hash(&(
                    resolution,
                    cfg.clustering.seed,
                    cfg.clustering.min_cluster_size,
                    cfg.clustering.max_passes,
                ))
            );
            let path = cfg.solution_path(label, resolution);
            let cached = manifest.is_fresh(&work_dir, &key, &inputs);
            let solution = if cached {
                ClusteringSolution::read_from(&path)?
            } else {
                if network.is_none() {
                    network = Some(SimilarityNetwork::read_from(&net_path)?);
                }
                let net = network.as_ref().unwrap();
                let partition = leiden_cluster(
                    net,
                    resolution,
                    cfg.clustering.seed,
                    cfg.clustering.max_passes,
                )?;
                let solution = clean_solution(
                    &partition,
                    net,
                    cfg.clustering.min_cluster_size,
                    resolution,
                    cfg.clustering.seed,
                );
                solution.write_to(&path)?;
                manifest.record(&work_dir, &key, inputs, std::slice::from_ref(&path))?;
                solution
            };
            runs.push(ClusterRun {
                network: label,
                resolution,
                path,
                stats: solution_stats(&solution).ok(),
                cached,
            });
        }
    }

    // Cluster statistics table for all runs.
    let stats_path = work_dir.join("solutions/stats.tsv");
    let mut table = String::from(
        "network\tresolution\tclusters\tdocuments\tmin\tmedian\tmax\ts_count\ts_min\ts_median\ts_max\n",
    );
    for run in &runs {
        match &run.stats {
            Some(s) => table.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                run.network,
                run.resolution,
                s.clusters,
                s.documents,
                s.min_size,
                s.median_size,
                s.max_size,
                s.half_cover_count,
                s.half_cover_min,
                s.half_cover_median,
                s.half_cover_max
            )),
            None => table.push_str(&format!(
                "{}\t{}\t0\t0\t-\t-\t-\t-\t-\t-\t-\n",
                run.network, run.resolution
            )),
        }
    }
    fs::write(&stats_path, table).map_err(|e| Error::io(&stats_path, e))?;
    save_manifest(&work_dir, &manifest)?;

    Ok(ClusterOutcome {
        runs,
        stats_path,
        warnings,
    })
}

/// Outcome of `prepare-topics`.
#[derive(Debug, Clone)]
pub struct TopicsOutcome {
    pub topics_path: PathBuf,
    pub counts_path: PathBuf,
    pub skipped_path: PathBuf,
    pub topic_count: usize,
    pub skipped_count: usize,
    pub counts_table: String,
    pub cached: bool,
    pub warnings: Vec<String>,
}

/// Run the topic pipeline and write the final topic set.
pub fn cmd_prepare_topics(cfg: &PipelineConfig) -> Result<TopicsOutcome> {
    let work_dir = cfg.paths.work_dir.clone();
    let _lock = WorkDirLock::acquire(&work_dir)?;
    let (mut manifest, warning) = load_manifest(&work_dir);
    let warnings: Vec<String> = warning.into_iter().collect();

    fs::create_dir_all(work_dir.join("topics"))
        .map_err(|e| Error::io(work_dir.join("topics"), e))?;
    let topics_path = cfg.topics_path();
    let counts_path = work_dir.join("topics/branch_bin_counts.tsv");
    let skipped_path = work_dir.join("topics/skipped_annotations.tsv");

    let inputs = format!(
        "corpus:{} taxonomy:{} settings:{}",
        file_hash(&cfg.paths.corpus)?,
        file_hash(&cfg.paths.taxonomy)?,
        settings_hash(&cfg.topics)
    );
    let cached = manifest.is_fresh(&work_dir, "topics", &inputs);

    let (topic_count, skipped_count, counts_table) = if cached {
        let topics = load_topics(&topics_path)?;
        let table = fs::read_to_string(&counts_path).map_err(|e| Error::io(&counts_path, e))?;
        let skipped = fs::read_to_string(&skipped_path)
            .map_err(|e| Error::io(&skipped_path, e))?
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .count();
        (topics.len(), skipped, table)
    } else {
        let (corpus, taxonomy) = load_inputs(cfg)?;
        let params = cfg.topic_params()?;
        let (topics, skipped) = prepare_topics(&corpus, &taxonomy, &params)?;
        save_topics(&topics, &topics_path)?;
        let table = branch_bin_table(&topics, &params.bins);
        fs::write(&counts_path, &table).map_err(|e| Error::io(&counts_path, e))?;
        let mut skipped_tsv = String::from("doc_id\tterm_id\n");
        for (doc, term) in &skipped {
            skipped_tsv.push_str(&format!("{doc}\t{term}\n"));
        }
        fs::write(&skipped_path, skipped_tsv).map_err(|e| Error::io(&skipped_path, e))?;
        manifest.record(
            &work_dir,
            "topics",
            inputs,
            &[
                topics_path.clone(),
                counts_path.clone(),
                skipped_path.clone(),
            ],
        )?;
        save_manifest(&work_dir, &manifest)?;
        (topics.len(), skipped.len(), table)
    };

    Ok(TopicsOutcome {
        topics_path,
        counts_path,
        skipped_path,
        topic_count,
        skipped_count,
        counts_table,
        cached,
        warnings,
    })
}

/// Outcome of `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub records_path: PathBuf,
    pub ratios_path: PathBuf,
    pub skips_path: PathBuf,
    pub record_count: usize,
    pub ratio_count: usize,
    pub skip_count: usize,
    pub cached: bool,
    pub warnings: Vec<String>,
}

/// Evaluate every topic against every available solution at every coverage
/// and write the record, ratio and skip tables.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvaluateOutcome> {
    let work_dir = cfg.paths.work_dir.clone();
    let _lock = WorkDirLock::acquire(&work_dir)?;
    let (mut manifest, warning) = load_manifest(&work_dir);
    let mut warnings: Vec<String> = warning.into_iter().collect();

    fs::create_dir_all(work_dir.join("records"))
        .map_err(|e| Error::io(work_dir.join("records"), e))?;
    let topics_path = cfg.topics_path();
    if !topics_path.exists() {
        return Err(Error::MissingArtifact {
            path: topics_path,
            stage: "prepare-topics",
        });
    }

    let mut solution_paths: Vec<PathBuf> = Vec::new();
    for label in [NetworkLabel::Citation, NetworkLabel::Text] {
        for &resolution in &cfg.clustering.resolutions {
            let path = cfg.solution_path(label, resolution);
            if path.exists() {
                solution_paths.push(path);
            } else {
                warnings.push(format!("missing solution {}", path.display()));
            }
        }
    }
    if solution_paths.is_empty() {
        return Err(Error::MissingArtifact {
            path: cfg.solution_path(NetworkLabel::Citation, cfg.clustering.resolutions[0]),
            stage: "cluster",
        });
    }

    let mut inputs = format!("topics:{}", file_hash(&topics_path)?);
    for path in &solution_paths {
        inputs.push_str(&format!(" {}:{}", path.display(), file_hash(path)?));
    }
    inputs.push_str(&format!(
        " coverages:{}",
        settings_hash(&cfg.evaluation.coverages)
    ));

    let records_path = cfg.records_path();
    let ratios_path = cfg.ratios_path();
    let skips_path = cfg.skips_path();
    let cached = manifest.is_fresh(&work_dir, "records", &inputs);

    let (record_count, ratio_count, skip_count) = if cached {
        let records = crate::effectiveness::load_records(&records_path)?;
        let ratios = crate::effectiveness::load_ratios(&ratios_path)?;
        let skips = fs::read_to_string(&skips_path)
            .map_err(|e| Error::io(&skips_path, e))?
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .count();
        (records.len(), ratios.len(), skips)
    } else {
        let topics = load_topics(&topics_path)?;
        let solutions: Vec<ClusteringSolution> = solution_paths
            .iter()
            .map(ClusteringSolution::read_from)
            .collect::<Result<_>>()?;
        let coverages = cfg.coverages()?;
        let (records, mut skips) = evaluate_grid(&topics, &solutions, &coverages);
        let citation: Vec<_> = records
            .iter()
            .filter(|r| r.network == NetworkLabel::Citation)
            .cloned()
            .collect();
        let text: Vec<_> = records
            .iter()
            .filter(|r| r.network == NetworkLabel::Text)
            .cloned()
            .collect();
        let (ratios, ratio_skips) = ratio_records(&citation, &text);
        skips.extend(ratio_skips);
        save_records(&records, &records_path)?;
        save_ratios(&ratios, &ratios_path)?;
        save_skips(&skips, &skips_path)?;
        manifest.record(
            &work_dir,
            "records",
            inputs,
            &[
                records_path.clone(),
                ratios_path.clone(),
                skips_path.clone(),
            ],
        )?;
        save_manifest(&work_dir, &manifest)?;
        (records.len(), ratios.len(), skips.len())
    };

    Ok(EvaluateOutcome {
        records_path,
        ratios_path,
        skips_path,
        record_count,
        ratio_count,
        skip_count,
        cached,
        warnings,
    })
}

/// Outcome of `report`.
#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub bundle: ReportBundle,
    pub cached: bool,
    pub warnings: Vec<String>,
}

/// Aggregate the record tables into the report bundle.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<ReportOutcome> {
    let work_dir = cfg.paths.work_dir.clone();
    let _lock = WorkDirLock::acquire(&work_dir)?;
    let (mut manifest, warning) = load_manifest(&work_dir);
    let warnings: Vec<String> = warning.into_iter().collect();

    let records_path = cfg.records_path();
    let ratios_path = cfg.ratios_path();
    for (path, stage) in [(&records_path, "evaluate"), (&ratios_path, "evaluate")] {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.clone(),
                stage,
            });
        }
    }

    let inputs = format!(
        "records:{} ratios:{} settings:{}",
        file_hash(&records_path)?,
        file_hash(&ratios_path)?,
        settings_hash(&cfg.report)
    );
    let report_dir = cfg.report_dir();
    let cached = manifest.is_fresh(&work_dir, "report", &inputs);

    let bundle = if cached {
        let entry = &manifest.entries["report"];
        ReportBundle {
            dir: report_dir.clone(),
            files: entry.outputs.keys().map(|rel| work_dir.join(rel)).collect(),
        }
    } else {
        let records = crate::effectiveness::load_records(&records_path)?;
        let ratios = crate::effectiveness::load_ratios(&ratios_path)?;
        let bundle = export_report(&records, &ratios, cfg.aggregate()?, &report_dir)?;
        manifest.record(&work_dir, "report", inputs, &bundle.files)?;
        save_manifest(&work_dir, &manifest)?;
        bundle
    };

    Ok(ReportOutcome {
        bundle,
        cached,
        warnings,
    })
}
