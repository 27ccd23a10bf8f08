//! Acceptance suite: one test per acceptance criterion, each printing a
//! single pass line. Expected values come from independent oracles
//! (exhaustive enumeration, full-scan recounts, planted structure), never
//! from the implementation under test.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_purity, clusters_connected, fixture_expansion_case, fixture_taxonomy,
    min_cover_size, nmi, optimal_cpm, oracle_complete_linkage, planted_partition,
    random_effectiveness_instance, random_network,
};
use scimap::corpus::Taxonomy;
use scimap::effectiveness::{
    icc, purity_fraction, ratio_records, select_clusters, EffectivenessRecord,
};
use scimap::leiden::{cpm_quality, leiden_cluster, leiden_cluster_detailed};
use scimap::pipeline::{
    cmd_build_networks, cmd_cluster, cmd_evaluate, cmd_prepare_topics, cmd_report, PipelineConfig,
};
use scimap::report::cells;
use scimap::simnet::NetworkLabel;
use scimap::synth::{write_synthetic, SyntheticSpec};
use scimap::topics::{expand_annotations, filter_by_size, remove_redundant, SizeBins, TopicTerm};

/// Metric oracle equivalence: on 500 random instances the greedy selection
/// size equals the exhaustive minimum, and Purity/ICC match brute-force
/// recomputation exactly.
#[test]
fn criterion_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 500 {
        attempts += 1;
        assert!(attempts < 2000, "too many degenerate instances");
        let (solution, topic_docs, coverage) = random_effectiveness_instance(&mut rng);
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for doc in &topic_docs {
            if let Some(c) = solution.cluster_of(doc) {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        let Ok(selected) = select_clusters(&topic_docs, &solution, coverage) else {
            assert!(counts.is_empty());
            continue;
        };
        let count_vec: Vec<u64> = counts.values().copied().collect();
        assert_eq!(
            selected.len(),
            min_cover_size(&count_vec, coverage.as_f64()),
            "selection is not minimal"
        );
        let got = purity_fraction(&selected, &topic_docs, &solution);
        let expected = brute_force_purity(&selected, &topic_docs, &solution);
        assert_eq!(got, expected, "purity differs from brute-force recount");
        assert_eq!(icc(selected.len()), 1.0 / selected.len() as f64);
        checked += 1;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "took {elapsed:?}, budget is 1 minute"
    );
    println!("acceptance: metric oracle equivalence (500 instances, {elapsed:?}) ... PASS");
}

fn record_with(
    term: &str,
    network: NetworkLabel,
    purity: f64,
    icc_value: f64,
) -> EffectivenessRecord {
    EffectivenessRecord {
        term_id: term.into(),
        branch: "A".into(),
        size_bin: "1-100".into(),
        network,
        resolution: 2e-5,
        coverage: 0.5,
        n_selected: 1,
        purity,
        icc: icc_value,
    }
}

/// Ratio fidelity: swap-antisymmetry plus the three anchor values (0, 1, -1)
/// to machine precision.
#[test]
fn criterion_ratio_fidelity() {
    // Anchors.
    let citation = vec![
        record_with("T-eq", NetworkLabel::Citation, 0.3, 0.5),
        record_with("T-one", NetworkLabel::Citation, 0.3, 1.0),
        record_with("T-neg", NetworkLabel::Citation, 0.2, 0.5),
    ];
    let text = vec![
        record_with("T-eq", NetworkLabel::Text, 0.3, 0.5),
        record_with("T-one", NetworkLabel::Text, 0.3, 0.5),
        record_with("T-neg", NetworkLabel::Text, 0.4, 0.5),
    ];
    let (ratios, skips) = ratio_records(&citation, &text);
    assert!(skips.is_empty());
    let by_term: BTreeMap<&str, _> = ratios.iter().map(|r| (r.term_id.as_str(), r)).collect();
    assert_eq!(by_term["T-eq"].r_purity, 0.0, "equal purities must give 0");
    assert_eq!(
        by_term["T-one"].r_icc, 1.0,
        "icc 1 vs 0.5 must give exactly 1"
    );
    assert!(
        (by_term["T-neg"].r_purity + 1.0).abs() < 1e-12,
        "purity 0.2 vs 0.4 must give -1 to machine precision, got {}",
        by_term["T-neg"].r_purity
    );

    // Antisymmetry over a dense random grid.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut citation = Vec::new();
    let mut text = Vec::new();
    for i in 0..400 {
        let p_c = f64::from(rng.random_range(1..1000u32)) / 1000.0;
        let p_t = f64::from(rng.random_range(1..1000u32)) / 1000.0;
        let n_c = rng.random_range(1..20usize);
        let n_t = rng.random_range(1..20usize);
        citation.push(record_with(
            &format!("T{i:04}"),
            NetworkLabel::Citation,
            p_c,
            1.0 / n_c as f64,
        ));
        text.push(record_with(
            &format!("T{i:04}"),
            NetworkLabel::Text,
            p_t,
            1.0 / n_t as f64,
        ));
    }
    let (forward, _) = ratio_records(&citation, &text);
    let (backward, _) = ratio_records(&text, &citation);
    assert_eq!(forward.len(), 400);
    for (f, b) in forward.iter().zip(&backward) {
        assert_eq!(f.r_purity, -b.r_purity, "rPurity not antisymmetric");
        assert_eq!(f.r_icc, -b.r_icc, "rICC not antisymmetric");
    }
    println!("acceptance: rPurity/rICC fidelity (antisymmetry + anchors) ... PASS");
}

/// Leiden correctness: (a) monotone quality across passes and (b) connected
/// clusters on 100 seeded random graphs; (c) enumerated-optimum match on at
/// least 95 of 100 small graphs; (d) planted-partition recovery with
/// NMI >= 0.95 on the 10x100 benchmark over 5 seeds.
#[test]
fn criterion_leiden_correctness() {
    let started = Instant::now();

    // (a) + (b) on 100 random graphs.
    for seed in 0..100u64 {
        let n = 5 + (seed as usize * 7) % 46;
        let p = 0.03 + 0.3 * ((seed as f64 * 0.37) % 1.0);
        let gamma = 0.02 + 0.5 * ((seed as f64 * 0.61) % 1.0);
        let network = random_network(n, p, seed.wrapping_mul(31).wrapping_add(17));
        let (partition, qualities) = leiden_cluster_detailed(&network, gamma, seed, 20).unwrap();
        for w in qualities.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "quality decreased across passes");
        }
        assert!(
            clusters_connected(&network, &partition),
            "disconnected cluster on seed {seed}"
        );
    }

    // (c) enumerated global optimum on graphs with <= 10 nodes.
    let mut hits = 0;
    for seed in 0..100u64 {
        let n = 4 + (seed as usize) % 7; // 4..=10
        let p = 0.15 + 0.55 * ((seed as f64 * 0.23) % 1.0);
        let gamma = 0.1 + 0.7 * ((seed as f64 * 0.47) % 1.0);
        let network = random_network(n, p, seed.wrapping_mul(97).wrapping_add(5));
        let edges: Vec<(u32, u32, f64)> = network.edges().to_vec();
        let (best, _) = optimal_cpm(n, &edges, gamma);
        let partition = leiden_cluster(&network, gamma, seed, 20).unwrap();
        let quality = cpm_quality(&network, &partition, gamma);
        assert!(quality <= best + 1e-9, "quality above enumerated optimum");
        if (quality - best).abs() <= 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "only {hits}/100 global optima found");

    // (d) planted-partition recovery.
    for seed in 1..=5u64 {
        let (network, truth) = planted_partition(10, 100, 0.1, 0.001, 1000 + seed);
        let partition = leiden_cluster(&network, 0.01, seed, 20).unwrap();
        let found: Vec<u32> = (0..network.node_count() as u32)
            .map(|v| partition.cluster_of(v))
            .collect();
        let score = nmi(&found, &truth);
        assert!(score >= 0.95, "seed {seed}: NMI {score} < 0.95");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "took {elapsed:?}, budget is 5 minutes"
    );
    println!(
        "acceptance: Leiden correctness (monotone, connected, {hits}/100 optima, NMI) ... PASS"
    );
}

/// Granularity trend: on the planted benchmark the mean cluster count is
/// non-decreasing in the resolution.
#[test]
fn criterion_granularity_trend() {
    let gammas = [1e-4, 1e-3, 1e-2, 1e-1];
    let mut means = Vec::new();
    for &gamma in &gammas {
        let mut total = 0usize;
        for seed in 1..=5u64 {
            let (network, _) = planted_partition(10, 100, 0.1, 0.001, 1000 + seed);
            let partition = leiden_cluster(&network, gamma, seed, 20).unwrap();
            total += partition.cluster_count();
        }
        means.push(total as f64 / 5.0);
    }
    for w in means.windows(2) {
        assert!(
            w[1] >= w[0],
            "mean cluster count not non-decreasing in resolution: {means:?}"
        );
    }
    println!("acceptance: granularity trend {means:?} across {gammas:?} ... PASS");
}

/// Preprocessing fidelity: hand-derived expansion sets (with the
/// multi-branch pairing rule), size boundaries, the nested-pair dedup
/// outcome, and complete-linkage grouping against the brute-force oracle.
#[test]
fn criterion_preprocessing_fidelity() {
    // Expansion on the 50-term fixture.
    let taxonomy = fixture_taxonomy();
    let (corpus, expected) = fixture_expansion_case();
    let (topics, skipped) = expand_annotations(&corpus, &taxonomy);
    assert!(skipped.is_empty());
    let got: BTreeMap<(String, String), Vec<String>> = topics
        .into_iter()
        .map(|t| ((t.term_id, t.branch), t.documents))
        .collect();
    assert_eq!(got, expected, "expansion differs from the hand derivation");
    assert!(got.contains_key(&("pain".into(), "C".into())));
    assert!(
        !got.contains_key(&("pain".into(), "F".into()))
            || got[&("pain".into(), "F".into())] == vec!["doc2".to_string()]
    );

    // Size boundaries 500/501 and 300,000/300,001 at the default filter.
    let sized = |n: u64| -> TopicTerm {
        TopicTerm::new(
            format!("T{n}"),
            "C",
            (0..n).map(|i| format!("d{i:07}")).collect(),
        )
    };
    let kept = filter_by_size(
        vec![sized(500), sized(501), sized(300_000), sized(300_001)],
        500,
        300_000,
    );
    let kept_ids: Vec<&str> = kept.iter().map(|t| t.term_id.as_str()).collect();
    assert_eq!(kept_ids, vec!["T501", "T300000"]);

    // Paper bin boundaries.
    let bins = SizeBins::paper_bins();
    assert_eq!(
        bins.bin_of(1000).map(|i| bins.label(i)).as_deref(),
        Some("501-1000")
    );
    assert_eq!(
        bins.bin_of(1001).map(|i| bins.label(i)).as_deref(),
        Some("1001-2000")
    );
    assert_eq!(bins.bin_of(20_000), None);

    // Nested near-duplicate pair: the smaller topic is kept.
    let docs: Vec<String> = (0..19).map(|i| format!("d{i:02}")).collect();
    let mut superset = docs.clone();
    superset.push("extra".into());
    let dedup_tax = fixture_taxonomy();
    let kept = remove_redundant(
        vec![
            TopicTerm::new("b-canidae", "B", superset),
            TopicTerm::new("b-dogs", "B", docs),
        ],
        0.9,
        &dedup_tax,
    )
    .unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].term_id, "b-dogs");

    // Complete-linkage grouping equals the brute-force oracle on random
    // instances of at most 10 topics.
    let mut rng = ChaCha8Rng::seed_from_u64(905);
    for round in 0..60 {
        let k = rng.random_range(2..=10usize);
        let threshold = [0.3, 0.5, 0.8, 0.9][rng.random_range(0..4)];
        let topics: Vec<TopicTerm> = (0..k)
            .map(|i| {
                let size = rng.random_range(1..=10usize);
                let docs: Vec<String> = (0..size)
                    .map(|_| format!("d{:02}", rng.random_range(0..14u32)))
                    .collect();
                TopicTerm::new(format!("t{i:02}"), "X", docs)
            })
            .collect();
        let tax = Taxonomy::from_rows(
            (0..k)
                .map(|i| (format!("t{i:02}"), format!("topic {i}"), format!("X{i:02}")))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let sets: Vec<Vec<String>> = topics.iter().map(|t| t.documents.clone()).collect();
        let groups = oracle_complete_linkage(&sets, threshold);
        let expected_kept: std::collections::BTreeSet<String> = groups
            .iter()
            .map(|group| {
                let keeper = group
                    .iter()
                    .min_by_key(|&&i| (sets[i].len(), format!("t{i:02}")))
                    .unwrap();
                format!("t{keeper:02}")
            })
            .collect();
        let kept = remove_redundant(topics, threshold, &tax).unwrap();
        let got_kept: std::collections::BTreeSet<String> =
            kept.iter().map(|t| t.term_id.clone()).collect();
        assert_eq!(got_kept, expected_kept, "round {round} grouping differs");
    }
    println!("acceptance: preprocessing fidelity (expansion, boundaries, dedup, linkage oracle) ... PASS");
}

fn synth_spec() -> SyntheticSpec {
    SyntheticSpec {
        branch_count: 2,
        topics_per_branch: 12,
        docs_per_topic: 60,
        citation_signal: vec![0.4, 0.0],
        text_signal: vec![0.0, 0.7],
        citation_noise: 0.003,
        text_noise: 0.0,
        external_works_per_topic: 2,
        external_citation_prob: 0.5,
        background_vocab: 800,
        topic_vocab: 30,
        title_tokens: 4,
        abstract_tokens: 50,
        seed: 2024,
    }
}

fn pipeline_config_text(work_dir: &str) -> String {
    format!(
        r#"
[paths]
corpus = "data/corpus.jsonl"
taxonomy = "data/taxonomy.tsv"
work_dir = "{work_dir}"

[network]
top_k = 15

[clustering]
resolutions = [0.02, 0.1]
seed = 7
min_cluster_size = 5

[topics]
min_size_exclusive = 20
max_size_inclusive = 2000
branch_min_terms = 5
size_bins = [[20, 100]]
min_terms_per_branch_per_bin = 10
"#
    )
}

fn run_pipeline(dir: &Path, work_dir: &str) -> (PipelineConfig, Vec<PathBuf>) {
    let cfg_path = dir.join(format!("scimap-{work_dir}.toml"));
    fs::write(&cfg_path, pipeline_config_text(work_dir)).unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    cmd_build_networks(&cfg).unwrap();
    cmd_cluster(&cfg).unwrap();
    cmd_prepare_topics(&cfg).unwrap();
    cmd_evaluate(&cfg).unwrap();
    let report = cmd_report(&cfg).unwrap();
    (cfg, report.bundle.files)
}

/// Qualitative replication: with branch A aligned to citation structure and
/// branch B aligned only to shared vocabulary, branch A outranks branch B on
/// C-Purity in every analysis cell, and the median rPurity over branch A
/// topics is positive.
#[test]
fn criterion_qualitative_replication() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = synth_spec();
    assert!(spec.total_docs() <= 20_000);
    write_synthetic(&spec, dir.path().join("data")).unwrap();
    let (cfg, _) = run_pipeline(dir.path(), "work");

    // (i) branch A first on C-Purity in every analysis cell.
    let records = scimap::effectiveness::load_records(cfg.records_path()).unwrap();
    let citation_records: Vec<EffectivenessRecord> = records
        .iter()
        .filter(|r| r.network == NetworkLabel::Citation)
        .cloned()
        .collect();
    let by_cell = cells(&citation_records);
    assert_eq!(
        by_cell.len(),
        6,
        "expected 2 resolutions x 3 coverages x 1 bin"
    );
    for (cell, cell_records) in &by_cell {
        let ranking = scimap::report::rank_branches(
            cell.clone(),
            cell_records,
            scimap::report::Metric::Purity,
            scimap::report::Aggregate::Median,
        )
        .unwrap();
        assert_eq!(ranking.entries.len(), 2, "cell {cell}");
        assert_eq!(
            ranking.entries[0].0, "A",
            "cell {cell}: branch A not first (values {:?})",
            ranking.entries
        );
    }

    // (ii) median rPurity over branch A topics is positive.
    let ratios = scimap::effectiveness::load_ratios(cfg.ratios_path()).unwrap();
    let mut a_values: Vec<f64> = ratios
        .iter()
        .filter(|r| r.branch == "A")
        .map(|r| r.r_purity)
        .collect();
    assert!(!a_values.is_empty());
    a_values.sort_by(f64::total_cmp);
    let median = if a_values.len() % 2 == 1 {
        a_values[a_values.len() / 2]
    } else {
        (a_values[a_values.len() / 2 - 1] + a_values[a_values.len() / 2]) / 2.0
    };
    assert!(
        median > 0.0,
        "median rPurity over branch A topics: {median}"
    );

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 600,
        "took {elapsed:?}, budget is 10 minutes"
    );
    println!(
        "acceptance: qualitative replication (A over B in all 6 cells, median rPurity {median:.3}, {elapsed:?}) ... PASS"
    );
}

/// Determinism: two full pipeline runs with identical config and seed
/// produce byte-identical report bundles.
#[test]
fn criterion_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        docs_per_topic: 40,
        ..synth_spec()
    };
    write_synthetic(&spec, dir.path().join("data")).unwrap();
    let (_, files1) = run_pipeline(dir.path(), "work1");
    let (_, files2) = run_pipeline(dir.path(), "work2");
    assert_eq!(files1.len(), files2.len());
    for (a, b) in files1.iter().zip(&files2) {
        assert_eq!(
            a.file_name(),
            b.file_name(),
            "bundle layout differs: {a:?} vs {b:?}"
        );
        assert_eq!(
            fs::read(a).unwrap(),
            fs::read(b).unwrap(),
            "report file {:?} differs between runs",
            a.file_name()
        );
    }
    println!(
        "acceptance: determinism ({} byte-identical report files) ... PASS",
        files1.len()
    );
}
