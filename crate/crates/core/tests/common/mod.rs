//! Shared oracles and generators for the integration and acceptance suites.
//! Everything here is independent of the library's implementation paths: the
//! oracles recompute expected values from first principles.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scimap::corpus::{Document, Taxonomy};
use scimap::leiden::Partition;
use scimap::simnet::{NetworkLabel, NodeKind, SimilarityNetwork};
use scimap::topics::jaccard;

/// A fixture tree of 50 rows over five branches, with a multi-branch "pain"
/// analog (positions under C, F and G), a nested dogs/canidae pair under B,
/// and flat geographic terms under Z.
pub fn fixture_rows() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("b-root", "organisms", "B01"),
        ("b-vert", "vertebrates", "B01.050"),
        ("b-mammal", "mammals", "B01.050.150"),
        ("b-canidae", "canidae", "B01.050.150.200"),
        ("b-dogs", "dogs", "B01.050.150.200.300"),
        ("b-cats", "cats", "B01.050.150.250"),
        ("b-plant", "plants", "B02"),
        ("b-tree", "trees", "B02.100"),
        ("c-infect", "infections", "C01"),
        ("c-bact", "bacterial infections", "C01.100"),
        ("c-pneu", "pneumonia", "C01.100.500"),
        ("c-neop", "neoplasms", "C04"),
        ("c-lung-ca", "lung neoplasms", "C04.588"),
        ("c-symptom", "pathological conditions", "C23"),
        ("c-general", "signs and symptoms", "C23.888"),
        ("pain", "pain", "C23.888.592"),
        ("abd-pain", "abdominal pain", "C23.888.592.054"),
        ("head-pain", "headache", "C23.888.592.612"),
        ("c-resp", "respiratory diseases", "C08"),
        ("c-asthma", "asthma", "C08.127"),
        ("f-root", "behavior", "F01"),
        ("f-proc", "psychological processes", "F02"),
        ("pain", "pain", "F02.830"),
        ("f-memory", "memory", "F02.463"),
        ("f-emotion", "emotions", "F01.470"),
        ("g-root", "physiological phenomena", "G07"),
        ("g-sense", "sensation", "G11"),
        ("pain", "pain", "G11.561"),
        ("g-reflex", "reflex", "G11.700"),
        ("g-metab", "metabolism", "G03"),
        ("z-europe", "europe", "Z01.252"),
        ("z-asia", "asia", "Z01.253"),
        ("z-america", "america", "Z01.107"),
        ("z-root", "geographic locations", "Z01"),
        ("c-flu", "influenza", "C01.100.600"),
        ("c-tb", "tuberculosis", "C01.100.700"),
        ("c-skin", "skin diseases", "C17"),
        ("c-derm", "dermatitis", "C17.300"),
        ("c-heart", "heart diseases", "C14"),
        ("c-mi", "myocardial infarction", "C14.280"),
        ("c-stroke", "stroke", "C14.290"),
        ("f-anxiety", "anxiety", "F01.470.100"),
        ("f-learning", "learning", "F02.463.425"),
        ("g-growth", "growth", "G07.345"),
        ("g-aging", "aging", "G07.345.124"),
        ("b-virus", "viruses", "B04"),
        ("b-phage", "bacteriophages", "B04.123"),
        ("z-africa", "africa", "Z01.058"),
        ("z-oceania", "oceania", "Z01.639"),
        ("c-lung-mets", "lung metastases", "C04.588.100"),
    ]
}

pub fn fixture_taxonomy() -> Taxonomy {
    Taxonomy::from_rows(fixture_rows()).unwrap()
}

/// A document annotated with the given terms.
pub fn annotated(id: &str, terms: &[&str]) -> Document {
    let mut d = Document::new(id);
    d.title = "t".into();
    d.annotations = terms.iter().map(|s| s.to_string()).collect();
    d
}

/// The fixture corpus of five annotated documents together with the
/// hand-derived expansion expectation: every `(term, branch)` topic and its
/// exact document set.
pub fn fixture_expansion_case() -> (
    scimap::corpus::Corpus,
    BTreeMap<(String, String), Vec<String>>,
) {
    let corpus = scimap::corpus::Corpus::from_documents(vec![
        annotated("doc1", &["abd-pain"]),
        annotated("doc2", &["pain"]),
        annotated("doc3", &["b-dogs"]),
        annotated("doc4", &["b-canidae", "z-europe"]),
        annotated("doc5", &["c-lung-mets", "g-aging"]),
    ])
    .unwrap();

    let mut expected: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    // doc1: abd-pain @ C23.888.592.054 -> abd-pain, pain, c-general, c-symptom (all C).
    // doc2: pain @ C23.888.592 (-> c-general, c-symptom), @ F02.830 (-> f-proc),
    //       @ G11.561 (-> g-sense); the C path contributes nothing to F or G.
    expected.insert(("abd-pain", "C"), vec!["doc1"]);
    expected.insert(("pain", "C"), vec!["doc1", "doc2"]);
    expected.insert(("c-general", "C"), vec!["doc1", "doc2"]);
    expected.insert(("c-symptom", "C"), vec!["doc1", "doc2"]);
    expected.insert(("pain", "F"), vec!["doc2"]);
    expected.insert(("f-proc", "F"), vec!["doc2"]);
    expected.insert(("pain", "G"), vec!["doc2"]);
    expected.insert(("g-sense", "G"), vec!["doc2"]);
    // doc3: dogs -> canidae -> mammals -> vertebrates -> organisms root.
    // doc4: canidae (and ancestors) plus europe -> geographic root.
    expected.insert(("b-dogs", "B"), vec!["doc3"]);
    expected.insert(("b-canidae", "B"), vec!["doc3", "doc4"]);
    expected.insert(("b-mammal", "B"), vec!["doc3", "doc4"]);
    expected.insert(("b-vert", "B"), vec!["doc3", "doc4"]);
    expected.insert(("b-root", "B"), vec!["doc3", "doc4"]);
    expected.insert(("z-europe", "Z"), vec!["doc4"]);
    expected.insert(("z-root", "Z"), vec!["doc4"]);
    // doc5: lung metastases -> lung neoplasms -> neoplasms; aging -> growth -> root.
    expected.insert(("c-lung-mets", "C"), vec!["doc5"]);
    expected.insert(("c-lung-ca", "C"), vec!["doc5"]);
    expected.insert(("c-neop", "C"), vec!["doc5"]);
    expected.insert(("g-aging", "G"), vec!["doc5"]);
    expected.insert(("g-growth", "G"), vec!["doc5"]);
    expected.insert(("g-root", "G"), vec!["doc5"]);

    let expected = expected
        .into_iter()
        .map(|((t, b), docs)| {
            (
                (t.to_string(), b.to_string()),
                docs.into_iter().map(|d| d.to_string()).collect(),
            )
        })
        .collect();
    (corpus, expected)
}

/// From-scratch complete-linkage oracle: recompute all cross-pair distances
/// every step and merge the closest fully-eligible group pair, mirroring the
/// deterministic tie rule (distance, then lower group indices).
pub fn oracle_complete_linkage(sets: &[Vec<String>], threshold: f64) -> Vec<BTreeSet<usize>> {
    let frac = decimal_fraction(threshold);
    let set_intersection = |a: &[String], b: &[String]| -> usize {
        let set: BTreeSet<&String> = a.iter().collect();
        b.iter().filter(|x| set.contains(x)).count()
    };
    let eligible = |a: &[String], b: &[String]| -> bool {
        let inter = set_intersection(a, b) as u128;
        let union = (a.len() + b.len()) as u128 - inter;
        union > 0 && inter * u128::from(frac.1) >= u128::from(frac.0) * union
    };
    let mut groups: Vec<BTreeSet<usize>> = (0..sets.len()).map(|i| BTreeSet::from([i])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let mut all_ok = true;
                let mut max_d = 0.0f64;
                'pairs: for &a in &groups[i] {
                    for &b in &groups[j] {
                        if !eligible(&sets[a], &sets[b]) {
                            all_ok = false;
                            break 'pairs;
                        }
                        max_d = max_d.max(1.0 - jaccard(&sets[a], &sets[b]));
                    }
                }
                if all_ok {
                    let candidate = (max_d, i, j);
                    if best.is_none_or(|(d, bi, bj)| {
                        candidate.0 < d || (candidate.0 == d && (i, j) < (bi, bj))
                    }) {
                        best = Some(candidate);
                    }
                }
            }
        }
        let Some((_, i, j)) = best else {
            return groups;
        };
        let merged = groups.remove(j);
        groups[i].extend(merged);
    }
}

/// Build a network from indexed edges over `n` core nodes.
pub fn network_of(n: usize, edges: &[(u32, u32, f64)], label: NetworkLabel) -> SimilarityNetwork {
    let nodes: Vec<(String, NodeKind)> = (0..n)
        .map(|i| (format!("v{i:05}"), NodeKind::Core))
        .collect();
    let edges: Vec<(String, String, f64)> = edges
        .iter()
        .map(|&(u, v, w)| (format!("v{u:05}"), format!("v{v:05}"), w))
        .collect();
    SimilarityNetwork::new(label, nodes, edges).unwrap()
}

/// Erdos-Renyi style random network with unit weights.
pub fn random_network(n: usize, p: f64, seed: u64) -> SimilarityNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    network_of(n, &edges, NetworkLabel::Text)
}

/// Random network with edge weights drawn uniformly from [0.5, 4.0].
pub fn random_weighted_network(n: usize, p: f64, seed: u64) -> SimilarityNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.random_bool(p) {
                edges.push((u, v, rng.random_range(0.5..4.0)));
            }
        }
    }
    network_of(n, &edges, NetworkLabel::Text)
}

/// Planted-partition benchmark: `blocks` blocks of `block_size` nodes, edge
/// probability `p_in` within a block and `p_out` across blocks. Returns the
/// network and the planted block assignment.
pub fn planted_partition(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (SimilarityNetwork, Vec<u32>) {
    let n = blocks * block_size;
    let truth: Vec<u32> = (0..n).map(|i| (i / block_size) as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            let p = if truth[u as usize] == truth[v as usize] {
                p_in
            } else {
                p_out
            };
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    (network_of(n, &edges, NetworkLabel::Citation), truth)
}

/// CPM quality of an assignment over indexed unit-size nodes, recomputed
/// directly from the edge list.
pub fn cpm_of(n: usize, edges: &[(u32, u32, f64)], assignment: &[u32], gamma: f64) -> f64 {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &c in assignment.iter().take(n) {
        *counts.entry(c).or_insert(0) += 1;
    }
    let mut q = 0.0;
    for &(u, v, w) in edges {
        if assignment[u as usize] == assignment[v as usize] {
            q += w;
        }
    }
    for (_, c) in counts {
        let c = c as f64;
        q -= gamma * c * (c - 1.0) / 2.0;
    }
    q
}

/// Enumerate every set partition of `n` items as restricted-growth strings:
/// item 0 is always cluster 0, and each later item joins an existing cluster
/// or opens the next fresh one.
pub fn enumerate_partitions(n: usize, f: &mut impl FnMut(&[u32])) {
    fn rec(v: usize, next_free: u32, assignment: &mut [u32], f: &mut impl FnMut(&[u32])) {
        if v == assignment.len() {
            f(assignment);
            return;
        }
        for c in 0..next_free {
            assignment[v] = c;
            rec(v + 1, next_free, assignment, f);
        }
        assignment[v] = next_free;
        rec(v + 1, next_free + 1, assignment, f);
    }
    let mut assignment = vec![0u32; n];
    if n == 0 {
        f(&assignment);
        return;
    }
    rec(1, 1, &mut assignment, f);
}

/// Globally optimal CPM quality over all partitions, by enumeration.
pub fn optimal_cpm(n: usize, edges: &[(u32, u32, f64)], gamma: f64) -> (f64, Vec<u32>) {
    let mut best = f64::NEG_INFINITY;
    let mut best_assignment = vec![0u32; n];
    enumerate_partitions(n, &mut |assignment| {
        let q = cpm_of(n, edges, assignment, gamma);
        if q > best {
            best = q;
            best_assignment.copy_from_slice(assignment);
        }
    });
    (best, best_assignment)
}

/// Normalized mutual information between two assignments over the same
/// items, normalized by the arithmetic mean of the entropies.
pub fn nmi(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mut joint: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut pa: BTreeMap<u32, f64> = BTreeMap::new();
    let mut pb: BTreeMap<u32, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *pa.entry(x).or_insert(0.0) += 1.0;
        *pb.entry(y).or_insert(0.0) += 1.0;
    }
    let mut mutual = 0.0;
    for (&(x, y), &nxy) in &joint {
        let pxy = nxy / n;
        let px = pa[&x] / n;
        let py = pb[&y] / n;
        mutual += pxy * (pxy / (px * py)).ln();
    }
    let entropy =
        |p: &BTreeMap<u32, f64>| -> f64 { p.values().map(|&c| -(c / n) * (c / n).ln()).sum() };
    let ha = entropy(&pa);
    let hb = entropy(&pb);
    if ha + hb == 0.0 {
        return 1.0;
    }
    2.0 * mutual / (ha + hb)
}

/// True when every cluster of the partition induces a connected subgraph.
pub fn clusters_connected(network: &SimilarityNetwork, partition: &Partition) -> bool {
    let n = network.node_count();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(u, v, _) in network.edges() {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for v in 0..n as u32 {
        members.entry(partition.cluster_of(v)).or_default().push(v);
    }
    for (_, nodes) in members {
        if nodes.len() <= 1 {
            continue;
        }
        let inside: BTreeSet<u32> = nodes.iter().copied().collect();
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut queue = vec![nodes[0]];
        seen.insert(nodes[0]);
        while let Some(v) = queue.pop() {
            for &w in &adj[v as usize] {
                if inside.contains(&w) && seen.insert(w) {
                    queue.push(w);
                }
            }
        }
        if seen.len() != nodes.len() {
            return false;
        }
    }
    true
}

/// True when no single node can move to a neighboring cluster or a fresh
/// singleton with CPM gain above `eps`.
pub fn is_node_optimal(
    network: &SimilarityNetwork,
    partition: &Partition,
    gamma: f64,
    eps: f64,
) -> bool {
    let n = network.node_count();
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for &(u, v, w) in network.edges() {
        adj[u as usize].push((v, w));
        adj[v as usize].push((u, w));
    }
    let counts = partition.node_counts();
    for v in 0..n as u32 {
        let cur = partition.cluster_of(v);
        let mut w_to: BTreeMap<u32, f64> = BTreeMap::new();
        for &(nbr, w) in &adj[v as usize] {
            *w_to.entry(partition.cluster_of(nbr)).or_insert(0.0) += w;
        }
        let w_cur = w_to.get(&cur).copied().unwrap_or(0.0);
        let n_cur_rest = f64::from(counts[cur as usize] - 1);
        for (&target, &w_t) in &w_to {
            if target == cur {
                continue;
            }
            let gain = w_t - w_cur - gamma * (f64::from(counts[target as usize]) - n_cur_rest);
            if gain > eps {
                return false;
            }
        }
        let gain_empty = -w_cur + gamma * n_cur_rest;
        if gain_empty > eps {
            return false;
        }
    }
    true
}

/// A cleaned solution with the given cluster sizes; cluster `c` holds
/// documents `d<c>_<i>`.
pub fn solution_with_sizes(
    label: NetworkLabel,
    resolution: f64,
    sizes: &[usize],
) -> scimap::leiden::ClusteringSolution {
    let mut nodes = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        for i in 0..size {
            nodes.push((format!("d{c:02}_{i:04}"), NodeKind::Core));
        }
    }
    let network = SimilarityNetwork::new(label, nodes, vec![]).unwrap();
    let assignment: Vec<u32> = network
        .nodes()
        .iter()
        .map(|(id, _)| id[1..3].parse::<u32>().unwrap())
        .collect();
    let partition = Partition::new(&network, assignment).unwrap();
    scimap::leiden::clean_solution(&partition, &network, 0, resolution, 1)
}

/// Documents `d<c>_<0..count>` of cluster `c`.
pub fn cluster_docs(c: usize, count: usize) -> Vec<String> {
    (0..count).map(|i| format!("d{c:02}_{i:04}")).collect()
}

/// Exact decimal fraction of an f64 via its shortest rendering.
pub fn decimal_fraction(x: f64) -> (u64, u64) {
    let text = format!("{x}");
    let (int_part, frac_part) = text.split_once('.').unwrap_or((text.as_str(), ""));
    let digits: u64 = format!("{int_part}{frac_part}").parse().unwrap();
    (digits, 10u64.pow(frac_part.len() as u32))
}

/// Smallest number of clusters whose topic-document counts reach
/// `coverage * total`, by exhaustive subset enumeration (counts.len() <= 20).
pub fn min_cover_size(counts: &[u64], coverage: f64) -> usize {
    let (num, den) = decimal_fraction(coverage);
    let total: u64 = counts.iter().sum();
    assert!(total > 0);
    let mut best = usize::MAX;
    for mask in 0u32..(1 << counts.len()) {
        let sum: u64 = counts
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask & (1 << i) != 0)
            .map(|(_, &c)| c)
            .sum();
        if u128::from(sum) * u128::from(den) >= u128::from(num) * u128::from(total) {
            best = best.min(mask.count_ones() as usize);
        }
    }
    best
}

/// Random effectiveness instance: a cleaned solution of at most 12 clusters
/// and 200 documents, a random topic set touching it, and a coverage.
pub fn random_effectiveness_instance(
    rng: &mut ChaCha8Rng,
) -> (
    scimap::leiden::ClusteringSolution,
    Vec<String>,
    scimap::effectiveness::Coverage,
) {
    let k = rng.random_range(1..=12usize);
    let mut sizes = Vec::with_capacity(k);
    let mut remaining = 200usize;
    for _ in 0..k {
        if remaining == 0 {
            break;
        }
        let s = rng.random_range(1..=remaining.min(30));
        sizes.push(s);
        remaining -= s;
    }
    let solution = solution_with_sizes(NetworkLabel::Citation, 2e-5, &sizes);
    let mut topic_docs = Vec::new();
    for (c, &size) in sizes.iter().enumerate() {
        let take = rng.random_range(0..=size);
        topic_docs.extend(cluster_docs(c, take));
    }
    for i in 0..rng.random_range(0..5) {
        topic_docs.push(format!("outside{i}"));
    }
    let coverage = scimap::effectiveness::Coverage::from_f64(
        [0.25, 0.5, 0.75, 0.3, 1.0][rng.random_range(0..5)],
    )
    .unwrap();
    (solution, topic_docs, coverage)
}

/// Purity recomputed by scanning the full solution assignment.
pub fn brute_force_purity(
    selected: &[u32],
    topic_docs: &[String],
    solution: &scimap::leiden::ClusteringSolution,
) -> (u64, u64) {
    let selected: BTreeSet<u32> = selected.iter().copied().collect();
    let topic: BTreeSet<&String> = topic_docs.iter().collect();
    let mut num = 0;
    let mut den = 0;
    for (doc, cluster) in solution.assignment() {
        if selected.contains(cluster) {
            den += 1;
            if topic.contains(doc) {
                num += 1;
            }
        }
    }
    (num, den)
}

/// Assignment of core documents in a cleaned-solution-compatible order,
/// mapped onto network node indices (auxiliaries get u32::MAX).
pub fn partition_vs_truth(
    network: &SimilarityNetwork,
    partition: &Partition,
    truth: &[u32],
) -> (Vec<u32>, Vec<u32>) {
    let mut found = Vec::new();
    let mut expected = Vec::new();
    for (idx, (id, kind)) in network.nodes().iter().enumerate() {
        if *kind == NodeKind::Core {
            let original: usize = id[1..].parse().unwrap();
            found.push(partition.cluster_of(idx as u32));
            expected.push(truth[original]);
        }
    }
    (found, expected)
}
