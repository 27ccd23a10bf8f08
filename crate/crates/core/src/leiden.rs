//! Leiden clustering under the constant Potts model (CPM).
//!
//! The quality of a partition is `sum over clusters c of
//! [W_c - resolution * n_c * (n_c - 1) / 2]`, where `W_c` is the total weight
//! of intra-cluster edges and `n_c` the number of nodes in `c`. Higher
//! resolution values produce smaller clusters.
//!
//! The algorithm repeats passes of (local move, refinement, aggregation),
//! restarting from singletons after each converged run, until a converged
//! run fails to improve on the best earlier result or `max_passes` passes
//! have run. It is sequential and deterministic for a fixed seed: local
//! moves break ties by highest gain then lowest candidate cluster id, and
//! refinement picks uniformly at random (seeded) among strictly improving
//! merge targets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simnet::{NetworkLabel, NodeKind, SimilarityNetwork};

/// Gains below this threshold do not trigger a move.
const EPS: f64 = 1e-12;

/// A hard partition of the network nodes into dense clusters `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignment: Vec<u32>,
    node_counts: Vec<u32>,
    internal_weights: Vec<f64>,
}

impl Partition {
    /// Wrap an assignment over the network's canonical node order. Cluster
    /// ids must be dense (every id in `0..k` used).
    pub fn new(network: &SimilarityNetwork, assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != network.node_count() {
            return Err(Error::InvalidPartition(format!(
                "assignment covers {} nodes, network has {}",
                assignment.len(),
                network.node_count()
            )));
        }
        let k = assignment
            .iter()
            .map(|&c| c as usize + 1)
            .max()
            .unwrap_or(0);
        let mut node_counts = vec![0u32; k];
        for &c in &assignment {
            node_counts[c as usize] += 1;
        }
        if node_counts.contains(&0) {
            return Err(Error::InvalidPartition(
                "cluster ids are not contiguous from 0".into(),
            ));
        }
        let mut internal_weights = vec![0.0; k];
        for &(u, v, w) in network.edges() {
            if assignment[u as usize] == assignment[v as usize] {
                internal_weights[assignment[u as usize] as usize] += w;
            }
        }
        Ok(Partition {
            assignment,
            node_counts,
            internal_weights,
        })
    }

    /// Every node in its own cluster.
    pub fn singletons(network: &SimilarityNetwork) -> Self {
        let n = network.node_count();
        Partition {
            assignment: (0..n as u32).collect(),
            node_counts: vec![1; n],
            internal_weights: vec![0.0; n],
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.node_counts.len()
    }

    pub fn cluster_of(&self, node: u32) -> u32 {
        self.assignment[node as usize]
    }

    /// Node index -> cluster id, in the network's canonical node order.
    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Nodes per cluster.
    pub fn node_counts(&self) -> &[u32] {
        &self.node_counts
    }

    /// Total intra-cluster edge weight per cluster.
    pub fn internal_weights(&self) -> &[f64] {
        &self.internal_weights
    }
}

/// CPM quality of a partition at the given resolution.
pub fn cpm_quality(network: &SimilarityNetwork, partition: &Partition, resolution: f64) -> f64 {
    let _ = network;
    partition
        .node_counts
        .iter()
        .zip(&partition.internal_weights)
        .map(|(&n, &w)| {
            let n = f64::from(n);
            w - resolution * n * (n - 1.0) / 2.0
        })
        .sum()
}

/// Internal working graph: adjacency without self entries, plus the number of
/// original nodes each (super)node stands for.
#[derive(Debug, Clone)]
struct WorkGraph {
    adj: Vec<Vec<(u32, f64)>>,
    size: Vec<u64>,
}

impl WorkGraph {
    fn from_network(network: &SimilarityNetwork) -> Self {
        let n = network.node_count();
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in network.edges() {
            adj[u as usize].push((v, w));
            adj[v as usize].push((u, w));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(nbr, _)| nbr);
        }
        WorkGraph {
            adj,
            size: vec![1; n],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }
}

/// Relabel cluster ids by first occurrence, returning the cluster count.
/// Two assignments describing the same partition densify to identical
/// vectors, which makes convergence checks a plain equality test.
fn densify(assignment: &mut [u32]) -> usize {
    let mut map: HashMap<u32, u32> = HashMap::new();
    let mut next = 0u32;
    for c in assignment.iter_mut() {
        let dense = *map.entry(*c).or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
        *c = dense;
    }
    next as usize
}

/// Sweep-based local move phase. Nodes are visited in seeded random order;
/// each node moves to the neighboring cluster (or a fresh empty cluster)
/// with the highest strictly positive CPM gain, ties broken by lowest
/// cluster id. Sweeps repeat until one completes without any move, so at
/// return no single-node move can improve quality.
fn local_move(g: &WorkGraph, assignment: &mut [u32], gamma: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = g.len();
    let slots = assignment
        .iter()
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(1);
    let mut cluster_size: Vec<u64> = vec![0; slots];
    for (v, &c) in assignment.iter().enumerate() {
        cluster_size[c as usize] += g.size[v];
    }
    let mut free: BTreeSet<u32> = (0..slots as u32)
        .filter(|&c| cluster_size[c as usize] == 0)
        .collect();
    let mut acc: Vec<f64> = vec![0.0; slots];
    let mut touched: Vec<u32> = Vec::new();
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut changed_any = false;

    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &v in &order {
            let vu = v as usize;
            let cur = assignment[vu];
            let s_v = g.size[vu] as f64;

            for &(nbr, w) in &g.adj[vu] {
                let c = assignment[nbr as usize] as usize;
                if acc[c] == 0.0 {
                    touched.push(c as u32);
                }
                acc[c] += w;
            }
            let w_cur = acc[cur as usize];
            let n_cur_rest = (cluster_size[cur as usize] - g.size[vu]) as f64;

            let mut best_gain = f64::NEG_INFINITY;
            let mut best_c = cur;
            touched.sort_unstable();
            for &c in &touched {
                if c == cur {
                    continue;
                }
                let gain = acc[c as usize]
                    - w_cur
                    - gamma * s_v * (cluster_size[c as usize] as f64 - n_cur_rest);
                if gain > best_gain || (gain == best_gain && c < best_c) {
                    best_gain = gain;
                    best_c = c;
                }
            }
            // A fresh empty cluster is always a candidate target.
            if n_cur_rest > 0.0 {
                let empty_id = free
                    .iter()
                    .next()
                    .copied()
                    .unwrap_or(cluster_size.len() as u32);
                let gain = -w_cur + gamma * s_v * n_cur_rest;
                if gain > best_gain || (gain == best_gain && empty_id < best_c) {
                    best_gain = gain;
                    best_c = empty_id;
                }
            }

            for &c in &touched {
                acc[c as usize] = 0.0;
            }
            touched.clear();

            if best_gain > EPS && best_c != cur {
                cluster_size[cur as usize] -= g.size[vu];
                if cluster_size[cur as usize] == 0 {
                    free.insert(cur);
                }
                if best_c as usize >= cluster_size.len() {
                    cluster_size.resize(best_c as usize + 1, 0);
                    acc.resize(best_c as usize + 1, 0.0);
                }
                if cluster_size[best_c as usize] == 0 {
                    free.remove(&best_c);
                }
                cluster_size[best_c as usize] += g.size[vu];
                assignment[vu] = best_c;
                moved = true;
                changed_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    changed_any
}

/// Refinement: within each local-move cluster, nodes still in a singleton
/// sub-cluster merge into a strictly improving sub-cluster of the same
/// cluster, chosen uniformly at random. Returns the dense sub-cluster
/// assignment and its count. Every sub-cluster induces a connected subgraph
/// because each merge requires positive weight into the target.
fn refine(
    g: &WorkGraph,
    assignment: &[u32],
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, usize) {
    let n = g.len();
    let mut sub: Vec<u32> = (0..n as u32).collect();
    let mut sub_size: Vec<u64> = g.size.clone();
    let mut member_count: Vec<u32> = vec![1; n];

    let mut communities: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (v, &c) in assignment.iter().enumerate() {
        communities.entry(c).or_default().push(v as u32);
    }

    for (_, mut members) in communities {
        if members.len() <= 1 {
            continue;
        }
        members.shuffle(rng);
        for &v in &members {
            let vu = v as usize;
            if member_count[sub[vu] as usize] != 1 {
                continue;
            }
            let mut w_to: BTreeMap<u32, f64> = BTreeMap::new();
            for &(nbr, w) in &g.adj[vu] {
                if assignment[nbr as usize] == assignment[vu] {
                    let s = sub[nbr as usize];
                    if s != sub[vu] {
                        *w_to.entry(s).or_insert(0.0) += w;
                    }
                }
            }
            let s_v = g.size[vu] as f64;
            let improving: Vec<u32> = w_to
                .iter()
                .filter(|&(&s, &w)| w - gamma * s_v * sub_size[s as usize] as f64 > EPS)
                .map(|(&s, _)| s)
                .collect();
            if improving.is_empty() {
                continue;
            }
            let target = improving[rng.random_range(0..improving.len())];
            member_count[sub[vu] as usize] = 0;
            sub_size[sub[vu] as usize] = 0;
            sub[vu] = target;
            sub_size[target as usize] += g.size[vu];
            member_count[target as usize] += 1;
        }
    }

    let count = densify(&mut sub);
    (sub, count)
}

/// Collapse each sub-cluster into one node. Intra-sub weights are dropped:
/// they are constant under any later move and never enter a gain. Returns
/// the aggregated graph and the induced cluster assignment of its nodes.
fn aggregate(
    g: &WorkGraph,
    sub: &[u32],
    sub_count: usize,
    assignment: &[u32],
) -> (WorkGraph, Vec<u32>) {
    let mut size = vec![0u64; sub_count];
    let mut induced = vec![0u32; sub_count];
    for v in 0..g.len() {
        let s = sub[v] as usize;
        size[s] += g.size[v];
        induced[s] = assignment[v];
    }
    let mut edge_acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for v in 0..g.len() {
        for &(nbr, w) in &g.adj[v] {
            if (nbr as usize) <= v {
                continue;
            }
            let (a, b) = (sub[v], sub[nbr as usize]);
            if a == b {
                continue;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            *edge_acc.entry(key).or_insert(0.0) += w;
        }
    }
    let mut adj = vec![Vec::new(); sub_count];
    for (&(a, b), &w) in &edge_acc {
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }
    for list in &mut adj {
        list.sort_unstable_by_key(|&(nbr, _)| nbr);
    }
    (WorkGraph { adj, size }, induced)
}

/// CPM quality of a flat assignment on the original (unit-size) graph.
fn cpm_of_assignment(g: &WorkGraph, assignment: &[u32], gamma: f64) -> f64 {
    let k = assignment
        .iter()
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let mut counts = vec![0u64; k];
    for &c in assignment {
        counts[c as usize] += 1;
    }
    let mut quality = 0.0;
    for v in 0..g.len() {
        for &(nbr, w) in &g.adj[v] {
            if (nbr as usize) > v && assignment[v] == assignment[nbr as usize] {
                quality += w;
            }
        }
    }
    for &n in &counts {
        let n = n as f64;
        quality -= gamma * n * (n - 1.0) / 2.0;
    }
    quality
}

/// One full pass: repeated (local move, refinement, aggregation) levels until
/// every cluster is a single aggregate node or refinement stops making
/// progress. Returns the flat assignment on the original nodes, densified.
fn leiden_pass(g0: &WorkGraph, flat: &[u32], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let n0 = g0.len();
    let mut g = g0.clone();
    let mut part: Vec<u32> = flat.to_vec();
    densify(&mut part);
    let mut orig: Vec<u32> = (0..n0 as u32).collect();

    loop {
        local_move(&g, &mut part, gamma, rng);
        let cluster_count = densify(&mut part);
        if cluster_count == g.len() {
            break;
        }
        let (sub, sub_count) = refine(&g, &part, gamma, rng);
        if sub_count == g.len() {
            break;
        }
        let (g2, mut part2) = aggregate(&g, &sub, sub_count, &part);
        for o in orig.iter_mut() {
            *o = sub[*o as usize];
        }
        densify(&mut part2);
        g = g2;
        part = part2;
    }

    let mut out: Vec<u32> = orig.iter().map(|&node| part[node as usize]).collect();
    densify(&mut out);
    out
}

/// Cluster a network with the Leiden algorithm under CPM.
///
/// Deterministic for a fixed seed. Auxiliary nodes participate with node
/// count weight 1 and are only dropped later by [`clean_solution`].
pub fn leiden_cluster(
    network: &SimilarityNetwork,
    resolution: f64,
    seed: u64,
    max_passes: usize,
) -> Result<Partition> {
    leiden_cluster_detailed(network, resolution, seed, max_passes).map(|(p, _)| p)
}

/// Like [`leiden_cluster`], also returning the best CPM quality reached after
/// each pass; that sequence never decreases.
///
/// Passes repeat until convergence. A converged pass (no assignment change)
/// is kept as a candidate result, and the search restarts from the singleton
/// partition with the advancing RNG; the loop stops once a converged run
/// fails to improve on the best earlier result, or after `max_passes` passes
/// in total. The returned partition is always a converged run's result, so
/// no single node can move with a strict CPM gain.
pub fn leiden_cluster_detailed(
    network: &SimilarityNetwork,
    resolution: f64,
    seed: u64,
    max_passes: usize,
) -> Result<(Partition, Vec<f64>)> {
    if network.node_count() == 0 {
        return Err(Error::EmptyNetwork(network.label().to_string()));
    }
    let resolution_ok = resolution.is_finite() && resolution > 0.0;
    if !resolution_ok {
        return Err(Error::InvalidParameter {
            what: "resolution",
            why: format!("must be > 0, got {resolution}"),
        });
    }
    let g0 = WorkGraph::from_network(network);
    let n = g0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let singletons: Vec<u32> = (0..n as u32).collect();

    let mut flat = singletons.clone();
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut record_before_run = f64::NEG_INFINITY;
    let mut qualities: Vec<f64> = Vec::new();

    for _ in 0..max_passes.max(1) {
        let new_flat = leiden_pass(&g0, &flat, resolution, &mut rng);
        let q = cpm_of_assignment(&g0, &new_flat, resolution);
        if best.as_ref().is_none_or(|&(bq, _)| q > bq) {
            best = Some((q, new_flat.clone()));
        }
        let best_q = best.as_ref().unwrap().0;
        debug_assert!(
            qualities.last().is_none_or(|&prev| best_q >= prev),
            "best quality decreased across passes"
        );
        qualities.push(best_q);

        if new_flat == flat {
            // This run converged; it is node-optimal. Stop unless it set a
            // new record, in which case a fresh run challenges it.
            if q <= record_before_run {
                break;
            }
            record_before_run = best_q;
            flat = singletons.clone();
        } else {
            flat = new_flat;
        }
    }

    let partition = Partition::new(network, best.expect("at least one pass ran").1)?;
    Ok((partition, qualities))
}

/// Metadata of a cleaned clustering solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub network: NetworkLabel,
    pub resolution: f64,
    pub seed: u64,
    pub min_size: u32,
}

/// A cleaned clustering solution: core documents only, clusters below the
/// minimum size removed, cluster ids re-densified.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringSolution {
    meta: SolutionMeta,
    assignment: BTreeMap<String, u32>,
    cluster_sizes: Vec<u32>,
}

impl ClusteringSolution {
    pub fn meta(&self) -> &SolutionMeta {
        &self.meta
    }

    /// Document id -> cluster id, ascending by document id.
    pub fn assignment(&self) -> &BTreeMap<String, u32> {
        &self.assignment
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn doc_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_size(&self, cluster: u32) -> u32 {
        self.cluster_sizes[cluster as usize]
    }

    pub fn cluster_sizes(&self) -> &[u32] {
        &self.cluster_sizes
    }

    pub fn cluster_of(&self, doc_id: &str) -> Option<u32> {
        self.assignment.get(doc_id).copied()
    }

    /// Tab-separated `(doc_id, cluster_id)` rows under a metadata header.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "# network={} resolution={} seed={} min_size={}",
            self.meta.network, self.meta.resolution, self.meta.seed, self.meta.min_size
        )
        .map_err(|e| Error::io(path, e))?;
        for (doc, cluster) in &self.assignment {
            writeln!(w, "{doc}\t{cluster}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing solution header"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let rest = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse(path, 1, "malformed solution header"))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for part in rest.split(' ') {
            if let Some((k, v)) = part.split_once('=') {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(path, 1, format!("header missing {k}")))
        };
        let meta = SolutionMeta {
            network: get("network")?.parse()?,
            resolution: get("resolution")?
                .parse()
                .map_err(|_| Error::parse(path, 1, "bad resolution"))?,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::parse(path, 1, "bad seed"))?,
            min_size: get("min_size")?
                .parse()
                .map_err(|_| Error::parse(path, 1, "bad min_size"))?,
        };
        let mut assignment = BTreeMap::new();
        let mut max_cluster: Option<u32> = None;
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (doc, cluster) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, idx + 1, "malformed solution line"))?;
            let cluster: u32 = cluster
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, "bad cluster id"))?;
            max_cluster = Some(max_cluster.map_or(cluster, |m| m.max(cluster)));
            if assignment.insert(doc.to_string(), cluster).is_some() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("duplicate doc {doc:?}"),
                ));
            }
        }
        let k = max_cluster.map_or(0, |m| m as usize + 1);
        let mut cluster_sizes = vec![0u32; k];
        for &c in assignment.values() {
            cluster_sizes[c as usize] += 1;
        }
        Ok(ClusteringSolution {
            meta,
            assignment,
            cluster_sizes,
        })
    }
}

/// Drop auxiliary nodes, remove clusters with fewer than `min_size` core
/// documents, and re-densify cluster ids. May yield an empty solution.
pub fn clean_solution(
    partition: &Partition,
    network: &SimilarityNetwork,
    min_size: u32,
    resolution: f64,
    seed: u64,
) -> ClusteringSolution {
    let mut members: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (idx, (id, kind)) in network.nodes().iter().enumerate() {
        if *kind == NodeKind::Core {
            members
                .entry(partition.cluster_of(idx as u32))
                .or_default()
                .push(id);
        }
    }
    let mut assignment = BTreeMap::new();
    let mut cluster_sizes = Vec::new();
    for (_, docs) in members {
        if docs.len() >= min_size as usize {
            let new_id = cluster_sizes.len() as u32;
            cluster_sizes.push(docs.len() as u32);
            for doc in docs {
                assignment.insert(doc.to_string(), new_id);
            }
        }
    }
    ClusteringSolution {
        meta: SolutionMeta {
            network: network.label(),
            resolution,
            seed,
            min_size,
        },
        assignment,
        cluster_sizes,
    }
}

/// Summary of a solution, including the smallest set `S` of largest clusters
/// that together cover at least half of the documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionStats {
    pub clusters: usize,
    pub documents: usize,
    pub min_size: u32,
    pub median_size: f64,
    pub max_size: u32,
    pub half_cover_count: usize,
    pub half_cover_min: u32,
    pub half_cover_median: f64,
    pub half_cover_max: u32,
}

fn median_of_sorted(sorted: &[u32]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
    }
}

/// Cluster-size statistics of a nonempty solution.
pub fn solution_stats(solution: &ClusteringSolution) -> Result<SolutionStats> {
    if solution.is_empty() {
        return Err(Error::EmptySolution);
    }
    let mut sizes: Vec<u32> = solution.cluster_sizes.clone();
    sizes.sort_unstable();
    let total: u64 = sizes.iter().map(|&s| u64::from(s)).sum();

    let mut desc = sizes.clone();
    desc.reverse();
    let mut cum = 0u64;
    let mut cover = Vec::new();
    for &s in &desc {
        cover.push(s);
        cum += u64::from(s);
        if 2 * cum >= total {
            break;
        }
    }
    let mut cover_sorted = cover.clone();
    cover_sorted.sort_unstable();

    Ok(SolutionStats {
        clusters: sizes.len(),
        documents: total as usize,
        min_size: sizes[0],
        median_size: median_of_sorted(&sizes),
        max_size: sizes[sizes.len() - 1],
        half_cover_count: cover.len(),
        half_cover_min: cover_sorted[0],
        half_cover_median: median_of_sorted(&cover_sorted),
        half_cover_max: cover_sorted[cover_sorted.len() - 1],
    })
}
