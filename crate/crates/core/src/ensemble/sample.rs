use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Class, Compartment, NetworkConfig, BRIDGE_FRACTION};
use crate::{Error, Result};

const MATCHING_ROUNDS: usize = 100;

/// A finite realization of the ensemble: node classes plus an undirected
/// simple edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitNetwork {
    pub node_classes: Vec<Class>,
    pub edges: Vec<(u32, u32)>,
    pub seed: u64,
}

/// Knobs of the sampler that the model itself fixes; tests override them.
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub bridge_fraction: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            bridge_fraction: BRIDGE_FRACTION,
        }
    }
}

pub fn sample_network(cfg: &NetworkConfig, n_nodes: usize, seed: u64) -> Result<ExplicitNetwork> {
    sample_network_with(cfg, n_nodes, seed, SampleOptions::default())
}

/// Configuration-model sampler for the two-class mixed-membership ensemble.
///
/// Every node draws a total degree from the truncated power law and a role;
/// each stub is then oriented in-class (probability `q` for assortative
/// nodes, 1/2 for bridges) or cross-class. In-class stubs are paired within
/// their class, cross-class stubs across classes.
pub fn sample_network_with(
    cfg: &NetworkConfig,
    n_nodes: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<ExplicitNetwork> {
    cfg.validate()?;
    if n_nodes < 2 {
        return Err(Error::Config(format!("n_nodes = {n_nodes}: need at least 2 nodes")));
    }
    if !(0.0..=1.0).contains(&opts.bridge_fraction) {
        return Err(Error::Config("bridge_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_one = n_nodes.div_ceil(2);
    let node_classes: Vec<Class> = (0..n_nodes)
        .map(|v| if v < n_one { Class::One } else { Class::Two })
        .collect();

    let degree_cdf = power_law_cdf(cfg);
    let draw_degree = |rng: &mut ChaCha8Rng| -> u32 {
        let u: f64 = rng.random();
        let k = degree_cdf.partition_point(|&c| c < u);
        cfg.d_min + k.min(degree_cdf.len() - 1) as u32
    };

    let mut degrees: Vec<u32> = (0..n_nodes).map(|_| draw_degree(&mut rng)).collect();
    let in_class_prob: Vec<f64> = (0..n_nodes)
        .map(|_| {
            if rng.random::<f64>() < opts.bridge_fraction {
                0.5
            } else {
                cfg.q
            }
        })
        .collect();

    // Each class needs an even stub total so both in-class pools can be
    // paired once the cross-class pools are balanced; redraw degrees until so.
    let class_nodes = [0..n_one, n_one..n_nodes];
    let mut redraws = 0;
    for range in class_nodes {
        while degrees[range.clone()].iter().map(|&d| d as u64).sum::<u64>() % 2 == 1 {
            let v = rng.random_range(range.clone());
            degrees[v] = draw_degree(&mut rng);
            redraws += 1;
            if redraws > 10_000 {
                return Err(Error::Sampling {
                    seed,
                    reason: "cannot reach an even stub total".into(),
                });
            }
        }
    }

    // stubs[class][0] = in-class, stubs[class][1] = cross-class
    let mut stubs: [[Vec<u32>; 2]; 2] = Default::default();
    for v in 0..n_nodes {
        let c = node_classes[v].index();
        for _ in 0..degrees[v] {
            let cross = rng.random::<f64>() >= in_class_prob[v];
            stubs[c][cross as usize].push(v as u32);
        }
    }
    balance_orientation(&mut stubs, &mut rng).map_err(|reason| Error::Sampling { seed, reason })?;

    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for c in 0..2 {
        let pool = &mut stubs[c][0];
        pool.shuffle(&mut rng);
        pairs.extend(pool.chunks_exact(2).map(|p| (p[0], p[1])));
    }
    {
        let [one, two] = &mut stubs;
        one[1].shuffle(&mut rng);
        two[1].shuffle(&mut rng);
        pairs.extend(one[1].iter().copied().zip(two[1].iter().copied()));
    }

    let edges = repair_pairs(pairs, &node_classes, &mut rng);
    let mut degree_after = vec![0u32; n_nodes];
    for &(u, v) in &edges {
        degree_after[u as usize] += 1;
        degree_after[v as usize] += 1;
    }
    if let Some(v) = degree_after.iter().position(|&d| d < cfg.d_min) {
        return Err(Error::Sampling {
            seed,
            reason: format!(
                "node {v} fell to degree {} after dropping unrepairable edges",
                degree_after[v]
            ),
        });
    }

    let mut edges = edges;
    edges.sort_unstable();
    Ok(ExplicitNetwork {
        node_classes,
        edges,
        seed,
    })
}

fn power_law_cdf(cfg: &NetworkConfig) -> Vec<f64> {
    let weights: Vec<f64> = (cfg.d_min..=cfg.d_max)
        .map(|d| (d as f64).powf(-cfg.alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    *cdf.last_mut().unwrap() = 1.0;
    cdf
}

/// Re-orients randomly chosen stubs until both in-class pools are even and
/// the two cross-class pools have equal size.
fn balance_orientation(
    stubs: &mut [[Vec<u32>; 2]; 2],
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    let total_one = stubs[0][0].len() + stubs[0][1].len();
    let total_two = stubs[1][0].len() + stubs[1][1].len();
    if total_one % 2 == 1 || total_two % 2 == 1 {
        return Err("class stub totals must be even".into());
    }
    // target cross count: closest even number to the current mean
    let mean = (stubs[0][1].len() + stubs[1][1].len()) / 2;
    let target = (mean + mean % 2).min(total_one).min(total_two);
    for class_stubs in stubs.iter_mut() {
        let [in_pool, cross_pool] = class_stubs;
        while cross_pool.len() > target {
            let k = rng.random_range(0..cross_pool.len());
            in_pool.push(cross_pool.swap_remove(k));
        }
        while cross_pool.len() < target {
            let k = rng.random_range(0..in_pool.len());
            cross_pool.push(in_pool.swap_remove(k));
        }
    }
    Ok(())
}

fn key(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Removes self-loops and parallel edges by double-edge swaps within the
/// same pool, for up to `MATCHING_ROUNDS` rounds, then drops what is left.
fn repair_pairs(
    mut pairs: Vec<(u32, u32)>,
    classes: &[Class],
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, u32)> {
    // pool id: 0 = in-class 1, 1 = in-class 2, 2 = cross
    let pool_of = |(u, v): (u32, u32)| -> usize {
        match (classes[u as usize], classes[v as usize]) {
            (Class::One, Class::One) => 0,
            (Class::Two, Class::Two) => 1,
            _ => 2,
        }
    };
    let mut pool_members: [Vec<usize>; 3] = Default::default();
    for (k, &p) in pairs.iter().enumerate() {
        pool_members[pool_of(p)].push(k);
    }

    for _ in 0..MATCHING_ROUNDS {
        let bad = find_bad(&pairs);
        if bad.is_empty() {
            return pairs;
        }
        let mut seen: HashSet<(u32, u32)> = pairs.iter().map(|&(u, v)| key(u, v)).collect();
        for k in bad {
            let pool = &pool_members[pool_of(pairs[k])];
            if pool.len() < 2 {
                continue;
            }
            let j = pool[rng.random_range(0..pool.len())];
            if j == k {
                continue;
            }
            let (u, v) = pairs[k];
            let (x, y) = pairs[j];
            // for cross edges keep the class-1 endpoint first so swaps stay cross-class
            let (u, v) = orient(u, v, classes);
            let (x, y) = orient(x, y, classes);
            let e1 = key(u, y);
            let e2 = key(x, v);
            if u == y || x == v || e1 == e2 || seen.contains(&e1) || seen.contains(&e2) {
                continue;
            }
            seen.remove(&key(x, y));
            seen.insert(e1);
            seen.insert(e2);
            pairs[k] = (u, y);
            pairs[j] = (x, v);
        }
    }
    let bad: HashSet<usize> = find_bad(&pairs).into_iter().collect();
    pairs
        .into_iter()
        .enumerate()
        .filter(|(k, _)| !bad.contains(k))
        .map(|(_, p)| p)
        .collect()
}

fn orient(u: u32, v: u32, classes: &[Class]) -> (u32, u32) {
    if classes[u as usize] == Class::Two && classes[v as usize] == Class::One {
        (v, u)
    } else {
        (u, v)
    }
}

/// Indices of self-loops and of every repeat of an already-seen edge.
fn find_bad(pairs: &[(u32, u32)]) -> Vec<usize> {
    let mut seen = HashSet::with_capacity(pairs.len());
    let mut bad = Vec::new();
    for (k, &(u, v)) in pairs.iter().enumerate() {
        if u == v || !seen.insert(key(u, v)) {
            bad.push(k);
        }
    }
    bad
}

impl ExplicitNetwork {
    pub fn n_nodes(&self) -> usize {
        self.node_classes.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for &(u, v) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n_nodes()];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// The `(class, a, b)` compartment of every node.
    pub fn compartments(&self) -> Vec<Compartment> {
        let mut out: Vec<Compartment> = self
            .node_classes
            .iter()
            .map(|&class| Compartment { class, a: 0, b: 0 })
            .collect();
        for &(u, v) in &self.edges {
            let (cu, cv) = (self.node_classes[u as usize], self.node_classes[v as usize]);
            bump(&mut out[u as usize], cv);
            bump(&mut out[v as usize], cu);
        }
        out
    }

    /// Node counts per compartment.
    pub fn compartment_counts(&self) -> BTreeMap<Compartment, u64> {
        let mut counts = BTreeMap::new();
        for c in self.compartments() {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }

    /// Writes `source,target` and `node_id,class` CSV files.
    pub fn write_csv(&self, edges_path: &Path, classes_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(edges_path)?;
        w.write_record(["source", "target"])?;
        for &(u, v) in &self.edges {
            w.write_record([u.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(edges_path, e))?;

        let mut w = csv::Writer::from_path(classes_path)?;
        w.write_record(["node_id", "class"])?;
        for (v, c) in self.node_classes.iter().enumerate() {
            w.write_record([v.to_string(), c.label().to_string()])?;
        }
        w.flush().map_err(|e| Error::io(classes_path, e))?;
        Ok(())
    }

    /// Reads the format written by [`ExplicitNetwork::write_csv`]. Node ids
    /// must be `0..n` without gaps.
    pub fn read_csv(edges_path: &Path, classes_path: &Path, seed: u64) -> Result<Self> {
        let mut rows: Vec<(u32, u8)> = Vec::new();
        for rec in csv::Reader::from_path(classes_path)?.deserialize() {
            let (id, class): (u32, u8) = rec?;
            rows.push((id, class));
        }
        rows.sort_unstable();
        let mut node_classes = Vec::with_capacity(rows.len());
        for (k, (id, label)) in rows.into_iter().enumerate() {
            if id as usize != k {
                return Err(Error::Consistency(format!(
                    "{}: node ids must be contiguous from 0, missing {k}",
                    classes_path.display()
                )));
            }
            let class = Class::from_label(label).ok_or_else(|| {
                Error::Consistency(format!("node {id}: class must be 1 or 2, got {label}"))
            })?;
            node_classes.push(class);
        }
        let n = node_classes.len() as u32;
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for rec in csv::Reader::from_path(edges_path)?.deserialize() {
            let (u, v): (u32, u32) = rec?;
            if u >= n || v >= n {
                return Err(Error::Consistency(format!("edge ({u}, {v}) references unknown node")));
            }
            if u == v || !seen.insert(key(u, v)) {
                return Err(Error::Consistency(format!(
                    "edge ({u}, {v}) is a self-loop or duplicate"
                )));
            }
            edges.push((u, v));
        }
        Ok(ExplicitNetwork {
            node_classes,
            edges,
            seed,
        })
    }
}

fn bump(c: &mut Compartment, neighbour: Class) {
    match neighbour {
        Class::One => c.a += 1,
        Class::Two => c.b += 1,
    }
}
