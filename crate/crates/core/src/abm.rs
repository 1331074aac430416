//! Exact continuous-time simulation of dupe/correct dynamics on an explicit
//! network.
//!
//! A susceptible node of class `i` is duped at rate `lambda_i` per duped
//! neighbour; a duped node is corrected at rate `gamma` per susceptible
//! neighbour. Events are drawn from the exact jump process with a Fenwick
//! tree over per-node propensities.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Compartment, ExplicitNetwork};
use crate::meanfield::{StrainParams, Trajectory};
use crate::stats::mean_and_se;
use crate::{Error, Result};

/// Who is duped at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDuped {
    Nodes(Vec<u32>),
    /// `round(fraction * n)` nodes drawn uniformly, at least one when the
    /// fraction is positive.
    Fraction(f64),
}

#[derive(Debug, Clone)]
pub struct AbmRun<'a> {
    pub network: &'a ExplicitNetwork,
    pub strain: StrainParams,
    pub initial_duped: InitialDuped,
    pub seed: u64,
    pub t_max: f64,
    pub sample_interval: f64,
}

/// Duped counts per compartment at every sample time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbmResult {
    pub seed: u64,
    pub strain: StrainParams,
    pub n_nodes: usize,
    pub compartments: Vec<Compartment>,
    pub sizes: Vec<u64>,
    pub times: Vec<f64>,
    /// `duped_counts[s][k]`: duped nodes of compartment `k` at `times[s]`.
    pub duped_counts: Vec<Vec<u64>>,
    pub events: u64,
    /// Time of the last event, or `t_max` if the process was still active.
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmSummary {
    pub seed: u64,
    pub n_nodes: usize,
    pub gamma: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub events: u64,
    pub t_end: f64,
    pub final_class_1: f64,
    pub final_class_2: f64,
    pub final_total: f64,
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn build(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(values);
        for k in 1..=n {
            let parent = k + (k & k.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[k];
            }
        }
        Fenwick { tree }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.tree.len() - 1;
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

struct Sim<'a> {
    adj: &'a [Vec<u32>],
    lambda: Vec<f64>,
    gamma: f64,
    duped: Vec<bool>,
    duped_nbrs: Vec<u32>,
    rates: Vec<f64>,
    /// Nodes with a positive rate.
    active: usize,
    tree: Fenwick,
}

impl Sim<'_> {
    fn rate_of(&self, v: usize) -> f64 {
        let dn = self.duped_nbrs[v] as f64;
        if self.duped[v] {
            self.gamma * (self.adj[v].len() as f64 - dn)
        } else {
            self.lambda[v] * dn
        }
    }

    fn refresh(&mut self, v: usize) {
        let r = self.rate_of(v);
        let delta = r - self.rates[v];
        if delta != 0.0 {
            match (self.rates[v] > 0.0, r > 0.0) {
                (false, true) => self.active += 1,
                (true, false) => self.active -= 1,
                _ => {}
            }
            self.rates[v] = r;
            self.tree.add(v, delta);
        }
    }

    fn rebuild(&mut self) {
        self.tree = Fenwick::build(&self.rates);
    }

    fn flip(&mut self, v: usize) {
        let now_duped = !self.duped[v];
        self.duped[v] = now_duped;
        for &w in &self.adj[v] {
            let w = w as usize;
            if now_duped {
                self.duped_nbrs[w] += 1;
            } else {
                self.duped_nbrs[w] -= 1;
            }
        }
        self.refresh(v);
        for k in 0..self.adj[v].len() {
            let w = self.adj[v][k] as usize;
            self.refresh(w);
        }
    }
}

pub fn run_event_driven(run: &AbmRun) -> Result<AbmResult> {
    run.strain.validate()?;
    if !(run.t_max.is_finite() && run.t_max > 0.0) {
        return Err(Error::Config(format!("t_max = {}: t_max must be positive", run.t_max)));
    }
    if !(run.sample_interval.is_finite() && run.sample_interval > 0.0) {
        return Err(Error::Config(format!(
            "sample_interval = {}: sample_interval must be positive",
            run.sample_interval
        )));
    }
    let net = run.network;
    let n = net.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);

    let initial: Vec<u32> = match &run.initial_duped {
        InitialDuped::Nodes(nodes) => {
            if let Some(&bad) = nodes.iter().find(|&&v| v as usize >= n) {
                return Err(Error::Config(format!("initial duped node {bad} is not in the network")));
            }
            nodes.clone()
        }
        InitialDuped::Fraction(f) => {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::Config(format!(
                    "initial_fraction = {f}: initial_fraction must lie in [0, 1]"
                )));
            }
            let mut k = (f * n as f64).round() as usize;
            if *f > 0.0 {
                k = k.max(1);
            }
            let mut picked: Vec<u32> =
                index::sample(&mut rng, n, k.min(n)).into_iter().map(|v| v as u32).collect();
            picked.sort_unstable();
            picked
        }
    };

    let (compartments, node_cell) = compartment_index(net);
    let mut sizes = vec![0u64; compartments.len()];
    for &c in &node_cell {
        sizes[c] += 1;
    }

    let adj = net.adjacency();
    let lambda = net
        .node_classes
        .iter()
        .map(|&c| run.strain.lambda(c))
        .collect();
    let mut sim = Sim {
        adj: &adj,
        lambda,
        gamma: run.strain.gamma,
        duped: vec![false; n],
        duped_nbrs: vec![0; n],
        rates: vec![0.0; n],
        active: 0,
        tree: Fenwick::build(&vec![0.0; n]),
    };
    for &v in &initial {
        let v = v as usize;
        if !sim.duped[v] {
            sim.duped[v] = true;
            for &w in &adj[v] {
                sim.duped_nbrs[w as usize] += 1;
            }
        }
    }
    for v in 0..n {
        sim.rates[v] = sim.rate_of(v);
    }
    sim.active = sim.rates.iter().filter(|&&r| r > 0.0).count();
    sim.rebuild();

    let counts = |duped: &[bool]| {
        let mut c = vec![0u64; compartments.len()];
        for (v, &d) in duped.iter().enumerate() {
            if d {
                c[node_cell[v]] += 1;
            }
        }
        c
    };

    let n_samples = (run.t_max / run.sample_interval + 1e-9).floor() as u64;
    let sample_time = |k: u64| k as f64 * run.sample_interval;
    let mut times = vec![0.0];
    let mut duped_counts = vec![counts(&sim.duped)];
    let mut next = 1u64;
    let mut t = 0.0;
    let mut events = 0u64;
    let rebuild_every = (n as u64).max(1024);
    let mut t_end = run.t_max;

    loop {
        let total = sim.tree.total();
        let dt = if sim.active > 0 {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        let t_next = t + dt;
        while next <= n_samples && sample_time(next) < t_next {
            times.push(sample_time(next));
            duped_counts.push(counts(&sim.duped));
            next += 1;
        }
        if !t_next.is_finite() {
            t_end = t;
            break;
        }
        if t_next > run.t_max {
            break;
        }
        t = t_next;
        let mut v = sim.tree.find(rng.random::<f64>() * total);
        if sim.rates[v] <= 0.0 {
            // accumulated rounding in the tree; resynchronize and redraw
            sim.rebuild();
            let total = sim.tree.total();
            v = sim.tree.find(rng.random::<f64>() * total);
            if sim.rates[v] <= 0.0 {
                v = sim.rates.iter().position(|&r| r > 0.0).expect("active node exists");
            }
        }
        sim.flip(v);
        events += 1;
        if events % rebuild_every == 0 {
            sim.rebuild();
        }
    }

    Ok(AbmResult {
        seed: run.seed,
        strain: run.strain,
        n_nodes: n,
        compartments,
        sizes,
        times,
        duped_counts,
        events,
        t_end,
    })
}

fn compartment_index(net: &ExplicitNetwork) -> (Vec<Compartment>, Vec<usize>) {
    let per_node = net.compartments();
    let mut ids: BTreeMap<Compartment, usize> = per_node.iter().map(|&c| (c, 0)).collect();
    for (k, id) in ids.values_mut().enumerate() {
        *id = k;
    }
    let cells = per_node.iter().map(|c| ids[c]).collect();
    (ids.into_keys().collect(), cells)
}

impl AbmResult {
    /// Per-class and total duped fraction at sample `s`.
    pub fn fractions_at(&self, s: usize) -> ([f64; 2], f64) {
        let mut duped = [0u64; 2];
        let mut size = [0u64; 2];
        for (k, c) in self.compartments.iter().enumerate() {
            duped[c.class.index()] += self.duped_counts[s][k];
            size[c.class.index()] += self.sizes[k];
        }
        let frac = |d: u64, s: u64| if s == 0 { 0.0 } else { d as f64 / s as f64 };
        (
            [frac(duped[0], size[0]), frac(duped[1], size[1])],
            frac(duped[0] + duped[1], size[0] + size[1]),
        )
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.times.len()).map(|s| self.fractions_at(s).1).collect()
    }

    pub fn final_fractions(&self) -> ([f64; 2], f64) {
        self.fractions_at(self.times.len() - 1)
    }

    pub fn summary(&self) -> AbmSummary {
        let (per_class, total) = self.final_fractions();
        AbmSummary {
            seed: self.seed,
            n_nodes: self.n_nodes,
            gamma: self.strain.gamma,
            lambda_1: self.strain.lambda_1,
            lambda_2: self.strain.lambda_2,
            events: self.events,
            t_end: self.t_end,
            final_class_1: per_class[0],
            final_class_2: per_class[1],
            final_total: total,
        }
    }

    /// Writes `t,class,a,b,compartment_size,duped_count` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "class", "a", "b", "compartment_size", "duped_count"])?;
        for (t, counts) in self.times.iter().zip(&self.duped_counts) {
            for ((c, size), d) in self.compartments.iter().zip(&self.sizes).zip(counts) {
                w.write_record([
                    t.to_string(),
                    c.class.label().to_string(),
                    c.a.to_string(),
                    c.b.to_string(),
                    size.to_string(),
                    d.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Seed of run `index` of an ensemble with `master_seed`.
pub fn run_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// `n_runs` independent runs of `template` with seeds from
/// [`run_seed`]`(master_seed, k)`; results are ordered by run index.
pub fn run_ensemble(template: &AbmRun, master_seed: u64, n_runs: usize) -> Result<Vec<AbmResult>> {
    (0..n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let run = AbmRun {
                seed: run_seed(master_seed, k),
                ..template.clone()
            };
            run_event_driven(&run).map_err(|e| e.annotate(format!("run {k}")))
        })
        .collect()
}

/// Mean and standard error across runs at matched sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbmAverage {
    pub n_runs: usize,
    pub compartments: Vec<Compartment>,
    pub sizes: Vec<u64>,
    pub times: Vec<f64>,
    /// `[s][k]` mean duped fraction of compartment `k`.
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub mean_total: Vec<f64>,
    pub se_total: Vec<f64>,
    pub mean_class: Vec<[f64; 2]>,
}

pub fn ensemble_average(runs: &[AbmResult]) -> Result<AbmAverage> {
    if runs.len() < 2 {
        return Err(Error::Consistency(format!(
            "ensemble average needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    let first = &runs[0];
    for (k, r) in runs.iter().enumerate().skip(1) {
        if r.compartments != first.compartments || r.sizes != first.sizes {
            return Err(Error::Consistency(format!("run {k} is on a different network")));
        }
        if r.times != first.times {
            return Err(Error::Consistency(format!("run {k} has a different sample grid")));
        }
    }
    let n_times = first.times.len();
    let n_cells = first.compartments.len();
    let mut mean = Vec::with_capacity(n_times);
    let mut se = Vec::with_capacity(n_times);
    let mut mean_total = Vec::with_capacity(n_times);
    let mut se_total = Vec::with_capacity(n_times);
    let mut mean_class = Vec::with_capacity(n_times);
    let mut buf = vec![0.0; runs.len()];
    for s in 0..n_times {
        let mut m_row = Vec::with_capacity(n_cells);
        let mut se_row = Vec::with_capacity(n_cells);
        for k in 0..n_cells {
            let size = first.sizes[k] as f64;
            for (slot, r) in buf.iter_mut().zip(runs) {
                *slot = r.duped_counts[s][k] as f64 / size;
            }
            let (m, e) = mean_and_se(&buf);
            m_row.push(m);
            se_row.push(e);
        }
        mean.push(m_row);
        se.push(se_row);
        let fr: Vec<([f64; 2], f64)> = runs.iter().map(|r| r.fractions_at(s)).collect();
        let totals: Vec<f64> = fr.iter().map(|f| f.1).collect();
        let (m, e) = mean_and_se(&totals);
        mean_total.push(m);
        se_total.push(e);
        let n = runs.len() as f64;
        mean_class.push([
            fr.iter().map(|f| f.0[0]).sum::<f64>() / n,
            fr.iter().map(|f| f.0[1]).sum::<f64>() / n,
        ]);
    }
    Ok(AbmAverage {
        n_runs: runs.len(),
        compartments: first.compartments.clone(),
        sizes: first.sizes.clone(),
        times: first.times.clone(),
        mean,
        se,
        mean_total,
        se_total,
        mean_class,
    })
}

impl AbmAverage {
    /// Writes `t,total_mean,total_se,class_1_mean,class_2_mean` rows.
    pub fn write_totals_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "total_mean", "total_se", "class_1_mean", "class_2_mean"])?;
        for s in 0..self.times.len() {
            w.write_record([
                self.times[s].to_string(),
                self.mean_total[s].to_string(),
                self.se_total[s].to_string(),
                self.mean_class[s][0].to_string(),
                self.mean_class[s][1].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Mean of the ensemble-mean total over samples with `t >= from`.
    pub fn window_mean(&self, from: f64) -> Result<f64> {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.mean_total)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .collect();
        if vals.is_empty() {
            return Err(Error::Consistency(format!("no samples at or after t = {from}")));
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub max_deviation: f64,
    /// Sample time of the largest deviation.
    pub at_time: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest absolute difference in total duped fraction between the ABM
/// ensemble mean and a mean-field trajectory, over the ABM sample times.
pub fn compare_to_meanfield(avg: &AbmAverage, mf: &Trajectory, tol: f64) -> Result<Comparison> {
    let mut worst = (0.0f64, 0.0);
    for (&t, &m) in avg.times.iter().zip(&avg.mean_total) {
        let d = (mf.total_at(t)? - m).abs();
        if d > worst.0 {
            worst = (d, t);
        }
    }
    Ok(Comparison {
        max_deviation: worst.0,
        at_time: worst.1,
        tolerance: tol,
        pass: worst.0 <= tol,
    })
}

/// Steady-state comparison: ABM window mean from `from` against the final
/// mean-field total.
pub fn compare_steady_state(avg: &AbmAverage, mf: &Trajectory, from: f64, tol: f64) -> Result<Comparison> {
    let abm = avg.window_mean(from)?;
    let mf_total: f64 = mf.final_state().values().iter().sum();
    let d = (abm - mf_total).abs();
    Ok(Comparison {
        max_deviation: d,
        at_time: from,
        tolerance: tol,
        pass: d <= tol,
    })
}
