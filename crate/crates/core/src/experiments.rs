//! Parameter sweeps and the three-panel figure dataset.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm::{ensemble_average, run_ensemble, run_seed, AbmRun, InitialDuped};
use crate::ensemble::{build_ensemble, sample_network, Class, ClassDegreeDistribution, NetworkConfig};
use crate::meanfield::{
    duped_fraction, find_invasion_threshold, integrate, invades, seed_initial, SolverConfig,
    StrainParams,
};
use crate::multistrain::{joint_state, matching_profile, neighborhood_profile, run_pair, StrainPair};
use crate::stats::spearman;
use crate::{check, Error, Result, Violation};

/// Correction rate used for the profile panels, as a multiple of the
/// invasion threshold.
pub const DEFAULT_GAMMA_FACTOR: f64 = 0.85;

const MAX_WIDENINGS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Gamma,
    Q,
    Alpha,
    /// `lambda_2 / lambda_1`, with `lambda_1` held at its base value.
    LambdaRatio,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::Q => "q",
            Axis::Alpha => "alpha",
            Axis::LambdaRatio => "lambda_ratio",
        }
    }
}

/// Settings of the stochastic bands attached to a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmSettings {
    pub n_nodes: usize,
    pub initial_fraction: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    /// Start of the averaging window for steady-state values.
    pub window_from: f64,
    pub seed: u64,
}

impl Default for AbmSettings {
    fn default() -> Self {
        AbmSettings {
            n_nodes: 10_000,
            initial_fraction: 0.05,
            t_max: 150.0,
            sample_interval: 5.0,
            window_from: 50.0,
            seed: 0,
        }
    }
}

impl AbmSettings {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_nodes < 2 {
            out.push(Violation::new("n_nodes", self.n_nodes, "n_nodes must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.initial_fraction) {
            out.push(Violation::new(
                "initial_fraction",
                self.initial_fraction,
                "initial_fraction must lie in [0, 1]",
            ));
        }
        for (key, v) in [("t_max", self.t_max), ("sample_interval", self.sample_interval)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(Violation::new(key, v, format!("{key} must be positive")));
            }
        }
        if !(self.window_from >= 0.0 && self.window_from <= self.t_max) {
            out.push(Violation::new(
                "window_from",
                self.window_from,
                "window_from must lie in [0, t_max]",
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub network: NetworkConfig,
    /// Base strain; for `q` and `alpha` sweeps it is strain A of the
    /// mirrored pair.
    #[serde(default)]
    pub strain: StrainParams,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Stochastic runs per grid point (0 = mean-field only). Gamma sweeps only.
    #[serde(default)]
    pub replicates: usize,
    /// When set, non-gamma sweeps use `gamma_factor * gamma_c` at each grid
    /// point instead of the base gamma.
    #[serde(default)]
    pub gamma_factor: Option<f64>,
    #[serde(default)]
    pub abm: AbmSettings,
}

impl SweepSpec {
    pub fn new(axis: Axis, grid: Vec<f64>) -> Self {
        SweepSpec {
            axis,
            grid,
            network: NetworkConfig::default(),
            strain: StrainParams::default(),
            solver: SolverConfig::default(),
            replicates: 0,
            gamma_factor: None,
            abm: AbmSettings::default(),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.grid.is_empty() {
            out.push(Violation::new("grid", "[]", "grid must not be empty"));
        } else if self.grid.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new("grid", format!("{:?}", self.grid), "grid values must be finite"));
        } else {
            let up = self.grid.windows(2).all(|w| w[0] < w[1]);
            let down = self.grid.windows(2).all(|w| w[0] > w[1]);
            if !(up || down) {
                out.push(Violation::new(
                    "grid",
                    format!("{:?}", self.grid),
                    "grid must be strictly monotone",
                ));
            }
        }
        out.extend(self.network.violations().into_iter().map(|v| v.under("network")));
        out.extend(self.strain.violations().into_iter().map(|v| v.under("strain")));
        out.extend(self.solver.violations().into_iter().map(|v| v.under("solver")));
        if let Some(f) = self.gamma_factor {
            if !(f.is_finite() && f > 0.0) {
                out.push(Violation::new("gamma_factor", f, "gamma_factor must be positive"));
            }
        }
        if self.replicates > 0 {
            if self.replicates < 2 {
                out.push(Violation::new("replicates", 1, "replicates must be 0 or at least 2"));
            }
            out.extend(self.abm.violations().into_iter().map(|v| v.under("abm")));
        }
        for &v in &self.grid {
            let bad = match self.axis {
                Axis::Gamma => (!(v >= 0.0)).then_some("gamma grid values must be non-negative"),
                Axis::Q => (!(0.0..=1.0).contains(&v)).then_some("q grid values must lie in [0, 1]"),
                Axis::Alpha => (!(v > 1.0)).then_some("alpha grid values must exceed 1"),
                Axis::LambdaRatio => (!(v >= 0.0)).then_some("lambda_ratio grid values must be non-negative"),
            };
            if let Some(msg) = bad {
                out.push(Violation::new("grid", v, msg));
                break;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }
}

/// Steady-state fractions at one gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub total: f64,
    pub class_1: f64,
    pub class_2: f64,
    pub steady_state_reached: bool,
    pub abm_mean: Option<f64>,
    pub abm_se: Option<f64>,
}

/// Steady-state duped fraction against gamma, in grid order.
pub fn gamma_sweep(spec: &SweepSpec) -> Result<Vec<GammaPoint>> {
    spec.validate()?;
    if spec.axis != Axis::Gamma {
        return Err(Error::Config(format!(
            "axis = {}: gamma_sweep needs axis gamma",
            spec.axis.name()
        )));
    }
    let dist = build_ensemble(&spec.network)?;
    let network = if spec.replicates > 0 {
        Some(sample_network(&spec.network, spec.abm.n_nodes, spec.abm.seed)?)
    } else {
        None
    };
    let init = seed_initial(&dist, spec.solver.seed_eps);
    spec.grid
        .par_iter()
        .map(|&gamma| {
            let strain = spec.strain.with_gamma(gamma);
            let point = || -> Result<GammaPoint> {
                let traj = integrate(&dist, &strain, &init, &spec.solver)?;
                let (per_class, total) = duped_fraction(&dist, traj.final_state());
                let (abm_mean, abm_se) = match &network {
                    Some(net) => {
                        let (m, se) = abm_band(net, &strain, &spec.abm, spec.replicates)?;
                        (Some(m), Some(se))
                    }
                    None => (None, None),
                };
                Ok(GammaPoint {
                    gamma,
                    total,
                    class_1: per_class[0],
                    class_2: per_class[1],
                    steady_state_reached: traj.steady_state_reached,
                    abm_mean,
                    abm_se,
                })
            };
            point().map_err(|e| e.annotate(format!("gamma = {gamma}")))
        })
        .collect()
}

/// Window-averaged ensemble mean and its standard error over runs.
fn abm_band(
    network: &crate::ensemble::ExplicitNetwork,
    strain: &StrainParams,
    abm: &AbmSettings,
    replicates: usize,
) -> Result<(f64, f64)> {
    let template = AbmRun {
        network,
        strain: *strain,
        initial_duped: InitialDuped::Fraction(abm.initial_fraction),
        seed: 0,
        t_max: abm.t_max,
        sample_interval: abm.sample_interval,
    };
    // keyed by gamma so results do not depend on grid order
    let runs = run_ensemble(&template, run_seed(abm.seed, strain.gamma.to_bits()), replicates)?;
    let avg = ensemble_average(&runs)?;
    let per_run: Vec<f64> = runs
        .iter()
        .map(|r| {
            let vals: Vec<f64> = r
                .times
                .iter()
                .zip(r.totals())
                .filter(|(t, _)| **t >= abm.window_from)
                .map(|(_, v)| v)
                .collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        })
        .collect();
    let mean = avg.window_mean(abm.window_from)?;
    let (_, se) = crate::stats::mean_and_se(&per_run);
    Ok((mean, se))
}

/// Threshold with a bracket that is widened until it is valid.
pub fn threshold_auto(
    dist: &ClassDegreeDistribution,
    template: &StrainParams,
    solver: &SolverConfig,
) -> Result<f64> {
    let lmin = template.lambda_1.min(template.lambda_2);
    let lmax = template.lambda_1.max(template.lambda_2);
    if lmax <= 0.0 {
        return Err(Error::Config(
            "strain: a threshold needs a positive lambda".into(),
        ));
    }
    let mut lo = 0.5 * if lmin > 0.0 { lmin } else { lmax };
    let mut hi = 1.25 * lmax;
    let mut widenings = 0;
    while !invades(dist, &template.with_gamma(lo), solver)? {
        lo *= 0.5;
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::Bracket { lo, hi, reason: "no invasion even at small gamma".into() });
        }
    }
    while invades(dist, &template.with_gamma(hi), solver)? {
        lo = lo.max(hi);
        hi *= 2.0;
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::Bracket { lo, hi, reason: "invasion even at large gamma".into() });
        }
    }
    find_invasion_threshold(dist, template, solver, (lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub value: f64,
    pub gamma: f64,
    pub gamma_c: Option<f64>,
    /// The observable the trend is computed on.
    pub observable: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub axis: Axis,
    pub observable: String,
    pub points: Vec<TrendPoint>,
    /// Spearman correlation of the observable against the axis value;
    /// `None` when either side is constant.
    pub rank_correlation: Option<f64>,
    pub direction: Direction,
}

fn trend(axis: Axis, observable: &str, points: Vec<TrendPoint>) -> TrendReport {
    let xs: Vec<f64> = points.iter().map(|p| p.value).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.observable).collect();
    let rank_correlation = spearman(&xs, &ys);
    let direction = match rank_correlation {
        Some(r) if r > 0.0 => Direction::Increasing,
        Some(r) if r < 0.0 => Direction::Decreasing,
        _ => Direction::Flat,
    };
    TrendReport {
        axis,
        observable: observable.into(),
        points,
        rank_correlation,
        direction,
    }
}

fn point_gamma(
    spec: &SweepSpec,
    dist: &ClassDegreeDistribution,
    template: &StrainParams,
) -> Result<(f64, Option<f64>)> {
    match spec.gamma_factor {
        Some(f) => {
            let gc = threshold_auto(dist, template, &spec.solver)?;
            Ok((f * gc, Some(gc)))
        }
        None => Ok((spec.strain.gamma, None)),
    }
}

/// Top-degree-decile protection gap (least diverse minus most diverse
/// matching-strain duped probability) of the mirrored pair built from the
/// base strain, against `q` or `alpha`.
pub fn herd_correction_sweep(spec: &SweepSpec) -> Result<TrendReport> {
    spec.validate()?;
    if !matches!(spec.axis, Axis::Q | Axis::Alpha) {
        return Err(Error::Config(format!(
            "axis = {}: herd_correction_sweep needs axis q or alpha",
            spec.axis.name()
        )));
    }
    let points = spec
        .grid
        .par_iter()
        .map(|&value| {
            let point = || -> Result<TrendPoint> {
                let mut network = spec.network;
                match spec.axis {
                    Axis::Q => network.q = value,
                    _ => network.alpha = value,
                }
                let dist = build_ensemble(&network)?;
                let (gamma, gamma_c) = point_gamma(spec, &dist, &spec.strain)?;
                let pair = StrainPair {
                    strain_a: spec.strain.with_gamma(gamma),
                    strain_b: spec.strain.mirrored().with_gamma(gamma),
                };
                let (a, b) = run_pair(&dist, &pair, &spec.solver)?;
                let joint = joint_state(&dist, &a, &b)?;
                let profile = matching_profile(&dist, &joint, pair.matching());
                let gap = profile.top_decile_gap().ok_or_else(|| {
                    Error::Consistency("top degree decile has fewer than two diversity bins".into())
                })?;
                let total = a.values().iter().sum::<f64>();
                Ok(TrendPoint {
                    value,
                    gamma,
                    gamma_c,
                    observable: gap,
                    total,
                })
            };
            point().map_err(|e| e.annotate(format!("{} = {value}", spec.axis.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trend(spec.axis, "top_decile_gap", points))
}

/// Steady-state total against `lambda_2 / lambda_1`.
pub fn lambda_ratio_sweep(spec: &SweepSpec) -> Result<TrendReport> {
    spec.validate()?;
    if spec.axis != Axis::LambdaRatio {
        return Err(Error::Config(format!(
            "axis = {}: lambda_ratio_sweep needs axis lambda_ratio",
            spec.axis.name()
        )));
    }
    let dist = build_ensemble(&spec.network)?;
    let init = seed_initial(&dist, spec.solver.seed_eps);
    let points = spec
        .grid
        .par_iter()
        .map(|&value| {
            let point = || -> Result<TrendPoint> {
                let template = StrainParams {
                    lambda_2: value * spec.strain.lambda_1,
                    ..spec.strain
                };
                let (gamma, gamma_c) = point_gamma(spec, &dist, &template)?;
                let traj = integrate(&dist, &template.with_gamma(gamma), &init, &spec.solver)?;
                let (_, total) = duped_fraction(&dist, traj.final_state());
                Ok(TrendPoint {
                    value,
                    gamma,
                    gamma_c,
                    observable: total,
                    total,
                })
            };
            point().map_err(|e| e.annotate(format!("lambda_ratio = {value}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trend(spec.axis, "final_total", points))
}

/// Result of any sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepOutput {
    Gamma(Vec<GammaPoint>),
    Trend(TrendReport),
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    match spec.axis {
        Axis::Gamma => gamma_sweep(spec).map(SweepOutput::Gamma),
        Axis::Q | Axis::Alpha => herd_correction_sweep(spec).map(SweepOutput::Trend),
        Axis::LambdaRatio => lambda_ratio_sweep(spec).map(SweepOutput::Trend),
    }
}

impl SweepOutput {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        match self {
            SweepOutput::Gamma(points) => {
                w.write_record(["gamma", "total", "class_1", "class_2", "steady_state_reached", "abm_mean", "abm_se"])?;
                for p in points {
                    w.write_record([
                        p.gamma.to_string(),
                        p.total.to_string(),
                        p.class_1.to_string(),
                        p.class_2.to_string(),
                        p.steady_state_reached.to_string(),
                        opt(p.abm_mean),
                        opt(p.abm_se),
                    ])?;
                }
            }
            SweepOutput::Trend(report) => {
                w.write_record([report.axis.name(), "gamma", "gamma_c", report.observable.as_str(), "total"])?;
                for p in &report.points {
                    w.write_record([
                        p.value.to_string(),
                        p.gamma.to_string(),
                        opt(p.gamma_c),
                        p.observable.to_string(),
                        p.total.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Inputs of the three-panel figure dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    pub network: NetworkConfig,
    pub solver: SolverConfig,
    /// Class rates of the single-strain panels.
    pub lambda: [f64; 2],
    /// Class rates of strain A of the mirrored pair.
    pub pair_lambda: [f64; 2],
    /// Gamma grid of panel (a).
    pub gamma_grid: Vec<f64>,
    pub gamma_factor: f64,
    /// Overrides for the panel (b) and (c) correction rates.
    pub gamma_b: Option<f64>,
    pub gamma_c: Option<f64>,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Fig4Config {
            network: NetworkConfig::default(),
            solver: SolverConfig::default(),
            lambda: [1.0, 0.5],
            pair_lambda: [1.0, 2.0],
            gamma_grid: (1..=30).map(|k| k as f64 * 0.05).collect(),
            gamma_factor: DEFAULT_GAMMA_FACTOR,
            gamma_b: None,
            gamma_c: None,
        }
    }
}

impl Fig4Config {
    pub fn violations(&self) -> Vec<Violation> {
        let mut spec = SweepSpec::new(Axis::Gamma, self.gamma_grid.clone());
        spec.network = self.network;
        spec.solver = self.solver;
        spec.strain = StrainParams::new(self.lambda[0], self.lambda[1], 0.0);
        let mut out: Vec<Violation> = spec
            .violations()
            .into_iter()
            .map(|v| {
                if v.key == "grid" {
                    Violation { key: "gamma_grid".into(), ..v }
                } else if let Some(rest) = v.key.strip_prefix("strain.") {
                    Violation { key: format!("lambda.{rest}"), ..v }
                } else {
                    v
                }
            })
            .collect();
        for (k, &l) in self.pair_lambda.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                out.push(Violation::new(format!("pair_lambda[{k}]"), l, "rates must be finite and non-negative"));
            }
        }
        if !(self.gamma_factor.is_finite() && self.gamma_factor > 0.0) {
            out.push(Violation::new("gamma_factor", self.gamma_factor, "gamma_factor must be positive"));
        }
        for (key, g) in [("gamma_b", self.gamma_b), ("gamma_c", self.gamma_c)] {
            if let Some(g) = g {
                if !(g.is_finite() && g >= 0.0) {
                    out.push(Violation::new(key, g, format!("{key} must be finite and non-negative")));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }
}

/// What [`reproduce_fig4`] produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Manifest {
    pub config: Fig4Config,
    /// Threshold of the single-strain system; `None` when panel (b) used an
    /// override.
    pub gamma_c_single: Option<f64>,
    pub gamma_c_pair: Option<f64>,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub files: Vec<String>,
}

pub const FIG4_MANIFEST: &str = "fig4_manifest.json";

/// Writes `panel_a.csv`, `panel_b.csv`, `panel_c.csv` and the joint field of
/// the pair run into `out_dir`, plus [`FIG4_MANIFEST`].
pub fn reproduce_fig4(cfg: &Fig4Config, out_dir: &Path) -> Result<Fig4Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let dist = build_ensemble(&cfg.network)?;
    let single = StrainParams::new(cfg.lambda[0], cfg.lambda[1], 0.0);
    let pair_template = StrainParams::new(cfg.pair_lambda[0], cfg.pair_lambda[1], 0.0);

    let mut spec = SweepSpec::new(Axis::Gamma, cfg.gamma_grid.clone());
    spec.network = cfg.network;
    spec.solver = cfg.solver;
    spec.strain = single;
    let panel_a = SweepOutput::Gamma(gamma_sweep(&spec).map_err(|e| e.annotate("panel a"))?);

    let (gamma_c_single, gamma_b) = match cfg.gamma_b {
        Some(g) => (None, g),
        None => {
            let gc = threshold_auto(&dist, &single, &cfg.solver).map_err(|e| e.annotate("panel b"))?;
            (Some(gc), cfg.gamma_factor * gc)
        }
    };
    let (gamma_c_pair, gamma_c) = match cfg.gamma_c {
        Some(g) => (None, g),
        None => {
            let gc = threshold_auto(&dist, &pair_template, &cfg.solver).map_err(|e| e.annotate("panel c"))?;
            (Some(gc), cfg.gamma_factor * gc)
        }
    };

    let init = seed_initial(&dist, cfg.solver.seed_eps);
    let traj = integrate(&dist, &single.with_gamma(gamma_b), &init, &cfg.solver)
        .map_err(|e| e.annotate("panel b"))?;
    let d_band = (cfg.network.d_min, cfg.network.d_max);
    let profiles: Vec<_> = Class::ALL
        .iter()
        .map(|&c| neighborhood_profile(&dist, traj.final_state(), c, d_band))
        .collect();

    let pair = StrainPair {
        strain_a: pair_template.with_gamma(gamma_c),
        strain_b: pair_template.mirrored().with_gamma(gamma_c),
    };
    let (a, b) = run_pair(&dist, &pair, &cfg.solver).map_err(|e| e.annotate("panel c"))?;
    let joint = joint_state(&dist, &a, &b)?;
    let profile = matching_profile(&dist, &joint, pair.matching());

    let files = ["panel_a.csv", "panel_b.csv", "panel_c.csv", "panel_c_joint.csv"];
    let path = |name: &str| -> PathBuf { out_dir.join(name) };
    panel_a.write_csv(&path(files[0]))?;
    write_profiles(&profiles, &path(files[1]))?;
    profile.write_csv(&path(files[2]))?;
    joint.write_csv(&dist, &path(files[3]))?;

    let manifest = Fig4Manifest {
        config: cfg.clone(),
        gamma_c_single,
        gamma_c_pair,
        gamma_b,
        gamma_c,
        files: files.iter().map(|s| s.to_string()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    let mpath = path(FIG4_MANIFEST);
    std::fs::write(&mpath, json + "\n").map_err(|e| Error::io(mpath, e))?;
    Ok(manifest)
}

fn write_profiles(profiles: &[crate::multistrain::NeighborhoodProfile], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "d_lo", "d_hi", "diversity_bin", "mass", "probability"])?;
    for p in profiles {
        for b in &p.bins {
            w.write_record([
                p.class.label().to_string(),
                p.degree_band.0.to_string(),
                p.degree_band.1.to_string(),
                b.bin.to_string(),
                b.mass.to_string(),
                b.probability.map_or(String::new(), |x| x.to_string()),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(axis: Axis, grid: Vec<f64>) -> SweepSpec {
        let mut spec = SweepSpec::new(axis, grid);
        spec.network.d_max = 20;
        spec.solver.t_max = 150.0;
        spec.solver.steady_tol = 1e-8;
        spec
    }

    #[test]
    fn spec_violations_reported_together() {
        let mut spec = SweepSpec::new(Axis::Q, vec![0.6, 0.5, 0.7]);
        spec.network.alpha = 0.5;
        spec.solver.dt = -1.0;
        let keys: Vec<String> = spec.violations().into_iter().map(|v| v.key).collect();
        assert!(keys.contains(&"grid".to_string()));
        assert!(keys.contains(&"network.alpha".to_string()));
        assert!(keys.contains(&"solver.dt".to_string()));
        assert!(SweepSpec::new(Axis::Gamma, vec![]).validate().is_err());
        assert!(SweepSpec::new(Axis::Q, vec![1.5]).validate().is_err());
        assert!(SweepSpec::new(Axis::Gamma, vec![3.0, 2.0, 1.0]).validate().is_ok());
    }

    #[test]
    fn extinction_regime_and_order_independence() {
        let mut spec = quick(Axis::Gamma, vec![3.0, 4.0, 5.0]);
        spec.strain = StrainParams::new(1.0, 0.5, 0.0);
        let up = gamma_sweep(&spec).unwrap();
        assert!(up.iter().all(|p| p.total < 10.0 * spec.solver.seed_eps));
        spec.grid.reverse();
        let down = gamma_sweep(&spec).unwrap();
        let mut rev = down.clone();
        rev.reverse();
        assert_eq!(up, rev);
    }

    #[test]
    fn wrong_axis_rejected() {
        assert!(gamma_sweep(&quick(Axis::Q, vec![0.6])).is_err());
        assert!(herd_correction_sweep(&quick(Axis::Gamma, vec![0.6])).is_err());
    }

    #[test]
    fn auto_threshold_widens() {
        let dist = build_ensemble(&NetworkConfig { d_max: 20, ..NetworkConfig::default() }).unwrap();
        let solver = SolverConfig { t_max: 150.0, steady_tol: 1e-8, ..SolverConfig::default() };
        let gc = threshold_auto(&dist, &StrainParams::new(4.0, 4.0, 0.0), &solver).unwrap();
        assert!(gc > 4.0 * 1.25 * 0.5);
        assert!(invades(&dist, &StrainParams::new(4.0, 4.0, 0.9 * gc), &solver).unwrap());
        assert!(!invades(&dist, &StrainParams::new(4.0, 4.0, 1.1 * gc), &solver).unwrap());
    }

    #[test]
    fn lambda_ratio_trend_increases() {
        let mut spec = quick(Axis::LambdaRatio, vec![0.5, 1.0, 1.5]);
        spec.strain = StrainParams::new(1.0, 1.0, 0.8);
        let report = lambda_ratio_sweep(&spec).unwrap();
        assert_eq!(report.direction, Direction::Increasing);
        assert_eq!(report.rank_correlation, Some(1.0));
    }
}
