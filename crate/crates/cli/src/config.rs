use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use misinfo_core::experiments::{AbmSettings, Fig4Config, SweepSpec};
use misinfo_core::{NetworkConfig, SolverConfig, StrainParams, Violation};

use crate::Failure;

pub trait Validate {
    fn violations(&self) -> Vec<Violation>;
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub network: NetworkConfig,
    /// Also sample an explicit network of this size.
    pub n_nodes: Option<usize>,
    pub seed: u64,
}

impl Validate for EnsembleConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> =
            self.network.violations().into_iter().map(|v| v.under("network")).collect();
        if let Some(n) = self.n_nodes {
            if n < 2 {
                out.push(Violation::new("n_nodes", n, "n_nodes must be at least 2"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub network: NetworkConfig,
    pub strain: StrainParams,
    pub solver: SolverConfig,
    /// When set, also locate the invasion threshold inside `[lo, hi]`.
    pub bracket: Option<[f64; 2]>,
}

impl Validate for MeanfieldConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> =
            self.network.violations().into_iter().map(|v| v.under("network")).collect();
        out.extend(self.strain.violations().into_iter().map(|v| v.under("strain")));
        out.extend(self.solver.violations().into_iter().map(|v| v.under("solver")));
        if let Some([lo, hi]) = self.bracket {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                out.push(Violation::new("bracket", format!("[{lo}, {hi}]"), "bracket must satisfy 0 <= lo < hi"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmConfig {
    pub network: NetworkConfig,
    pub strain: StrainParams,
    /// Mean-field settings for the comparison run.
    pub solver: SolverConfig,
    pub replicates: usize,
    pub abm: AbmSettings,
    /// Use this edge list (with `classes`) instead of sampling.
    pub edges: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    /// Allowed steady-state gap to the mean-field total.
    pub tolerance: f64,
}

impl Default for AbmConfig {
    fn default() -> Self {
        AbmConfig {
            network: NetworkConfig::default(),
            strain: StrainParams::default(),
            solver: SolverConfig::default(),
            replicates: 1,
            abm: AbmSettings::default(),
            edges: None,
            classes: None,
            tolerance: 0.05,
        }
    }
}

impl Validate for AbmConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> =
            self.network.violations().into_iter().map(|v| v.under("network")).collect();
        out.extend(self.strain.violations().into_iter().map(|v| v.under("strain")));
        out.extend(self.solver.violations().into_iter().map(|v| v.under("solver")));
        out.extend(self.abm.violations().into_iter().map(|v| v.under("abm")));
        if self.replicates == 0 {
            out.push(Violation::new("replicates", 0, "replicates must be at least 1"));
        }
        if self.edges.is_some() != self.classes.is_some() {
            out.push(Violation::new(
                "edges",
                format!("{:?}", self.edges),
                "edges and classes must be given together",
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            out.push(Violation::new("tolerance", self.tolerance, "tolerance must be non-negative"));
        }
        out
    }
}

impl Validate for SweepSpec {
    fn violations(&self) -> Vec<Violation> {
        SweepSpec::violations(self)
    }
}

impl Validate for Fig4Config {
    fn violations(&self) -> Vec<Violation> {
        Fig4Config::violations(self)
    }
}

/// Reads, parses and checks a configuration, reporting every violated
/// constraint at once. A missing path means all defaults.
pub fn validate_config<T>(path: Option<&Path>) -> Result<T, Failure>
where
    T: DeserializeOwned + Validate,
{
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::Config(vec![format!("{}: cannot read: {e}", p.display())]))?,
        None => "{}".to_string(),
    };
    let name = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Failure::Config(vec![format!("{name}: {key}: {}", e.inner())])
    })?;
    let violations = cfg.violations();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Failure::Config(violations.iter().map(ToString::to_string).collect()))
    }
}
