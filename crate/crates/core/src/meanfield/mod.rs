//! Heterogeneous mean-field dynamics of duping and peer correction.
//!
//! For every compartment `(i, a, b)` the duped mass `D` evolves as
//!
//! ```text
//! dD/dt = lambda_i (p - D)(a theta_{i,1} + b theta_{i,2})
//!       - gamma D (a phi_{i,1} + b phi_{i,2})
//! ```
//!
//! where `theta_{i,j}` (`phi_{i,j}`) is the probability that a link from a
//! class-`i` node to a class-`j` node ends at a duped (susceptible) node.

mod solver;
mod threshold;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Class, ClassDegreeDistribution};
use crate::error::{check, Violation};
use crate::{Error, Result};

pub use solver::{integrate, MeanfieldSummary, Trajectory};
pub use threshold::{find_invasion_threshold, invades, INVASION_FACTOR};

/// Slack allowed outside `[0, p]` before a state counts as invalid.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrainParams {
    /// Duping rate of class-1 nodes per duped neighbour.
    pub lambda_1: f64,
    /// Duping rate of class-2 nodes per duped neighbour.
    pub lambda_2: f64,
    /// Correction rate per susceptible neighbour.
    pub gamma: f64,
}

impl Default for StrainParams {
    fn default() -> Self {
        StrainParams {
            lambda_1: 1.0,
            lambda_2: 0.5,
            gamma: 0.7,
        }
    }
}

impl StrainParams {
    pub fn new(lambda_1: f64, lambda_2: f64, gamma: f64) -> Self {
        StrainParams {
            lambda_1,
            lambda_2,
            gamma,
        }
    }

    pub fn lambda(&self, class: Class) -> f64 {
        match class {
            Class::One => self.lambda_1,
            Class::Two => self.lambda_2,
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        StrainParams { gamma, ..self }
    }

    /// Exchanges the roles of the two classes.
    pub fn mirrored(self) -> Self {
        StrainParams {
            lambda_1: self.lambda_2,
            lambda_2: self.lambda_1,
            gamma: self.gamma,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (key, v) in [
            ("lambda_1", self.lambda_1),
            ("lambda_2", self.lambda_2),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(key, v, format!("{key} must be finite and non-negative")));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Base RK4 step.
    pub dt: f64,
    pub t_max: f64,
    /// Largest `|dD/dt|` at which the run is declared stationary.
    pub steady_tol: f64,
    /// Initial duped share of every compartment.
    pub seed_eps: f64,
    /// Spacing of recorded trajectory samples.
    pub sample_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 0.01,
            t_max: 500.0,
            steady_tol: 1e-10,
            seed_eps: 1e-3,
            sample_interval: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (key, v) in [
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("steady_tol", self.steady_tol),
            ("sample_interval", self.sample_interval),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(Violation::new(key, v, format!("{key} must be positive")));
            }
        }
        if !(self.seed_eps > 0.0 && self.seed_eps < 1.0) {
            out.push(Violation::new("seed_eps", self.seed_eps, "seed_eps must lie in (0, 1)"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }
}

/// Duped mass of every compartment of a distribution, in the distribution's
/// storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct DupedField {
    values: Vec<f64>,
}

impl DupedField {
    /// Checks that `values` matches the support of `dist` and that
    /// `0 <= D <= p` everywhere (up to [`CLAMP_TOL`]).
    pub fn new(dist: &ClassDegreeDistribution, values: Vec<f64>) -> Result<Self> {
        if values.len() != dist.len() {
            return Err(Error::Consistency(format!(
                "duped field has {} compartments, distribution has {}",
                values.len(),
                dist.len()
            )));
        }
        for (k, (&d, &p)) in values.iter().zip(dist.masses()).enumerate() {
            if !(d >= -CLAMP_TOL && d <= p + CLAMP_TOL) {
                let c = dist.compartments()[k];
                return Err(Error::Consistency(format!(
                    "D = {d} outside [0, {p}] at class {} ({}, {})",
                    c.class.label(),
                    c.a,
                    c.b
                )));
            }
        }
        Ok(DupedField { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        DupedField { values }
    }

    pub fn zeros(dist: &ClassDegreeDistribution) -> Self {
        DupedField {
            values: vec![0.0; dist.len()],
        }
    }

    /// `D = p`: every node duped.
    pub fn full(dist: &ClassDegreeDistribution) -> Self {
        DupedField {
            values: dist.masses().to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn ensure_matches(&self, dist: &ClassDegreeDistribution) {
        assert_eq!(
            self.values.len(),
            dist.len(),
            "duped field does not belong to this distribution"
        );
    }
}

/// Uniform seeding: `D = eps * p` in every compartment.
pub fn seed_initial(dist: &ClassDegreeDistribution, eps: f64) -> DupedField {
    DupedField {
        values: dist.masses().iter().map(|&p| eps * p).collect(),
    }
}

/// Closure probabilities; indexed `[i][j]` with `i` the class at the near
/// end of the link and `j` the class at the far end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingState {
    pub theta: [[f64; 2]; 2],
    pub phi: [[f64; 2]; 2],
}

impl MixingState {
    pub fn theta(&self, i: Class, j: Class) -> f64 {
        self.theta[i.index()][j.index()]
    }

    pub fn phi(&self, i: Class, j: Class) -> f64 {
        self.phi[i.index()][j.index()]
    }
}

pub fn mixing_probabilities(dist: &ClassDegreeDistribution, field: &DupedField) -> MixingState {
    field.ensure_matches(dist);
    Kernel::new(dist).mixing(&field.values)
}

/// Rate of change of every compartment's duped mass.
pub fn derivative(
    dist: &ClassDegreeDistribution,
    field: &DupedField,
    strain: &StrainParams,
) -> Vec<f64> {
    field.ensure_matches(dist);
    let kernel = Kernel::new(dist);
    let mut out = vec![0.0; dist.len()];
    kernel.derivative_into(&field.values, strain, &mut out);
    out
}

/// Duped share of each class and of the whole population.
pub fn duped_fraction(dist: &ClassDegreeDistribution, field: &DupedField) -> ([f64; 2], f64) {
    field.ensure_matches(dist);
    let mut per_class = [0.0; 2];
    for class in Class::ALL {
        let s: f64 = field.values[dist.class_range(class)].iter().sum();
        per_class[class.index()] = s / dist.class_mass(class);
    }
    let total = field.values.iter().sum();
    (per_class, total)
}

/// Flattened view of a distribution used by the hot loops.
pub(crate) struct Kernel {
    a: Vec<f64>,
    b: Vec<f64>,
    p: Vec<f64>,
    split: usize,
    /// `sum over class-j cells of (class-i contacts) * p`, `[i][j]`.
    link_mass: [[f64; 2]; 2],
}

impl Kernel {
    pub(crate) fn new(dist: &ClassDegreeDistribution) -> Self {
        let a: Vec<f64> = dist.compartments().iter().map(|c| c.a as f64).collect();
        let b: Vec<f64> = dist.compartments().iter().map(|c| c.b as f64).collect();
        let p = dist.masses().to_vec();
        let split = dist.class_range(Class::One).end;
        let mut link_mass = [[0.0; 2]; 2];
        for k in 0..p.len() {
            let j = (k >= split) as usize;
            link_mass[0][j] += a[k] * p[k];
            link_mass[1][j] += b[k] * p[k];
        }
        Kernel {
            a,
            b,
            p,
            split,
            link_mass,
        }
    }

    pub(crate) fn p(&self) -> &[f64] {
        &self.p
    }

    pub(crate) fn mixing(&self, d: &[f64]) -> MixingState {
        let mut duped = [[0.0; 2]; 2];
        for (j, range) in [0..self.split, self.split..d.len()].into_iter().enumerate() {
            let (sa, sb) = weighted_sums(&self.a[range.clone()], &self.b[range.clone()], &d[range]);
            duped[0][j] = sa;
            duped[1][j] = sb;
        }
        let mut theta = [[0.0; 2]; 2];
        let mut phi = [[1.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let den = self.link_mass[i][j];
                if den > 0.0 {
                    let t = (duped[i][j] / den).clamp(0.0, 1.0);
                    theta[i][j] = t;
                    phi[i][j] = 1.0 - t;
                }
            }
        }
        MixingState { theta, phi }
    }

    pub(crate) fn derivative_into(&self, d: &[f64], strain: &StrainParams, out: &mut [f64]) {
        let mix = self.mixing(d);
        for (class, range) in [(0usize, 0..self.split), (1usize, self.split..d.len())] {
            let lambda = strain.lambda(Class::from_index(class));
            let gamma = strain.gamma;
            let [t1, t2] = mix.theta[class];
            let [f1, f2] = mix.phi[class];
            let rows = self.a[range.clone()]
                .iter()
                .zip(&self.b[range.clone()])
                .zip(&self.p[range.clone()])
                .zip(&d[range.clone()]);
            for ((((&a, &b), &p), &dk), o) in rows.zip(&mut out[range]) {
                let exposure = a * t1 + b * t2;
                let correctors = a * f1 + b * f2;
                *o = lambda * (p - dk) * exposure - gamma * dk * correctors;
            }
        }
    }
}

/// `(sum a*d, sum b*d)` with independent partial sums per lane.
fn weighted_sums(a: &[f64], b: &[f64], d: &[f64]) -> (f64, f64) {
    const LANES: usize = 4;
    let mut sa = [0.0; LANES];
    let mut sb = [0.0; LANES];
    let chunks = d.len() / LANES * LANES;
    for ((ac, bc), dc) in a[..chunks]
        .chunks_exact(LANES)
        .zip(b[..chunks].chunks_exact(LANES))
        .zip(d[..chunks].chunks_exact(LANES))
    {
        for l in 0..LANES {
            sa[l] += ac[l] * dc[l];
            sb[l] += bc[l] * dc[l];
        }
    }
    let mut ta: f64 = sa.iter().sum();
    let mut tb: f64 = sb.iter().sum();
    for k in chunks..d.len() {
        ta += a[k] * d[k];
        tb += b[k] * d[k];
    }
    (ta, tb)
}
