//! Compartment distribution of the two-class mixed-membership network model.
//!
//! A node is described by its class `i` and by how many of its contacts fall
//! in class 1 (`a`) and in class 2 (`b`). Degrees follow a truncated power law
//! `d^-alpha` on `[d_min, d_max]`. Half of the nodes of each class are
//! assortative (each contact stays in-class with probability `q`), the other
//! half are bridges whose contacts ignore class.

mod sample;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check, Violation};
use crate::Result;

pub use sample::{sample_network, sample_network_with, ExplicitNetwork, SampleOptions};

/// Fraction of each class that connects class-blind.
pub const BRIDGE_FRACTION: f64 = 0.5;
/// Population share of each class.
pub const CLASS_SHARE: f64 = 0.5;

/// Demographic class. The model has exactly two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    One,
    Two,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::One, Class::Two];

    pub fn index(self) -> usize {
        match self {
            Class::One => 0,
            Class::Two => 1,
        }
    }

    pub fn from_index(idx: usize) -> Class {
        if idx == 0 {
            Class::One
        } else {
            Class::Two
        }
    }

    /// Label as used in files: 1 or 2.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Option<Class> {
        match label {
            1 => Some(Class::One),
            2 => Some(Class::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Class {
        match self {
            Class::One => Class::Two,
            Class::Two => Class::One,
        }
    }
}

impl Serialize for Class {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.label())
    }
}

impl<'de> Deserialize<'de> for Class {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let label = u8::deserialize(d)?;
        Class::from_label(label)
            .ok_or_else(|| serde::de::Error::custom(format!("class must be 1 or 2, got {label}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Power-law exponent of the total degree.
    pub alpha: f64,
    /// In-class contact propensity of assortative nodes.
    pub q: f64,
    pub d_min: u32,
    pub d_max: u32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            alpha: 2.5,
            q: 0.8,
            d_min: 2,
            d_max: 100,
        }
    }
}

impl NetworkConfig {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            out.push(Violation::new("alpha", self.alpha, "alpha must exceed 1"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            out.push(Violation::new("q", self.q, "q must lie in [0, 1]"));
        }
        if self.d_min < 1 {
            out.push(Violation::new("d_min", self.d_min, "d_min must be at least 1"));
        }
        if self.d_max < self.d_min {
            out.push(Violation::new(
                "d_max",
                self.d_max,
                format!("d_max must be at least d_min ({})", self.d_min),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }
}

/// A `(class, a, b)` cell: class-`class` nodes with `a` class-1 and `b`
/// class-2 contacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Compartment {
    pub class: Class,
    pub a: u32,
    pub b: u32,
}

impl Compartment {
    pub fn degree(&self) -> u32 {
        self.a + self.b
    }

    /// Number of contacts in class `j`.
    pub fn contacts_in(&self, j: Class) -> u32 {
        match j {
            Class::One => self.a,
            Class::Two => self.b,
        }
    }

    pub fn same_class_contacts(&self) -> u32 {
        self.contacts_in(self.class)
    }

    /// Share of contacts in the node's own class; zero-degree cells count as 0.
    pub fn same_class_fraction(&self) -> f64 {
        let d = self.degree();
        if d == 0 {
            0.0
        } else {
            self.same_class_contacts() as f64 / d as f64
        }
    }
}

/// Probability mass over every `(class, a, b)` compartment with
/// `d_min <= a + b <= d_max`.
///
/// Compartments are stored class 1 first, then class 2; within a class by
/// degree, then by ascending `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDegreeDistribution {
    config: NetworkConfig,
    compartments: Vec<Compartment>,
    masses: Vec<f64>,
    per_class: usize,
}

/// Builds the compartment distribution for a validated configuration.
pub fn build_ensemble(cfg: &NetworkConfig) -> Result<ClassDegreeDistribution> {
    cfg.validate()?;
    Ok(build_unchecked(cfg))
}

/// Evaluates the ensemble formula without checking `alpha > 1`. Callers must
/// still guarantee `d_min <= d_max`.
pub(crate) fn build_unchecked(cfg: &NetworkConfig) -> ClassDegreeDistribution {
    let mut compartments = Vec::new();
    let mut raw = Vec::new();
    for d in cfg.d_min..=cfg.d_max {
        let weight = (1.0 - CLASS_SHARE) * (d as f64).powf(-cfg.alpha);
        let half_d = 0.5f64.powi(d as i32);
        let mut binom = 1.0f64;
        for a in 0..=d {
            if a > 0 {
                binom *= (d - a + 1) as f64 / a as f64;
            }
            let b = d - a;
            let assortative = binom * cfg.q.powi(a as i32) * (1.0 - cfg.q).powi(b as i32);
            let bridge = binom * half_d;
            let value = weight
                * ((1.0 - BRIDGE_FRACTION) * assortative + BRIDGE_FRACTION * bridge);
            compartments.push(Compartment {
                class: Class::One,
                a,
                b,
            });
            raw.push(value);
        }
    }
    let per_class = compartments.len();
    // Class 2 is class 1 with the contact labels exchanged.
    for k in 0..per_class {
        let c = compartments[k];
        let mirror = per_class_index(cfg.d_min, c.b, c.a);
        compartments.push(Compartment {
            class: Class::Two,
            a: c.a,
            b: c.b,
        });
        raw.push(raw[mirror]);
    }
    let total: f64 = raw.iter().sum();
    let masses = raw.into_iter().map(|v| v / total).collect();
    ClassDegreeDistribution {
        config: *cfg,
        compartments,
        masses,
        per_class,
    }
}

fn per_class_index(d_min: u32, a: u32, b: u32) -> usize {
    let d = a + b;
    // cells for degrees d_min..d each hold (d' + 1) entries
    let before = (d_min..d).map(|x| x as usize + 1).sum::<usize>();
    before + a as usize
}

impl ClassDegreeDistribution {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.compartments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compartments.is_empty()
    }

    pub fn compartments(&self) -> &[Compartment] {
        &self.compartments
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Compartment, f64)> + '_ {
        self.compartments.iter().zip(self.masses.iter().copied())
    }

    /// Position of `(class, a, b)` in the storage order, if it is in the support.
    pub fn index_of(&self, class: Class, a: u32, b: u32) -> Option<usize> {
        let d = a + b;
        if d < self.config.d_min || d > self.config.d_max {
            return None;
        }
        Some(class.index() * self.per_class + per_class_index(self.config.d_min, a, b))
    }

    /// Mass of `(class, a, b)`; zero outside the support.
    pub fn mass(&self, class: Class, a: u32, b: u32) -> f64 {
        self.index_of(class, a, b).map_or(0.0, |k| self.masses[k])
    }

    /// Index range holding the compartments of one class.
    pub fn class_range(&self, class: Class) -> std::ops::Range<usize> {
        let start = class.index() * self.per_class;
        start..start + self.per_class
    }

    pub fn class_mass(&self, class: Class) -> f64 {
        self.masses[self.class_range(class)].iter().sum()
    }
}

/// Total-degree marginal `P(d)` over the support.
pub fn degree_marginal(dist: &ClassDegreeDistribution) -> BTreeMap<u32, f64> {
    let mut out = BTreeMap::new();
    for (c, m) in dist.iter() {
        *out.entry(c.degree()).or_insert(0.0) += m;
    }
    out
}

/// Mean degree and mean degree of a randomly chosen neighbour, `E[d^2]/E[d]`.
pub fn mean_excess_degree(dist: &ClassDegreeDistribution) -> (f64, f64) {
    let marginal = degree_marginal(dist);
    let (m1, m2) = marginal.iter().fold((0.0, 0.0), |(m1, m2), (&d, &p)| {
        let d = d as f64;
        (m1 + d * p, m2 + d * d * p)
    });
    (m1, m2 / m1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, q: f64, d_min: u32, d_max: u32) -> NetworkConfig {
        NetworkConfig {
            alpha,
            q,
            d_min,
            d_max,
        }
    }

    #[test]
    fn hand_evaluated_small_support() {
        // alpha = 0, d in {1, 2}, Q = 1. Raw class-1 weights:
        // (1,0): 1/2 [1/2 + 1/4] = 3/8, (0,1): 1/8, (2,0): 5/16,
        // (1,1): 1/8, (0,2): 1/16. Class 1 sums to 1, both classes to 2.
        let dist = build_unchecked(&cfg(0.0, 1.0, 1, 2));
        let expect = [
            ((1, 0), 3.0 / 16.0),
            ((0, 1), 1.0 / 16.0),
            ((2, 0), 5.0 / 32.0),
            ((1, 1), 1.0 / 16.0),
            ((0, 2), 1.0 / 32.0),
        ];
        for ((a, b), p) in expect {
            assert!((dist.mass(Class::One, a, b) - p).abs() < 1e-15, "({a},{b})");
            assert!((dist.mass(Class::Two, b, a) - p).abs() < 1e-15, "({b},{a})");
        }
    }

    #[test]
    fn normalized_and_class_balanced() {
        let dist = build_ensemble(&cfg(2.3, 0.7, 2, 60)).unwrap();
        let total: f64 = dist.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((dist.class_mass(Class::One) - 0.5).abs() < 1e-12);
        assert!((dist.class_mass(Class::Two) - 0.5).abs() < 1e-12);
        assert!(dist.masses().iter().all(|&m| m >= 0.0));
        assert!(dist
            .compartments()
            .iter()
            .all(|c| (2..=60).contains(&c.degree())));
    }

    #[test]
    fn label_exchange_is_exact() {
        let dist = build_ensemble(&cfg(2.5, 0.85, 2, 40)).unwrap();
        for (c, m) in dist.iter().filter(|(c, _)| c.class == Class::One) {
            assert_eq!(m, dist.mass(Class::Two, c.b, c.a));
        }
    }

    #[test]
    fn half_q_collapses_node_roles() {
        let dist = build_ensemble(&cfg(2.5, 0.5, 2, 10)).unwrap();
        // mass / (d^-alpha C(d,a) 2^-d) must be constant
        let mut ratios = Vec::new();
        for (c, m) in dist.iter() {
            let d = c.degree();
            let binom = (0..c.a).fold(1.0, |acc, k| acc * (d - k) as f64 / (k + 1) as f64);
            ratios.push(m / ((d as f64).powf(-2.5) * binom * 0.5f64.powi(d as i32)));
        }
        let r0 = ratios[0];
        assert!(ratios.iter().all(|r| (r - r0).abs() < 1e-12 * r0));
    }

    #[test]
    fn cross_class_stub_balance() {
        let dist = build_ensemble(&cfg(2.1, 0.9, 2, 100)).unwrap();
        let mut from_one = 0.0;
        let mut from_two = 0.0;
        for (c, m) in dist.iter() {
            match c.class {
                Class::One => from_one += c.b as f64 * m,
                Class::Two => from_two += c.a as f64 * m,
            }
        }
        assert!((from_one - from_two).abs() < 1e-12);
    }

    #[test]
    fn marginal_follows_power_law() {
        let dist = build_ensemble(&cfg(2.0, 0.8, 1, 2)).unwrap();
        let m = degree_marginal(&dist);
        assert!((m[&1] / m[&2] - 4.0).abs() < 1e-12);
        assert!((m.values().sum::<f64>() - 1.0).abs() < 1e-12);

        let dist = build_ensemble(&cfg(2.7, 0.6, 3, 50)).unwrap();
        let m = degree_marginal(&dist);
        let z: f64 = (3..=50).map(|d| (d as f64).powf(-2.7)).sum();
        for (d, p) in m {
            assert!((p - (d as f64).powf(-2.7) / z).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_for_regular_support() {
        let dist = build_ensemble(&cfg(2.5, 0.8, 7, 7)).unwrap();
        let m = degree_marginal(&dist);
        assert_eq!(m.len(), 1);
        assert!((m[&7] - 1.0).abs() < 1e-12);
        let (mean, nbr) = mean_excess_degree(&dist);
        assert!((mean - 7.0).abs() < 1e-12);
        assert!((mean - nbr).abs() < 1e-12);
    }

    #[test]
    fn friendship_paradox_heavy_tail() {
        let dist = build_ensemble(&cfg(2.5, 0.8, 2, 100)).unwrap();
        let (mean, nbr) = mean_excess_degree(&dist);
        // direct moments over d^-2.5 on [2, 100]
        let z: f64 = (2..=100).map(|d| (d as f64).powf(-2.5)).sum();
        let m1: f64 = (2..=100).map(|d| (d as f64).powf(-1.5)).sum::<f64>() / z;
        let m2: f64 = (2..=100).map(|d| (d as f64).powf(-0.5)).sum::<f64>() / z;
        assert!((mean - m1).abs() < 1e-12);
        assert!((nbr - m2 / m1).abs() < 1e-10);
        assert!(nbr > mean);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(build_ensemble(&cfg(2.5, 0.8, 5, 4)).is_err());
        assert!(build_ensemble(&cfg(0.5, 0.8, 2, 4)).is_err());
        let v = cfg(0.5, 1.5, 2, 4).violations();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].constraint, "alpha must exceed 1");
        assert_eq!(v[1].key, "q");
    }

    #[test]
    fn index_of_round_trips() {
        let dist = build_ensemble(&cfg(2.5, 0.8, 2, 12)).unwrap();
        for (k, c) in dist.compartments().iter().enumerate() {
            assert_eq!(dist.index_of(c.class, c.a, c.b), Some(k));
        }
        assert_eq!(dist.index_of(Class::One, 1, 0), None);
        assert_eq!(dist.index_of(Class::Two, 13, 0), None);
    }
}
