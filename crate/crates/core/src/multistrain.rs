//! Independent strains composed into joint node states.
//!
//! Strains do not interact, so the probability that a node of a compartment
//! is duped by both strains is the product of the per-strain probabilities
//! `q = D / p`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{degree_marginal, Class, ClassDegreeDistribution, Compartment};
use crate::meanfield::{integrate, seed_initial, DupedField, SolverConfig, StrainParams};
use crate::{Error, Result};

pub const DIVERSITY_BINS: usize = 10;
pub const DEGREE_DECILES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrainId {
    A,
    B,
}

/// Two strains with mirrored biases. By convention strain A targets class 2
/// (`lambda_2 > lambda_1`) and strain B targets class 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainPair {
    pub strain_a: StrainParams,
    pub strain_b: StrainParams,
}

impl StrainPair {
    /// Strain A with `lambda = (low, high)`, strain B its mirror, shared gamma.
    pub fn mirrored(low: f64, high: f64, gamma: f64) -> Self {
        let strain_a = StrainParams::new(low, high, gamma);
        StrainPair {
            strain_a,
            strain_b: strain_a.mirrored(),
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        StrainPair {
            strain_a: self.strain_a.with_gamma(gamma),
            strain_b: self.strain_b.with_gamma(gamma),
        }
    }

    pub fn get(&self, id: StrainId) -> &StrainParams {
        match id {
            StrainId::A => &self.strain_a,
            StrainId::B => &self.strain_b,
        }
    }

    /// The strain each class is most susceptible to, relative to the other
    /// class. Indexed by class.
    pub fn matching(&self) -> [StrainId; 2] {
        let a_targets_two = self.strain_a.lambda_2 > self.strain_a.lambda_1;
        if a_targets_two {
            [StrainId::B, StrainId::A]
        } else {
            [StrainId::A, StrainId::B]
        }
    }
}

/// `(none, only A, only B, both)` for every compartment.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStrainField {
    pub states: Vec<[f64; 4]>,
}

pub const NONE: usize = 0;
pub const ONLY_A: usize = 1;
pub const ONLY_B: usize = 2;
pub const BOTH: usize = 3;

fn dupe_probability(d: f64, p: f64) -> f64 {
    if p > 0.0 {
        (d / p).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn joint_state(
    dist: &ClassDegreeDistribution,
    duped_a: &DupedField,
    duped_b: &DupedField,
) -> Result<JointStrainField> {
    if duped_a.len() != dist.len() || duped_b.len() != dist.len() {
        return Err(Error::Consistency(format!(
            "strain fields have {} and {} compartments, distribution has {}",
            duped_a.len(),
            duped_b.len(),
            dist.len()
        )));
    }
    let states = dist
        .masses()
        .iter()
        .zip(duped_a.values().iter().zip(duped_b.values()))
        .map(|(&p, (&da, &db))| {
            if p <= 0.0 {
                return [1.0, 0.0, 0.0, 0.0];
            }
            let qa = dupe_probability(da, p);
            let qb = dupe_probability(db, p);
            [
                (1.0 - qa) * (1.0 - qb),
                qa * (1.0 - qb),
                (1.0 - qa) * qb,
                qa * qb,
            ]
        })
        .collect();
    Ok(JointStrainField { states })
}

impl JointStrainField {
    /// Probability of being duped by `strain`, whatever the other does.
    pub fn duped_by(&self, k: usize, strain: StrainId) -> f64 {
        let s = &self.states[k];
        match strain {
            StrainId::A => s[ONLY_A] + s[BOTH],
            StrainId::B => s[ONLY_B] + s[BOTH],
        }
    }

    pub fn duped_by_either(&self, k: usize) -> f64 {
        1.0 - self.states[k][NONE]
    }

    pub fn write_csv(&self, dist: &ClassDegreeDistribution, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "a", "b", "p_none", "p_only_a", "p_only_b", "p_both"])?;
        for ((c, _), s) in dist.iter().zip(&self.states) {
            w.write_record([
                c.class.label().to_string(),
                c.a.to_string(),
                c.b.to_string(),
                s[NONE].to_string(),
                s[ONLY_A].to_string(),
                s[ONLY_B].to_string(),
                s[BOTH].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Same-class neighbour fraction mapped to one of [`DIVERSITY_BINS`]
/// equal-width bins; bin 0 is the most mixed towards the other class.
pub fn diversity_bin(c: &Compartment) -> usize {
    let f = c.same_class_fraction();
    ((f * DIVERSITY_BINS as f64).floor() as usize).min(DIVERSITY_BINS - 1)
}

/// Degree decile of every degree in the support, by marginal mass: a degree
/// belongs to the decile in which its share of the cumulative distribution
/// starts.
pub fn degree_deciles(dist: &ClassDegreeDistribution) -> std::collections::BTreeMap<u32, usize> {
    let mut cum = 0.0;
    degree_marginal(dist)
        .into_iter()
        .map(|(d, p)| {
            let decile = ((cum * DEGREE_DECILES as f64 + 1e-12).floor() as usize).min(DEGREE_DECILES - 1);
            cum += p;
            (d, decile)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileBin {
    pub bin: usize,
    pub mass: f64,
    /// Mass-weighted duped probability; `None` for empty bins.
    pub probability: Option<f64>,
}

/// Duped probability against same-class neighbour fraction for one class
/// within a degree band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborhoodProfile {
    pub class: Class,
    pub degree_band: (u32, u32),
    pub bins: Vec<ProfileBin>,
}

impl NeighborhoodProfile {
    /// True when no compartment of the class fell in the band.
    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|b| b.probability.is_none())
    }

    /// `(bin, probability)` for the non-empty bins in ascending order.
    pub fn curve(&self) -> Vec<(usize, f64)> {
        self.bins
            .iter()
            .filter_map(|b| b.probability.map(|p| (b.bin, p)))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["class", "d_lo", "d_hi", "diversity_bin", "mass", "probability"])?;
        for b in &self.bins {
            w.write_record([
                self.class.label().to_string(),
                self.degree_band.0.to_string(),
                self.degree_band.1.to_string(),
                b.bin.to_string(),
                b.mass.to_string(),
                b.probability.map_or(String::new(), |p| p.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn neighborhood_profile(
    dist: &ClassDegreeDistribution,
    field: &DupedField,
    class: Class,
    degree_band: (u32, u32),
) -> NeighborhoodProfile {
    let mut mass = [0.0; DIVERSITY_BINS];
    let mut duped = [0.0; DIVERSITY_BINS];
    let (lo, hi) = degree_band;
    for ((c, p), &d) in dist.iter().zip(field.values()) {
        if c.class != class || c.degree() < lo || c.degree() > hi {
            continue;
        }
        let bin = diversity_bin(c);
        mass[bin] += p;
        duped[bin] += d;
    }
    NeighborhoodProfile {
        class,
        degree_band,
        bins: (0..DIVERSITY_BINS)
            .map(|bin| ProfileBin {
                bin,
                mass: mass[bin],
                probability: (mass[bin] > 0.0).then(|| (duped[bin] / mass[bin]).clamp(0.0, 1.0)),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingCell {
    pub class: Class,
    pub degree_decile: usize,
    pub diversity_bin: usize,
    pub mass: f64,
    /// Duped by the strain matching the node's class.
    pub probability: Option<f64>,
    /// Duped by at least one strain.
    pub probability_either: Option<f64>,
}

/// Matching-strain duped probability on a class x degree decile x diversity
/// bin grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingProfile {
    pub cells: Vec<MatchingCell>,
}

pub fn matching_profile(
    dist: &ClassDegreeDistribution,
    joint: &JointStrainField,
    matching: [StrainId; 2],
) -> MatchingProfile {
    let deciles = degree_deciles(dist);
    let n = 2 * DEGREE_DECILES * DIVERSITY_BINS;
    let cell_of = |class: Class, dec: usize, bin: usize| {
        (class.index() * DEGREE_DECILES + dec) * DIVERSITY_BINS + bin
    };
    let mut mass = vec![0.0; n];
    let mut matched = vec![0.0; n];
    let mut either = vec![0.0; n];
    for (k, (c, p)) in dist.iter().enumerate() {
        let idx = cell_of(c.class, deciles[&c.degree()], diversity_bin(c));
        mass[idx] += p;
        matched[idx] += p * joint.duped_by(k, matching[c.class.index()]);
        either[idx] += p * joint.duped_by_either(k);
    }
    let mut cells = Vec::with_capacity(n);
    for class in Class::ALL {
        for dec in 0..DEGREE_DECILES {
            for bin in 0..DIVERSITY_BINS {
                let idx = cell_of(class, dec, bin);
                let m = mass[idx];
                cells.push(MatchingCell {
                    class,
                    degree_decile: dec,
                    diversity_bin: bin,
                    mass: m,
                    probability: (m > 0.0).then(|| matched[idx] / m),
                    probability_either: (m > 0.0).then(|| either[idx] / m),
                });
            }
        }
    }
    MatchingProfile { cells }
}

impl MatchingProfile {
    pub fn cell(&self, class: Class, decile: usize, bin: usize) -> &MatchingCell {
        &self.cells[(class.index() * DEGREE_DECILES + decile) * DIVERSITY_BINS + bin]
    }

    /// Deciles holding any mass, ascending.
    pub fn populated_deciles(&self, class: Class) -> Vec<usize> {
        (0..DEGREE_DECILES)
            .filter(|&dec| (0..DIVERSITY_BINS).any(|bin| self.cell(class, dec, bin).mass > 0.0))
            .collect()
    }

    /// `(most diverse, least diverse)` matching probabilities of one decile:
    /// the lowest and the highest populated same-class-fraction bins.
    pub fn diversity_extremes(&self, class: Class, decile: usize) -> Option<(f64, f64)> {
        let populated: Vec<f64> = (0..DIVERSITY_BINS)
            .filter_map(|bin| self.cell(class, decile, bin).probability)
            .collect();
        if populated.len() < 2 {
            return None;
        }
        Some((populated[0], *populated.last().unwrap()))
    }

    /// Protection gap of the top populated degree decile, averaged over the
    /// two classes: least-diverse minus most-diverse matching probability.
    pub fn top_decile_gap(&self) -> Option<f64> {
        let mut gaps = Vec::new();
        for class in Class::ALL {
            let top = *self.populated_deciles(class).last()?;
            let (diverse, assortative) = self.diversity_extremes(class, top)?;
            gaps.push(assortative - diverse);
        }
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "class",
            "degree_decile",
            "diversity_bin",
            "mass",
            "probability",
            "probability_either",
        ])?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |p| p.to_string());
        for c in &self.cells {
            w.write_record([
                c.class.label().to_string(),
                c.degree_decile.to_string(),
                c.diversity_bin.to_string(),
                c.mass.to_string(),
                fmt(c.probability),
                fmt(c.probability_either),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Integrates both strains of a pair from the uniform seed.
pub fn run_pair(
    dist: &ClassDegreeDistribution,
    pair: &StrainPair,
    solver: &SolverConfig,
) -> Result<(DupedField, DupedField)> {
    let init = seed_initial(dist, solver.seed_eps);
    let a = integrate(dist, &pair.strain_a, &init, solver)
        .map_err(|e| e.annotate("strain A"))?;
    let b = integrate(dist, &pair.strain_b, &init, solver)
        .map_err(|e| e.annotate("strain B"))?;
    Ok((a.final_state().clone(), b.final_state().clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_ensemble, NetworkConfig};

    fn small() -> ClassDegreeDistribution {
        build_ensemble(&NetworkConfig {
            d_max: 30,
            ..NetworkConfig::default()
        })
        .unwrap()
    }

    fn scaled(dist: &ClassDegreeDistribution, c: f64) -> DupedField {
        seed_initial(dist, c)
    }

    #[test]
    fn independent_composition() {
        let dist = small();
        let joint = joint_state(&dist, &scaled(&dist, 0.5), &scaled(&dist, 0.5)).unwrap();
        for s in &joint.states {
            for v in s {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
        let joint = joint_state(&dist, &scaled(&dist, 0.3), &scaled(&dist, 0.6)).unwrap();
        for (k, s) in joint.states.iter().enumerate() {
            assert!((s[BOTH] - 0.18).abs() < 1e-12);
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((joint.duped_by(k, StrainId::A) - 0.3).abs() < 1e-12);
        }
        let joint = joint_state(&dist, &DupedField::zeros(&dist), &scaled(&dist, 0.6)).unwrap();
        assert!(joint.states.iter().all(|s| s[ONLY_A] == 0.0 && s[BOTH] == 0.0));
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let dist = small();
        let other = build_ensemble(&NetworkConfig {
            d_max: 20,
            ..NetworkConfig::default()
        })
        .unwrap();
        let err = joint_state(&dist, &DupedField::zeros(&other), &DupedField::zeros(&dist));
        assert!(matches!(err, Err(Error::Consistency(_))));
    }

    #[test]
    fn flat_profiles_for_uniform_fields() {
        let dist = small();
        for (field, level) in [(DupedField::full(&dist), 1.0), (scaled(&dist, 0.37), 0.37)] {
            let prof = neighborhood_profile(&dist, &field, Class::One, (2, 30));
            assert!(!prof.is_empty());
            assert_eq!(prof.curve().len(), DIVERSITY_BINS);
            for (_, p) in prof.curve() {
                assert!((p - level).abs() < 1e-12);
            }
        }
        let empty = neighborhood_profile(&dist, &DupedField::full(&dist), Class::One, (50, 60));
        assert!(empty.is_empty());
    }

    #[test]
    fn matching_pairs_follow_targets() {
        let pair = StrainPair::mirrored(1.0, 2.0, 1.0);
        assert_eq!(pair.matching(), [StrainId::B, StrainId::A]);
        assert_eq!(pair.strain_b.lambda_1, 2.0);
    }

    #[test]
    fn symmetric_joint_gives_equal_matching_and_mismatching() {
        let dist = small();
        let f = scaled(&dist, 0.42);
        let joint = joint_state(&dist, &f, &f).unwrap();
        let m = matching_profile(&dist, &joint, [StrainId::B, StrainId::A]);
        let mm = matching_profile(&dist, &joint, [StrainId::A, StrainId::B]);
        assert_eq!(m, mm);
        let full = joint_state(&dist, &f, &DupedField::full(&dist)).unwrap();
        let m = matching_profile(&dist, &full, [StrainId::B, StrainId::B]);
        assert!(m
            .cells
            .iter()
            .filter_map(|c| c.probability)
            .all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn deciles_cover_the_support() {
        let dist = small();
        let dec = degree_deciles(&dist);
        assert_eq!(dec[&2], 0);
        assert!(dec.values().zip(dec.values().skip(1)).all(|(a, b)| a <= b));
        assert_eq!(*dec.values().last().unwrap(), DEGREE_DECILES - 1);
    }
}
