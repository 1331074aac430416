//! Human-classifier performance statistics.
//!
//! Participants are treated as binary classifiers of videos, with "fake" as
//! the positive class: a false negative is a participant duped by a fake.

mod bootstrap;
mod records;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bootstrap::{
    bootstrap_credibility, bootstrap_credibility_with, credibility, resample, resampled_scores,
    CredibilityResult, Metric, SIGNIFICANCE,
};
pub use records::{
    aggregate, partition_homophily, read_records, AgeBand, Attribute, Filter, Gender,
    PartitionResult, PerceivedAge, PerceivedGender, PerceivedRace, Race, ResponseRecord, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn cells(&self) -> [u64; 4] {
        [self.tp, self.fn_, self.fp, self.tn]
    }

    pub fn from_cells(c: [u64; 4]) -> Self {
        ConfusionMatrix::new(c[0], c[1], c[2], c[3])
    }

    pub fn record(&mut self, guess: Verdict, truth: Verdict) {
        match (guess, truth) {
            (Verdict::Fake, Verdict::Fake) => self.tp += 1,
            (Verdict::Real, Verdict::Fake) => self.fn_ += 1,
            (Verdict::Fake, Verdict::Real) => self.fp += 1,
            (Verdict::Real, Verdict::Real) => self.tn += 1,
        }
    }

    /// Reads a single matrix from a CSV with header `tp,fn,fp,tn`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows = rdr.deserialize::<ConfusionMatrix>();
        let cm = rows
            .next()
            .ok_or_else(|| Error::Consistency(format!("{}: no matrix row", path.display())))??;
        if rows.next().is_some() {
            return Err(Error::Consistency(format!(
                "{}: expected exactly one matrix row",
                path.display()
            )));
        }
        Ok(cm)
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp + o.tp, self.fn_ + o.fn_, self.fp + o.fp, self.tn + o.tn)
    }
}

/// Matthews correlation coefficient. Zero whenever a margin is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let [tp, fn_, fp, tn] = cm.cells().map(|c| c as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0)
}

/// Share of correct guesses; zero for an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let n = cm.total();
    if n == 0 {
        return 0.0;
    }
    (cm.tp + cm.tn) as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pearson correlation of the guess and truth indicator vectors implied
    /// by the matrix, computed from explicit vectors.
    fn pearson_oracle(cm: &ConfusionMatrix) -> f64 {
        let mut guess = Vec::new();
        let mut truth = Vec::new();
        for (n, g, t) in [
            (cm.tp, 1.0, 1.0),
            (cm.fn_, 0.0, 1.0),
            (cm.fp, 1.0, 0.0),
            (cm.tn, 0.0, 0.0),
        ] {
            for _ in 0..n {
                guess.push(g);
                truth.push(t);
            }
        }
        let n = guess.len() as f64;
        let mg = guess.iter().sum::<f64>() / n;
        let mt = truth.iter().sum::<f64>() / n;
        let cov: f64 = guess.iter().zip(&truth).map(|(g, t)| (g - mg) * (t - mt)).sum();
        let vg: f64 = guess.iter().map(|g| (g - mg).powi(2)).sum();
        let vt: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
        cov / (vg * vt).sqrt()
    }

    #[test]
    fn analytic_cases() {
        assert_eq!(mcc(&ConfusionMatrix::new(10, 0, 0, 10)), 1.0);
        assert_eq!(mcc(&ConfusionMatrix::new(0, 10, 10, 0)), -1.0);
        assert_eq!(mcc(&ConfusionMatrix::new(5, 5, 5, 5)), 0.0);
        assert_eq!(mcc(&ConfusionMatrix::new(5, 0, 5, 0)), 0.0);
    }

    #[test]
    fn accuracy_cases() {
        assert!((accuracy(&ConfusionMatrix::new(10, 5, 5, 10)) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&ConfusionMatrix::new(3, 0, 0, 9)), 1.0);
    }

    #[test]
    fn survey_scale_matrix() {
        // 1,429 duped among 4,032 videos, 49% fake
        let cm = ConfusionMatrix::new(547, 1429, 547, 1509);
        assert_eq!(cm.total(), 4032);
        assert!((accuracy(&cm) - 2056.0 / 4032.0).abs() < 1e-15);
        // 547 * 80 / sqrt(1094 * 1976 * 2056 * 2938)
        let expect = 43760.0 / (1094.0f64 * 1976.0 * 2056.0 * 2938.0).sqrt();
        assert!((mcc(&cm) - expect).abs() < 1e-15);
        assert!((mcc(&cm) - 0.0121).abs() < 5e-5);
    }

    proptest! {
        #[test]
        fn matches_pearson(tp in 1u64..60, fn_ in 1u64..60, fp in 1u64..60, tn in 1u64..60) {
            let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
            prop_assert!((mcc(&cm) - pearson_oracle(&cm)).abs() < 1e-12);
        }

        #[test]
        fn symmetries(tp in 0u64..200, fn_ in 0u64..200, fp in 0u64..200, tn in 0u64..200, k in 1u64..20) {
            let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
            let m = mcc(&cm);
            prop_assert!((-1.0..=1.0).contains(&m));
            prop_assert!((mcc(&ConfusionMatrix::new(tn, fp, fn_, tp)) - m).abs() < 1e-12);
            prop_assert!((mcc(&ConfusionMatrix::new(fp, tn, tp, fn_)) + m).abs() < 1e-12);
            let scaled = ConfusionMatrix::new(k * tp, k * fn_, k * fp, k * tn);
            prop_assert!((mcc(&scaled) - m).abs() < 1e-12);
            prop_assert!((accuracy(&scaled) - accuracy(&cm)).abs() < 1e-12);
        }
    }

    #[test]
    fn reads_matrix_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "tp,fn,fp,tn\n4,3,2,1\n").unwrap();
        assert_eq!(ConfusionMatrix::read_csv(&path).unwrap(), ConfusionMatrix::new(4, 3, 2, 1));
        std::fs::write(&path, "tp,fn,fp,tn\n").unwrap();
        assert!(ConfusionMatrix::read_csv(&path).is_err());
    }
}
