use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, mcc, ConfusionMatrix};
use crate::{Error, Result};

/// Credibility at or above which a difference is declared significant.
pub const SIGNIFICANCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Mcc,
    Accuracy,
}

impl Metric {
    pub fn score(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            Metric::Mcc => mcc(cm),
            Metric::Accuracy => accuracy(cm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityResult {
    pub metric: Metric,
    pub mcc_a: f64,
    pub mcc_b: f64,
    /// Observed scores under `metric` (equal to the MCCs for [`Metric::Mcc`]).
    pub score_a: f64,
    pub score_b: f64,
    /// Share of resample pairs that keep the observed ordering; ties count 1/2.
    pub credibility: f64,
    /// Share of resample pairs in which A scores higher than B; ties count 1/2.
    pub p_a_exceeds_b: f64,
    pub significant: bool,
    pub n_samples: usize,
}

/// Multinomial resample of a matrix: `N` draws over the four cells with the
/// observed proportions.
pub fn resample<R: rand::Rng>(cm: &ConfusionMatrix, rng: &mut R) -> ConfusionMatrix {
    let cells = cm.cells();
    let n = cm.total();
    let mut remaining_n = n;
    let mut remaining_w = n;
    let mut out = [0u64; 4];
    for k in 0..3 {
        if remaining_n == 0 || remaining_w == 0 {
            break;
        }
        let p = cells[k] as f64 / remaining_w as f64;
        let draw = if p >= 1.0 {
            remaining_n
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining_n, p)
                .expect("probability in (0, 1)")
                .sample(rng)
        };
        out[k] = draw;
        remaining_n -= draw;
        remaining_w -= cells[k];
    }
    out[3] = remaining_n;
    ConfusionMatrix::from_cells(out)
}

fn substream(seed: u64, iteration: u64, slot: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&slot.to_le_bytes());
    key[16..24].copy_from_slice(&iteration.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Scores of `n_samples` resamples of `cm`. Resample `k` uses its own
/// substream of `(seed, slot)`, so results do not depend on threading.
pub fn resampled_scores(
    cm: &ConfusionMatrix,
    metric: Metric,
    n_samples: usize,
    seed: u64,
    slot: u64,
) -> Vec<f64> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|k| metric.score(&resample(cm, &mut substream(seed, k, slot))))
        .collect()
}

/// `(credibility, P(a > b))` from paired resampled scores.
pub fn credibility(observed: (f64, f64), samples_a: &[f64], samples_b: &[f64]) -> (f64, f64) {
    assert_eq!(samples_a.len(), samples_b.len());
    let n = samples_a.len() as f64;
    let mut wins = 0.0;
    for (&a, &b) in samples_a.iter().zip(samples_b) {
        wins += if a > b {
            1.0
        } else if a == b {
            0.5
        } else {
            0.0
        };
    }
    let p_a = wins / n;
    let cred = if observed.0 >= observed.1 { p_a } else { 1.0 - p_a };
    (cred, p_a)
}

/// Bootstrap comparison of two matrices by MCC.
pub fn bootstrap_credibility(
    cm_a: &ConfusionMatrix,
    cm_b: &ConfusionMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<CredibilityResult> {
    bootstrap_credibility_with(cm_a, cm_b, n_samples, seed, Metric::Mcc)
}

pub fn bootstrap_credibility_with(
    cm_a: &ConfusionMatrix,
    cm_b: &ConfusionMatrix,
    n_samples: usize,
    seed: u64,
    metric: Metric,
) -> Result<CredibilityResult> {
    if cm_a.total() == 0 || cm_b.total() == 0 {
        return Err(Error::Config("confusion matrices must hold at least one response".into()));
    }
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    let samples_a = resampled_scores(cm_a, metric, n_samples, seed, 0);
    let samples_b = resampled_scores(cm_b, metric, n_samples, seed, 1);
    let observed = (metric.score(cm_a), metric.score(cm_b));
    let (cred, p_a) = credibility(observed, &samples_a, &samples_b);
    Ok(CredibilityResult {
        metric,
        mcc_a: mcc(cm_a),
        mcc_b: mcc(cm_b),
        score_a: observed.0,
        score_b: observed.1,
        credibility: cred,
        p_a_exceeds_b: p_a,
        significant: cred >= SIGNIFICANCE,
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_preserves_total() {
        let cm = ConfusionMatrix::new(7, 0, 12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r = resample(&cm, &mut rng);
            assert_eq!(r.total(), cm.total());
            assert_eq!(r.fn_, 0);
        }
    }

    #[test]
    fn resample_cell_means() {
        let cm = ConfusionMatrix::new(10, 20, 30, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sums = [0u64; 4];
        let n = 20_000;
        for _ in 0..n {
            let r = resample(&cm, &mut rng).cells();
            for k in 0..4 {
                sums[k] += r[k];
            }
        }
        for (k, &expect) in [10.0, 20.0, 30.0, 40.0].iter().enumerate() {
            let mean = sums[k] as f64 / n as f64;
            assert!((mean - expect).abs() < 0.2, "cell {k}: {mean}");
        }
    }

    #[test]
    fn complement_under_shared_streams() {
        let a = ConfusionMatrix::new(30, 20, 25, 25);
        let b = ConfusionMatrix::new(28, 22, 20, 30);
        let sa = resampled_scores(&a, Metric::Mcc, 2_000, 5, 0);
        let sb = resampled_scores(&b, Metric::Mcc, 2_000, 5, 1);
        let (_, ab) = credibility((mcc(&a), mcc(&b)), &sa, &sb);
        let (_, ba) = credibility((mcc(&b), mcc(&a)), &sb, &sa);
        assert!((ab + ba - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_of_thread_count() {
        let cm = ConfusionMatrix::new(30, 20, 25, 25);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| resampled_scores(&cm, Metric::Mcc, 500, 9, 0));
        let many = resampled_scores(&cm, Metric::Mcc, 500, 9, 0);
        assert_eq!(single, many);
    }

    #[test]
    fn rejects_empty_inputs() {
        let a = ConfusionMatrix::new(1, 1, 1, 1);
        assert!(bootstrap_credibility(&a, &ConfusionMatrix::default(), 10, 0).is_err());
        assert!(bootstrap_credibility(&a, &a, 0, 0).is_err());
    }
}
