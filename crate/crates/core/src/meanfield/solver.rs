use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{duped_fraction, DupedField, Kernel, SolverConfig, StrainParams, CLAMP_TOL};
use crate::ensemble::ClassDegreeDistribution;
use crate::{Error, Result};

/// Maximum number of times the step may be halved.
const MAX_HALVINGS: u32 = 12;

/// Sampled states of one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DupedField>,
    pub steady_state_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanfieldSummary {
    pub gamma: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub final_total: f64,
    pub final_class_1: f64,
    pub final_class_2: f64,
    pub steady_state_reached: bool,
}

/// Integrates the mean-field system with fixed-step RK4.
///
/// A step whose result leaves `[0, p]` is retried with half the step size,
/// and the smaller step is kept for the rest of the run (at most
/// [`MAX_HALVINGS`] halvings); residual excursions are clamped. Stops once
/// `max |dD/dt| < steady_tol` or at `t_max`. States are recorded at t = 0,
/// every `sample_interval`, and at the stopping time.
pub fn integrate(
    dist: &ClassDegreeDistribution,
    strain: &StrainParams,
    init: &DupedField,
    solver: &SolverConfig,
) -> Result<Trajectory> {
    strain.validate()?;
    solver.validate()?;
    if init.len() != dist.len() {
        return Err(Error::Consistency(
            "initial field does not belong to the distribution".into(),
        ));
    }
    let kernel = Kernel::new(dist);
    let mut rk = Rk4::new(&kernel, strain);
    let mut y = init.values().to_vec();
    clamp(&mut y, kernel.p());

    // time is kept as an integer count of the finest step so sample times
    // stay exact after halving
    let fine = 1u64 << MAX_HALVINGS;
    let horizon = (solver.t_max / solver.dt).round().max(1.0) as u64 * fine;
    let sample_every = (solver.sample_interval / solver.dt).round().max(1.0) as u64 * fine;
    let tick = solver.dt / fine as f64;

    let mut times = vec![0.0];
    let mut states = vec![DupedField::from_raw(y.clone())];
    let mut steady = false;
    let mut rate = vec![0.0; y.len()];
    let mut now = 0u64;
    let mut halvings = 0u32;
    let mut next_sample = sample_every;

    loop {
        kernel.derivative_into(&y, strain, &mut rate);
        if max_abs(&rate) < solver.steady_tol {
            steady = true;
            break;
        }
        if now >= horizon {
            break;
        }
        let stride = (fine >> halvings).min(next_sample - now);
        let h = stride as f64 * tick;
        if !rk.step(&y, h, &rate) && halvings < MAX_HALVINGS && stride > 1 {
            halvings += 1;
            continue;
        }
        rk.commit(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                time: now as f64 * tick,
            });
        }
        now += stride;
        if now == next_sample {
            times.push(now as f64 * tick);
            states.push(DupedField::from_raw(y.clone()));
            next_sample += sample_every;
        }
    }

    let t_end = now as f64 * tick;
    if *times.last().unwrap() != t_end {
        times.push(t_end);
        states.push(DupedField::from_raw(y));
    }
    Ok(Trajectory {
        times,
        states,
        steady_state_reached: steady,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn clamp(y: &mut [f64], p: &[f64]) {
    for (v, &cap) in y.iter_mut().zip(p) {
        *v = v.clamp(0.0, cap);
    }
}

struct Rk4<'a> {
    kernel: &'a Kernel,
    strain: &'a StrainParams,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(kernel: &'a Kernel, strain: &'a StrainParams) -> Self {
        let n = kernel.p().len();
        Rk4 {
            kernel,
            strain,
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Computes the RK4 update of `y` over `h` (given `k1 = f(y)`) into the
    /// scratch buffer. Returns false when the result leaves `[0, p]`.
    fn step(&mut self, y: &[f64], h: f64, k1: &[f64]) -> bool {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.kernel.derivative_into(&self.tmp, self.strain, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        self.kernel.derivative_into(&self.tmp, self.strain, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        self.kernel.derivative_into(&self.tmp, self.strain, &mut self.k4);
        let p = self.kernel.p();
        let mut inside = true;
        for i in 0..n {
            let v = y[i] + h / 6.0 * (k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
            inside &= v >= -CLAMP_TOL && v <= p[i] + CLAMP_TOL;
            self.tmp[i] = v;
        }
        inside
    }

    fn commit(&self, y: &mut [f64]) {
        y.copy_from_slice(&self.tmp);
        clamp(y, self.kernel.p());
    }
}

impl Trajectory {
    pub fn final_state(&self) -> &DupedField {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    /// Total duped fraction at every sample.
    pub fn totals(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.values().iter().sum()).collect()
    }

    /// Total duped fraction at sample time `t`. Past the end of a run that
    /// reached steady state the final value is returned; any other time
    /// that is not a sample is an error.
    pub fn total_at(&self, t: f64) -> Result<f64> {
        let tol = 1e-9 * t.abs().max(1.0);
        if let Some(k) = self.times.iter().position(|&s| (s - t).abs() <= tol) {
            return Ok(self.states[k].values().iter().sum());
        }
        if self.steady_state_reached && t > self.final_time() {
            return Ok(self.final_state().values().iter().sum());
        }
        Err(Error::Consistency(format!(
            "mean-field trajectory has no sample at t = {t}"
        )))
    }

    pub fn summary(&self, dist: &ClassDegreeDistribution, strain: &StrainParams) -> MeanfieldSummary {
        let (per_class, total) = duped_fraction(dist, self.final_state());
        MeanfieldSummary {
            gamma: strain.gamma,
            lambda_1: strain.lambda_1,
            lambda_2: strain.lambda_2,
            final_total: total,
            final_class_1: per_class[0],
            final_class_2: per_class[1],
            steady_state_reached: self.steady_state_reached,
        }
    }

    /// Writes `t,class,a,b,p,D` rows for every sample and compartment.
    pub fn write_csv(&self, dist: &ClassDegreeDistribution, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "class", "a", "b", "p", "D"])?;
        for (t, state) in self.times.iter().zip(&self.states) {
            for ((c, p), d) in dist.iter().zip(state.values()) {
                w.write_record([
                    t.to_string(),
                    c.class.label().to_string(),
                    c.a.to_string(),
                    c.b.to_string(),
                    p.to_string(),
                    d.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_ensemble, Class, NetworkConfig};
    use crate::meanfield::{derivative, seed_initial};

    fn dist(q: f64) -> ClassDegreeDistribution {
        build_ensemble(&NetworkConfig {
            alpha: 2.5,
            q,
            d_min: 2,
            d_max: 40,
        })
        .unwrap()
    }

    fn quick() -> SolverConfig {
        SolverConfig {
            t_max: 200.0,
            sample_interval: 1.0,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn no_duping_decays_to_free_state() {
        let dist = dist(0.8);
        let init = seed_initial(&dist, 0.3);
        let traj = integrate(&dist, &StrainParams::new(0.0, 0.0, 1.0), &init, &quick()).unwrap();
        let (_, total) = duped_fraction(&dist, traj.final_state());
        assert!(total < 1e-6);
    }

    #[test]
    fn free_state_is_absorbing() {
        let dist = dist(0.8);
        let traj = integrate(
            &dist,
            &StrainParams::new(2.0, 1.0, 0.5),
            &DupedField::zeros(&dist),
            &quick(),
        )
        .unwrap();
        assert!(traj.steady_state_reached);
        assert!(traj.states.iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn without_correction_everyone_is_duped() {
        let dist = dist(0.8);
        let init = seed_initial(&dist, 1e-3);
        let traj = integrate(&dist, &StrainParams::new(1.0, 0.5, 0.0), &init, &quick()).unwrap();
        let (per_class, total) = duped_fraction(&dist, traj.final_state());
        assert!(total > 0.999, "{total}");
        assert!(per_class.iter().all(|&f| f > 0.999));
    }

    #[test]
    fn states_stay_in_invariant_region() {
        let dist = dist(0.9);
        let init = seed_initial(&dist, 0.5);
        // large rates force step halving near the clamp
        let traj = integrate(
            &dist,
            &StrainParams::new(3.0, 0.2, 2.5),
            &init,
            &SolverConfig {
                dt: 0.02,
                t_max: 50.0,
                ..quick()
            },
        )
        .unwrap();
        for s in &traj.states {
            for (&d, &p) in s.values().iter().zip(dist.masses()) {
                assert!(d >= -CLAMP_TOL && d <= p + CLAMP_TOL);
            }
        }
    }

    #[test]
    fn symmetric_rates_give_identical_classes() {
        let dist = dist(0.5);
        let init = seed_initial(&dist, 1e-2);
        let traj = integrate(&dist, &StrainParams::new(0.8, 0.8, 1.0), &init, &quick()).unwrap();
        for s in &traj.states {
            let (per_class, _) = duped_fraction(&dist, s);
            assert!((per_class[0] - per_class[1]).abs() < 1e-10);
        }
        // and compartment by compartment under label exchange
        let last = traj.final_state();
        for (k, c) in dist.compartments().iter().enumerate() {
            if c.class == Class::One {
                let m = dist.index_of(Class::Two, c.b, c.a).unwrap();
                assert!((last.values()[k] - last.values()[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_differences_match_derivative() {
        let dist = dist(0.8);
        let strain = StrainParams::new(1.0, 0.5, 0.7);
        let cfg = SolverConfig {
            dt: 0.001,
            t_max: 2.0,
            sample_interval: 0.01,
            steady_tol: 1e-14,
            ..SolverConfig::default()
        };
        let traj = integrate(&dist, &strain, &seed_initial(&dist, 0.05), &cfg).unwrap();
        for k in [10usize, 50, 150] {
            let h = traj.times[k + 1] - traj.times[k - 1];
            let rate = derivative(&dist, &traj.states[k], &strain);
            let scale = rate.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            for i in 0..dist.len() {
                let fd = (traj.states[k + 1].values()[i] - traj.states[k - 1].values()[i]) / h;
                assert!((fd - rate[i]).abs() < 1e-3 * scale.max(1e-12));
            }
        }
    }

    #[test]
    fn deterministic() {
        let dist = dist(0.8);
        let init = seed_initial(&dist, 1e-3);
        let s = StrainParams::new(1.0, 0.5, 0.7);
        let a = integrate(&dist, &s, &init, &quick()).unwrap();
        let b = integrate(&dist, &s, &init, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn total_at_extends_steady_runs() {
        let dist = dist(0.8);
        let traj = integrate(
            &dist,
            &StrainParams::new(0.0, 0.0, 1.0),
            &seed_initial(&dist, 0.1),
            &quick(),
        )
        .unwrap();
        assert!(traj.total_at(0.0).unwrap() > 0.09);
        assert!(traj.total_at(1.5).is_err());
        if traj.steady_state_reached {
            assert!(traj.total_at(10_000.0).unwrap() < 1e-6);
        }
    }
}
