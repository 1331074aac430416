use super::{integrate, seed_initial, SolverConfig, StrainParams};
use crate::ensemble::ClassDegreeDistribution;
use crate::{Error, Result};

/// A run counts as an invasion when its final duped fraction exceeds this
/// multiple of the seed.
pub const INVASION_FACTOR: f64 = 10.0;

const BRACKET_WIDTH: f64 = 1e-3;

/// Integrates from the uniform seed and reports whether misinformation
/// invaded.
pub fn invades(
    dist: &ClassDegreeDistribution,
    strain: &StrainParams,
    solver: &SolverConfig,
) -> Result<bool> {
    let init = seed_initial(dist, solver.seed_eps);
    let traj = integrate(dist, strain, &init, solver)?;
    let total: f64 = traj.final_state().values().iter().sum();
    Ok(total > INVASION_FACTOR * solver.seed_eps)
}

/// Bisects the correction rate separating invasion (at `bracket.0`) from
/// extinction (at `bracket.1`). The `gamma` of `template` is ignored.
pub fn find_invasion_threshold(
    dist: &ClassDegreeDistribution,
    template: &StrainParams,
    solver: &SolverConfig,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let bracket_err = |reason: &str| Error::Bracket {
        lo: bracket.0,
        hi: bracket.1,
        reason: reason.into(),
    };
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(bracket_err("need 0 <= lo < hi"));
    }
    if !invades(dist, &template.with_gamma(lo), solver)? {
        return Err(bracket_err("no invasion at the lower end; lower it"));
    }
    if invades(dist, &template.with_gamma(hi), solver)? {
        return Err(bracket_err("invasion at the upper end; raise it"));
    }
    while hi - lo >= BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if invades(dist, &template.with_gamma(mid), solver)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_ensemble, NetworkConfig};

    #[test]
    fn bracket_must_straddle_the_threshold() {
        let dist = build_ensemble(&NetworkConfig {
            d_max: 20,
            ..NetworkConfig::default()
        })
        .unwrap();
        let s = StrainParams::new(1.0, 1.0, 0.0);
        let solver = SolverConfig {
            t_max: 100.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            find_invasion_threshold(&dist, &s, &solver, (1.5, 3.0)),
            Err(Error::Bracket { .. })
        ));
        assert!(matches!(
            find_invasion_threshold(&dist, &s, &solver, (0.1, 0.5)),
            Err(Error::Bracket { .. })
        ));
        assert!(matches!(
            find_invasion_threshold(&dist, &s, &solver, (2.0, 1.0)),
            Err(Error::Bracket { .. })
        ));
    }
}
