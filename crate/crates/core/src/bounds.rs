//! Detection-efficiency thresholds below which the local models exist.
//!
//! Rational formulas return exact [`Rational`]s; the all-click and
//! dimension bounds are irrational in general and return `f64`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{int, Rational};
use num_traits::{One, Zero};

/// Threshold for two parties with `ma` and `mb` settings:
/// `(ma + mb - 2) / (ma mb - 1)`.
pub fn eta_two_party(ma: u64, mb: u64) -> Result<Rational> {
    check_settings(ma, mb)?;
    Ok(Rational::new((ma + mb - 2).into(), (ma * mb - 1).into()))
}

fn check_settings(ma: u64, mb: u64) -> Result<()> {
    if ma == 0 || mb == 0 || (ma == 1 && mb == 1) {
        return Err(Error::Domain(format!(
            "settings counts must be >= 1 and not both 1 (got {ma}, {mb})"
        )));
    }
    Ok(())
}

/// Parameters that make the two-party guessing model match the
/// inefficient-detector statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetrizationSolution {
    #[serde(serialize_with = "crate::rational::serialize")]
    pub eta: Rational,
    /// Probability that the model runs at all (otherwise both stay silent).
    #[serde(serialize_with = "crate::rational::serialize")]
    pub proceed: Rational,
    /// Probability that Alice is the party whose setting is guessed.
    #[serde(serialize_with = "crate::rational::serialize")]
    pub role: Rational,
    pub ma: u64,
    pub mb: u64,
}

impl SymmetrizationSolution {
    /// Left minus right side of the four detection-probability equations:
    /// both click, only Bob clicks, only Alice clicks, neither clicks.
    pub fn residuals(&self) -> [Rational; 4] {
        let (ma, mb) = (int(self.ma), int(self.mb));
        let one = Rational::one();
        let miss = &one - &self.eta;
        let both = &self.proceed * (&self.role / &ma + (&one - &self.role) / &mb);
        let bob_only = &self.proceed * &self.role * (&ma - &one) / &ma;
        let alice_only = &self.proceed * (&one - &self.role) * (&mb - &one) / &mb;
        [
            &self.eta * &self.eta - both,
            &self.eta * &miss - bob_only,
            &self.eta * &miss - alice_only,
            &miss * &miss - (&one - &self.proceed),
        ]
    }

    pub fn is_exact(&self) -> bool {
        self.residuals().iter().all(Zero::is_zero)
    }
}

/// Solves the detection-probability system for `(eta, proceed, role)`.
///
/// Adding the two single-click equations gives
/// `eta (1-eta) alpha = 1 - (1-eta)^2` with
/// `alpha = ma/(ma-1) + mb/(mb-1)`, hence `eta = (alpha-2)/(alpha-1)`.
/// The result is checked against all four equations and against
/// [`eta_two_party`].
pub fn solve_symmetrization(ma: u64, mb: u64) -> Result<SymmetrizationSolution> {
    check_settings(ma, mb)?;
    let one = Rational::one();
    let sol = if ma == 1 || mb == 1 {
        // one side has a single setting: its guess always matches
        SymmetrizationSolution {
            eta: one.clone(),
            proceed: one.clone(),
            role: if ma == 1 { one } else { Rational::zero() },
            ma,
            mb,
        }
    } else {
        let alpha = Rational::new(ma.into(), (ma - 1).into())
            + Rational::new(mb.into(), (mb - 1).into());
        let two = int(2);
        let eta = (&alpha - &two) / (&alpha - &one);
        let miss = &one - &eta;
        let proceed = &one - &miss * &miss;
        let role = &eta * &miss * int(ma) / (&proceed * int(ma - 1));
        SymmetrizationSolution { eta, proceed, role, ma, mb }
    };
    if !sol.is_exact() || sol.eta != eta_two_party(ma, mb)? {
        return Err(Error::Domain(format!("symmetrization system inconsistent for ({ma}, {mb})")));
    }
    Ok(sol)
}

/// Conjectured threshold for `n` parties with `m` settings each:
/// `n / ((n-1) m + 1)`.
pub fn eta_multiparty(n: u64, m: u64) -> Result<Rational> {
    if n < 2 || m < 2 {
        return Err(Error::Domain(format!("need N >= 2 and M >= 2 (got {n}, {m})")));
    }
    Ok(Rational::new(n.into(), ((n - 1) * m + 1).into()))
}

/// Threshold when only the all-click statistics must be reproduced:
/// `M^{-(N-1)/N}`.
pub fn eta_all_click(n: u64, m: u64) -> Result<f64> {
    if n < 2 || m < 2 {
        return Err(Error::Domain(format!("need N >= 2 and M >= 2 (got {n}, {m})")));
    }
    Ok((m as f64).powf(-((n - 1) as f64) / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionBoundMode {
    /// Solve `epsilon(delta)` for `delta`, then return `2Q/(1+Q)`.
    ExactFromDelta,
    /// `(epsilon / 4d)^(2(d-1))`.
    LowerBound,
}

/// `epsilon = d (sin^2 delta + 2 sin delta)`.
pub fn epsilon_from_delta(d: u64, delta: f64) -> f64 {
    let s = delta.sin();
    d as f64 * (s * s + 2.0 * s)
}

/// Firing probability of the thresholded party, `(sin delta)^(2(d-1))`.
pub fn firing_probability(d: u64, delta: f64) -> f64 {
    delta.sin().powi(2 * (d as i32 - 1))
}

/// Inverts [`epsilon_from_delta`] on `(0, pi/2]` by bisection to `1e-12`.
pub fn delta_from_epsilon(d: u64, epsilon: f64) -> Result<f64> {
    check_dimension_args(d, epsilon)?;
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if epsilon_from_delta(d, mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_dimension_args(d: u64, epsilon: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be >= 2, got {d}")));
    }
    if !(epsilon > 0.0 && epsilon < 2.0 * d as f64) {
        return Err(Error::Domain(format!("need 0 < epsilon < 2d = {}, got {epsilon}", 2 * d)));
    }
    Ok(())
}

/// Efficiency of the dimension-only model for error `epsilon`.
pub fn eta_dimension(d: u64, epsilon: f64, mode: DimensionBoundMode) -> Result<f64> {
    check_dimension_args(d, epsilon)?;
    Ok(match mode {
        DimensionBoundMode::LowerBound => (epsilon / (4.0 * d as f64)).powi(2 * (d as i32 - 1)),
        DimensionBoundMode::ExactFromDelta => {
            let q = firing_probability(d, delta_from_epsilon(d, epsilon)?);
            2.0 * q / (1.0 + q)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn two_party_values() {
        assert_eq!(eta_two_party(2, 2).unwrap(), rat(2, 3));
        assert_eq!(eta_two_party(2, 3).unwrap(), rat(3, 5));
        assert_eq!(eta_two_party(3, 3).unwrap(), rat(1, 2));
        assert!(matches!(eta_two_party(1, 1), Err(Error::Domain(_))));
        assert!(matches!(eta_two_party(0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetrization_values() {
        let s = solve_symmetrization(2, 2).unwrap();
        assert_eq!((s.eta.clone(), s.proceed.clone(), s.role.clone()), (rat(2, 3), rat(8, 9), rat(1, 2)));
        let s = solve_symmetrization(2, 3).unwrap();
        assert_eq!((s.eta.clone(), s.proceed.clone(), s.role.clone()), (rat(3, 5), rat(21, 25), rat(4, 7)));
        assert!(s.is_exact());
        assert_eq!(solve_symmetrization(3, 3).unwrap().role, rat(1, 2));
        assert!(solve_symmetrization(1, 1).is_err());
    }

    #[test]
    fn single_setting_side() {
        let s = solve_symmetrization(1, 4).unwrap();
        assert_eq!(s.eta, rat(1, 1));
        assert_eq!(s.role, rat(1, 1));
        let s = solve_symmetrization(5, 1).unwrap();
        assert_eq!(s.role, rat(0, 1));
    }

    #[test]
    fn multiparty_values() {
        assert_eq!(eta_multiparty(2, 2).unwrap(), rat(2, 3));
        assert_eq!(eta_multiparty(3, 2).unwrap(), rat(3, 5));
        for n in 2..50 {
            assert_eq!(eta_multiparty(n, 2).unwrap(), rat(n as i64, 2 * n as i64 - 1));
        }
        assert!(eta_multiparty(1, 2).is_err());
        assert!(eta_multiparty(2, 1).is_err());
    }

    #[test]
    fn all_click_values() {
        assert!((eta_all_click(2, 2).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((eta_all_click(2, 4).unwrap() - 0.5).abs() < 1e-15);
        assert!((eta_all_click(100_000, 3).unwrap() - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn dimension_values() {
        let lb = eta_dimension(2, 1.0, DimensionBoundMode::LowerBound).unwrap();
        assert!((lb - 1.0 / 64.0).abs() < 1e-15);
        assert!((epsilon_from_delta(2, PI / 6.0) - 2.5).abs() < 1e-14);
        assert!((firing_probability(2, PI / 6.0) - 0.25).abs() < 1e-15);
        // epsilon = 5/2 lies above 2d = 4? no: 2.5 < 4, so it is admissible
        let exact = eta_dimension(2, 2.5, DimensionBoundMode::ExactFromDelta).unwrap();
        assert!((exact - 0.4).abs() < 1e-11);
        assert!((delta_from_epsilon(2, 2.5).unwrap() - PI / 6.0).abs() < 1e-11);
        for d in 2..6 {
            let e = eta_dimension(d, 1e-6, DimensionBoundMode::ExactFromDelta).unwrap();
            assert!(e < 1e-6);
        }
        assert!(eta_dimension(2, 4.0, DimensionBoundMode::LowerBound).is_err());
        assert!(eta_dimension(2, 0.0, DimensionBoundMode::LowerBound).is_err());
        assert!(eta_dimension(1, 0.5, DimensionBoundMode::LowerBound).is_err());
    }

    #[test]
    fn settings_versus_parties_ratio() {
        for m in 2..=100u64 {
            let ratio = eta_multiparty(2, m).unwrap() / Rational::new(1.into(), m.into());
            assert_eq!(ratio, Rational::new((2 * m).into(), (m + 1).into()));
            assert!(ratio <= int(2));
        }
    }

    proptest! {
        #[test]
        fn two_party_matches_multiparty_on_diagonal(m in 2u64..500) {
            prop_assert_eq!(eta_two_party(m, m).unwrap(), eta_multiparty(2, m).unwrap());
        }

        #[test]
        fn two_party_decreasing(ma in 2u64..200, mb in 2u64..200) {
            let here = eta_two_party(ma, mb).unwrap();
            prop_assert!(eta_two_party(ma + 1, mb).unwrap() < here);
            prop_assert!(eta_two_party(ma, mb + 1).unwrap() < here);
        }

        #[test]
        fn multiparty_decreasing_and_identity(n in 2u64..300, m in 2u64..300) {
            let here = eta_multiparty(n, m).unwrap();
            prop_assert!(eta_multiparty(n + 1, m).unwrap() < here);
            prop_assert!(eta_multiparty(n, m + 1).unwrap() < here);
            prop_assert_eq!(&here * int((n - 1) * m + 1), int(n));
            prop_assert!(here > Rational::new(1.into(), m.into()));
        }

        #[test]
        fn symmetrization_is_exact(ma in 1u64..60, mb in 2u64..60) {
            let s = solve_symmetrization(ma, mb).unwrap();
            prop_assert!(s.is_exact());
            for v in [&s.eta, &s.proceed, &s.role] {
                prop_assert!(*v >= Rational::zero() && *v <= Rational::one());
            }
        }

        #[test]
        fn exact_mode_dominates_lower_bound(d in 2u64..8, frac in 0.001f64..0.999) {
            let eps = frac * 2.0 * d as f64;
            let exact = eta_dimension(d, eps, DimensionBoundMode::ExactFromDelta).unwrap();
            let lower = eta_dimension(d, eps, DimensionBoundMode::LowerBound).unwrap();
            prop_assert!(exact >= lower);
        }
    }
}
