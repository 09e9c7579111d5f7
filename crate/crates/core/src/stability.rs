//! Throughput stability classification.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::finite::DelayTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PositiveThroughput,
    ZeroThroughput,
    /// Boundary case with index-one tails and infinite mean delay.
    Critical,
    /// Region the theory leaves open.
    Unknown,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::PositiveThroughput => "PositiveThroughput",
            Verdict::ZeroThroughput => "ZeroThroughput",
            Verdict::Critical => "Critical",
            Verdict::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    /// The rule that fired.
    pub rule: &'static str,
}

/// Relative band inside which two rates are treated as equal.
const EQUAL_BAND: f64 = 1e-12;

fn cmp_rel(a: f64, b: f64) -> core::cmp::Ordering {
    if (a - b).abs() <= EQUAL_BAND * a.abs().max(b.abs()) {
        core::cmp::Ordering::Equal
    } else if a < b {
        core::cmp::Ordering::Less
    } else {
        core::cmp::Ordering::Greater
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, "must be finite and > 0"))
    }
}

/// Classifies the finite-population model from its rates.
///
/// Every rule compares ratios, so the verdict is invariant under a common
/// rescaling of `lambda`, `nu` and `mu`.
pub fn classify_finite(users: usize, lambda: f64, nu: f64, mu: f64) -> Result<StabilityVerdict> {
    use core::cmp::Ordering::*;
    if users < 2 {
        return Err(Error::param("M", "classification needs at least two users"));
    }
    positive("lambda", lambda)?;
    positive("nu", nu)?;
    positive("mu", mu)?;
    let contention = (users - 1) as f64 * nu;
    let v = match (cmp_rel(mu, contention), cmp_rel(lambda, nu)) {
        (Greater, _) => StabilityVerdict {
            verdict: Verdict::PositiveThroughput,
            rule: "mu > (M-1)*nu",
        },
        (Equal, _) => StabilityVerdict {
            verdict: Verdict::Critical,
            rule: "mu = (M-1)*nu",
        },
        (Less, Greater | Equal) => StabilityVerdict {
            verdict: Verdict::ZeroThroughput,
            rule: "lambda >= nu and mu < (M-1)*nu",
        },
        (Less, Less) => StabilityVerdict {
            verdict: Verdict::Unknown,
            rule: "lambda < nu and mu < (M-1)*nu (open region)",
        },
    };
    Ok(v)
}

/// Classifies the slotted model with geometric-tailed user count.
pub fn classify_slotted(alpha: f64, nu: f64) -> Result<StabilityVerdict> {
    use core::cmp::Ordering::*;
    positive("alpha", alpha)?;
    positive("nu", nu)?;
    Ok(match cmp_rel(alpha, nu) {
        Less => StabilityVerdict {
            verdict: Verdict::ZeroThroughput,
            rule: "alpha < nu: infinite mean delay",
        },
        Greater => StabilityVerdict {
            verdict: Verdict::PositiveThroughput,
            rule: "alpha > nu: finite mean delay",
        },
        Equal => StabilityVerdict {
            verdict: Verdict::Critical,
            rule: "alpha = nu",
        },
    })
}

/// `N(t) / t` on the given grid, with `N(t)` the departures up to `t`.
pub fn empirical_throughput(trace: &DelayTrace, t_grid: &[f64]) -> Result<Vec<f64>> {
    t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::param("t", "must be > 0"));
            }
            if t > trace.horizon {
                return Err(Error::BeyondHorizon {
                    time: t,
                    horizon: trace.horizon,
                });
            }
            let count = trace.departures.partition_point(|&d| d <= t);
            Ok(count as f64 / t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::PacketDistribution;
    use crate::finite::{simulate_finite, FiniteModelParams, SimulationOptions};
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        for lambda in [0.01, 0.4, 7.0] {
            assert_eq!(
                classify_finite(2, lambda, 0.4, 1.0).unwrap().verdict,
                Verdict::PositiveThroughput
            );
        }
        assert_eq!(
            classify_finite(3, 2.0 / 3.0, 2.0 / 3.0, 1.0)
                .unwrap()
                .verdict,
            Verdict::ZeroThroughput
        );
        assert_eq!(
            classify_finite(2, 0.1, 1.0, 0.9).unwrap().verdict,
            Verdict::Unknown
        );
        assert_eq!(
            classify_finite(2, 1.0, 1.0, 1.0).unwrap().verdict,
            Verdict::Critical
        );
        assert!(classify_finite(1, 1.0, 1.0, 1.0).is_err());
        assert!(classify_finite(2, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn slotted_examples() {
        let ln2 = core::f64::consts::LN_2;
        assert_eq!(
            classify_slotted(libm::log(1.5), ln2).unwrap().verdict,
            Verdict::ZeroThroughput
        );
        assert_eq!(
            classify_slotted(2.0, 1.0).unwrap().verdict,
            Verdict::PositiveThroughput
        );
        assert_eq!(
            classify_slotted(1.0, 1.0).unwrap().verdict,
            Verdict::Critical
        );
    }

    #[test]
    fn throughput_of_single_user_renewal() {
        let p = FiniteModelParams::new(1, 1.0, 1.0, PacketDistribution::exponential(1.0).unwrap())
            .unwrap();
        let mut s = RandomStream::new(31, 0);
        let trace = simulate_finite(&p, &SimulationOptions::until(100_000.0), &mut s).unwrap();
        let series = empirical_throughput(&trace, &[1e3, 1e5]).unwrap();
        assert!((series[1] - 0.5).abs() < 0.02, "{series:?}");
        assert!(matches!(
            empirical_throughput(&trace, &[2e5]),
            Err(Error::BeyondHorizon { .. })
        ));
    }

    proptest! {
        #[test]
        fn verdict_is_scale_free(
            m in 2usize..30,
            lambda in 0.01f64..10.0,
            nu in 0.01f64..10.0,
            mu in 0.01f64..10.0,
            c in 1e-3f64..1e3,
        ) {
            let a = classify_finite(m, lambda, nu, mu).unwrap();
            let b = classify_finite(m, c * lambda, c * nu, c * mu).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn verdict_agrees_with_slope_formulas(
            m in 2usize..30,
            lambda in 0.01f64..10.0,
            nu in 0.01f64..10.0,
            mu in 0.01f64..10.0,
        ) {
            use crate::bounds::{asymptotic_slope, BoundKind, ModelParams};
            let params = ModelParams::Finite(
                FiniteModelParams::new(m, lambda, nu, PacketDistribution::exponential(mu).unwrap()).unwrap(),
            );
            let v = classify_finite(m, lambda, nu, mu).unwrap();
            match v.verdict {
                Verdict::PositiveThroughput => {
                    prop_assert!(asymptotic_slope(BoundKind::SteadySlope, &params).unwrap() < -1.0);
                }
                Verdict::ZeroThroughput => {
                    prop_assert!(asymptotic_slope(BoundKind::LowerN, &params).unwrap() > -1.0);
                }
                _ => {}
            }
        }
    }
}
