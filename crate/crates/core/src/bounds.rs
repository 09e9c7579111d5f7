//! Closed-form bound distributions and asymptotic tail slopes.
//!
//! The per-user transmission count `N^{(i)}_m` is stochastically sandwiched
//! between two laws of the common form
//!
//! ```text
//! P[X > n] = E[(1 - zeta e^{-c L})^n]
//! ```
//!
//! with `zeta = 1, c = (M-1)(lambda ∧ nu)` for the lower law and
//! `zeta = (lambda ∧ nu) / (M (lambda ∨ nu)), c = (M-1)(lambda ∨ nu)` for the
//! upper law. For exponential packets the substitution `u = e^{-mu L}` turns
//! the expectation into `∫_0^1 (1 - zeta u^{c/mu})^n du`, and for `zeta = 1`
//! into the Beta function `(mu/c) B(mu/c, n+1)`.

use alloc::vec::Vec;

use crate::dist::{PacketDistribution, UserCountDistribution};
use crate::error::{Error, Result};
use crate::finite::FiniteModelParams;
use crate::quad::{self, Tolerance};
use crate::slotted::SlottedModelParams;
use crate::special;

/// Above this `n` the Beta route is preferred over quadrature when both exist.
pub const BETA_AUTHORITATIVE_ABOVE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Lower bound law; slope `-mu / ((M-1)(lambda ∧ nu))`.
    LowerN,
    /// Upper bound law; slope `-mu / ((M-1)(lambda ∨ nu))`.
    UpperN,
    /// Empty-start delays; slope `-M mu / ((M-1) nu)`.
    TransientSlope,
    /// Long-run delays with `lambda = nu`; slope `-mu / ((M-1) nu)`.
    SteadySlope,
    /// Slotted model with random users; slope `-alpha / nu`.
    SlottedSlope,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::LowerN,
        BoundKind::UpperN,
        BoundKind::TransientSlope,
        BoundKind::SteadySlope,
        BoundKind::SlottedSlope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::LowerN => "lower_n",
            BoundKind::UpperN => "upper_n",
            BoundKind::TransientSlope => "transient",
            BoundKind::SteadySlope => "steady",
            BoundKind::SlottedSlope => "slotted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Finite(FiniteModelParams),
    Slotted(SlottedModelParams),
}

/// Value of `E[(1 - zeta e^{-cL})^n]` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureValue {
    /// Quadrature (or exact evaluation for constant packets).
    pub quadrature: f64,
    pub error_estimate: f64,
    /// `(mu/c) B(mu/c, n+1)`, present for exponential packets with `zeta = 1`.
    pub beta_closed_form: Option<f64>,
    pub n: u64,
}

impl MixtureValue {
    pub fn value(&self) -> f64 {
        match self.beta_closed_form {
            Some(b) if self.n > BETA_AUTHORITATIVE_ABOVE => b,
            _ => self.quadrature,
        }
    }

    fn exact(n: u64, v: f64) -> Self {
        Self {
            quadrature: v,
            error_estimate: 0.0,
            beta_closed_form: None,
            n,
        }
    }
}

/// `ln(1 - zeta x)^n` evaluated without cancellation.
fn log_power(n: f64, zeta: f64, x: f64) -> f64 {
    n * libm::log1p(-zeta * x)
}

/// Geometric breakpoints around the scale where `n zeta x^a ≈ 1`.
fn peak_breaks(lo: f64, hi: f64, scale: f64) -> Vec<f64> {
    let mut breaks = Vec::new();
    breaks.push(lo);
    if scale.is_finite() && scale > lo {
        let mut x = scale * libm::pow(2.0, -12.0);
        while x < hi {
            if x > lo {
                breaks.push(x);
            }
            x *= 2.0;
        }
    }
    breaks.push(hi);
    breaks
}

/// `E[(1 - zeta e^{-cL})^n]`.
pub fn ccdf_collision_mixture(
    n: u64,
    zeta: f64,
    c: f64,
    dist: &PacketDistribution,
) -> Result<MixtureValue> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::param("zeta", "must lie in (0, 1]"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::param("c", "must be finite and > 0"));
    }
    dist.validate()?;
    if n == 0 {
        let mut v = MixtureValue::exact(0, 1.0);
        if zeta == 1.0 && matches!(dist, PacketDistribution::Exponential { .. }) {
            v.beta_closed_form = Some(1.0);
        }
        return Ok(v);
    }
    let nf = n as f64;
    let tol = Tolerance::DEFAULT;
    match *dist {
        PacketDistribution::Exponential { rate } => {
            let a = c / rate;
            let f = |u: f64| libm::exp(log_power(nf, zeta, libm::pow(u, a)));
            let scale = libm::pow(nf * zeta, -1.0 / a);
            let q = quad::integrate_with_breaks(f, &peak_breaks(0.0, 1.0, scale), tol)?;
            let beta = (zeta == 1.0).then(|| {
                let b = 1.0 / a;
                libm::exp(libm::log(b) + special::ln_beta(b, nf + 1.0))
            });
            Ok(MixtureValue {
                quadrature: q.value,
                error_estimate: q.error_estimate,
                beta_closed_form: beta,
                n,
            })
        }
        PacketDistribution::Constant { length } => Ok(MixtureValue::exact(
            n,
            libm::exp(log_power(nf, zeta, libm::exp(-c * length))),
        )),
        PacketDistribution::TruncatedExponential { rate, cap } => {
            let a = c / rate;
            let lo = libm::exp(-rate * cap);
            let mass = -libm::expm1(-rate * cap);
            let f = |u: f64| libm::exp(log_power(nf, zeta, libm::pow(u, a))) / mass;
            let scale = libm::pow(nf * zeta, -1.0 / a);
            let q = quad::integrate_with_breaks(f, &peak_breaks(lo, 1.0, scale), tol)?;
            Ok(MixtureValue {
                quadrature: q.value,
                error_estimate: q.error_estimate,
                beta_closed_form: None,
                n,
            })
        }
        PacketDistribution::Gamma { shape, rate } => {
            // Integrate the density against the collision factor on [0, x_max],
            // where x_max leaves less than 1e-16 of mass beyond it.
            let mut x_max = (shape + 1.0) / rate;
            while special::gamma_q(shape, rate * x_max) > 1e-16 {
                x_max *= 2.0;
            }
            let pivot = libm::log(nf * zeta) / c;
            let mut breaks = Vec::new();
            breaks.push(0.0);
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
                let x = pivot + k / c;
                if x > 0.0 && x < x_max {
                    breaks.push(x);
                }
            }
            let mode = ((shape - 1.0) / rate).max(0.0);
            for x in [mode, shape / rate] {
                if x > 0.0 && x < x_max {
                    breaks.push(x);
                }
            }
            breaks.push(x_max);
            breaks.sort_by(f64::total_cmp);
            let f = |x: f64| {
                let d = dist.density(x).unwrap_or(0.0);
                // Kronrod nodes never hit x = 0, where the density may blow up.
                if d == 0.0 || !d.is_finite() {
                    return 0.0;
                }
                d * libm::exp(log_power(nf, zeta, libm::exp(-c * x)))
            };
            let q = quad::integrate_with_breaks(f, &breaks, tol)?;
            Ok(MixtureValue {
                quadrature: q.value,
                error_estimate: q.error_estimate,
                beta_closed_form: None,
                n,
            })
        }
    }
}

fn finite_rates(params: &FiniteModelParams) -> Result<(f64, f64, f64)> {
    if params.users() < 2 {
        return Err(Error::param("M", "bounds need at least two users"));
    }
    let m1 = (params.users() - 1) as f64;
    Ok((
        m1,
        params.lambda().min(params.nu()),
        params.lambda().max(params.nu()),
    ))
}

/// `(zeta, c)` of the lower or upper bound law.
pub fn bound_parameters(kind: BoundKind, params: &FiniteModelParams) -> Result<(f64, f64)> {
    let (m1, lo, hi) = finite_rates(params)?;
    match kind {
        BoundKind::LowerN => Ok((1.0, m1 * lo)),
        BoundKind::UpperN => Ok((lo / (params.users() as f64 * hi), m1 * hi)),
        _ => Err(Error::param(
            "kind",
            "only LowerN and UpperN have bound laws",
        )),
    }
}

/// `P[N_lower > n]` or `P[N_upper > n]`.
pub fn bound_ccdf(kind: BoundKind, n: u64, params: &FiniteModelParams) -> Result<MixtureValue> {
    let (zeta, c) = bound_parameters(kind, params)?;
    ccdf_collision_mixture(n, zeta, c, params.packet())
}

/// Limit of `log P[X > n] / log n` for the given kind.
pub fn asymptotic_slope(kind: BoundKind, params: &ModelParams) -> Result<f64> {
    match (kind, params) {
        (BoundKind::SlottedSlope, ModelParams::Slotted(p)) => {
            let alpha = user_decay_rate(p.users())?;
            Ok(slotted_slope(alpha, p.nu()))
        }
        (BoundKind::SlottedSlope, ModelParams::Finite(_)) => Err(Error::param(
            "kind",
            "slotted slope needs slotted parameters",
        )),
        (_, ModelParams::Slotted(_)) => Err(Error::param(
            "kind",
            "finite-model slope needs finite parameters",
        )),
        (kind, ModelParams::Finite(p)) => {
            let (m1, lo, hi) = finite_rates(p)?;
            let mu = p.packet().decay_rate().ok_or(Error::param(
                "packet",
                "bounded packet laws have no power-law tail",
            ))?;
            let m = p.users() as f64;
            Ok(match kind {
                BoundKind::LowerN => -mu / (m1 * lo),
                BoundKind::UpperN => -mu / (m1 * hi),
                BoundKind::TransientSlope => -m * mu / (m1 * p.nu()),
                BoundKind::SteadySlope => -mu / (m1 * p.nu()),
                BoundKind::SlottedSlope => unreachable!(),
            })
        }
    }
}

fn user_decay_rate(users: &UserCountDistribution) -> Result<f64> {
    users.decay_rate().ok_or(Error::param(
        "users",
        "bounded user laws have no power-law tail",
    ))
}

/// `-alpha / nu`.
pub fn slotted_slope(alpha: f64, nu: f64) -> f64 {
    -alpha / nu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceAsymptotic {
    /// `E[exp(-theta U^{1/alpha})]` by quadrature.
    pub exact: f64,
    /// `Gamma(alpha + 1) / theta^alpha`.
    pub asymptote: f64,
    pub error_estimate: f64,
}

impl LaplaceAsymptotic {
    pub fn ratio(&self) -> f64 {
        self.exact / self.asymptote
    }
}

/// Laplace transform of `U^{1/alpha}` for uniform `U`, against its large-`theta` asymptote.
pub fn laplace_uniform_asymptotic(theta: f64, alpha: f64) -> Result<LaplaceAsymptotic> {
    for (name, v) in [("theta", theta), ("alpha", alpha)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, "must be finite and > 0"));
        }
    }
    // For alpha >= 1 the root u^{1/alpha} is not smooth at 0; u = v^alpha
    // turns the integrand into alpha v^{alpha-1} e^{-theta v}.
    let q = if alpha >= 1.0 {
        let f = |v: f64| alpha * libm::pow(v, alpha - 1.0) * libm::exp(-theta * v);
        quad::integrate_with_breaks(f, &peak_breaks(0.0, 1.0, 1.0 / theta), Tolerance::DEFAULT)?
    } else {
        let f = |u: f64| libm::exp(-theta * libm::pow(u, 1.0 / alpha));
        let scale = libm::pow(theta, -alpha);
        quad::integrate_with_breaks(f, &peak_breaks(0.0, 1.0, scale), Tolerance::DEFAULT)?
    };
    let asymptote = libm::exp(special::ln_gamma(alpha + 1.0) - alpha * libm::log(theta));
    Ok(LaplaceAsymptotic {
        exact: q.value,
        asymptote,
        error_estimate: q.error_estimate,
    })
}

/// `Gamma(beta + 1) / Phi(t)` for a caller-supplied `Phi(t)`.
pub fn exact_t_asymptote(t: f64, beta: f64, phi_at_t: f64) -> Result<f64> {
    for (name, v) in [("t", t), ("beta", beta), ("phi", phi_at_t)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, "must be finite and > 0"));
        }
    }
    Ok(special::gamma(beta + 1.0) / phi_at_t)
}
