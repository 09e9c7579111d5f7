//! Packet-length and user-count laws.

use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::special;

/// Law of the packet length `L`.
///
/// Every variant has strictly positive support. Build values through the
/// checked constructors; the engines re-validate on use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PacketDistribution {
    Exponential {
        rate: f64,
    },
    Constant {
        length: f64,
    },
    /// Exponential conditioned on `L <= cap`.
    TruncatedExponential {
        rate: f64,
        cap: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, "must be finite and > 0"))
    }
}

impl PacketDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Self::Exponential { rate };
        d.validate().map(|_| d)
    }

    pub fn constant(length: f64) -> Result<Self> {
        let d = Self::Constant { length };
        d.validate().map(|_| d)
    }

    pub fn truncated_exponential(rate: f64, cap: f64) -> Result<Self> {
        let d = Self::TruncatedExponential { rate, cap };
        d.validate().map(|_| d)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let d = Self::Gamma { shape, rate };
        d.validate().map(|_| d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } => positive("rate", rate),
            Self::Constant { length } => positive("length", length),
            Self::TruncatedExponential { rate, cap } => {
                positive("rate", rate)?;
                positive("cap", cap)
            }
            Self::Gamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
        }
    }

    pub fn sample(&self, s: &mut RandomStream) -> f64 {
        match *self {
            Self::Exponential { rate } => s.exponential(rate),
            Self::Constant { length } => length,
            Self::TruncatedExponential { rate, cap } => {
                // Inverse transform of the conditioned law.
                let mass = -libm::expm1(-rate * cap);
                let u = s.open01();
                (-libm::log1p(-u * mass) / rate).min(cap)
            }
            Self::Gamma { shape, rate } => {
                let g = Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters");
                loop {
                    let x: f64 = g.sample(s);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
        }
    }

    /// `P[L > x]`.
    pub fn ccdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => libm::exp(-rate * x),
            Self::Constant { length } => {
                if x < length {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TruncatedExponential { rate, cap } => {
                if x >= cap {
                    0.0
                } else {
                    // (e^{-rx} - e^{-rB}) / (1 - e^{-rB})
                    libm::expm1(-rate * (cap - x)) * libm::exp(-rate * x) / libm::expm1(-rate * cap)
                }
            }
            Self::Gamma { shape, rate } => special::gamma_q(shape, rate * x),
        }
    }

    /// Density of `L`; `None` for the degenerate constant law.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Constant { .. } => None,
            _ if x < 0.0 => Some(0.0),
            Self::Exponential { rate } => Some(rate * libm::exp(-rate * x)),
            Self::TruncatedExponential { rate, cap } => Some(if x > cap {
                0.0
            } else {
                rate * libm::exp(-rate * x) / -libm::expm1(-rate * cap)
            }),
            Self::Gamma { shape, rate } => Some(if x == 0.0 {
                if shape < 1.0 {
                    f64::INFINITY
                } else if shape == 1.0 {
                    rate
                } else {
                    0.0
                }
            } else {
                libm::exp(
                    shape * libm::log(rate) + (shape - 1.0) * libm::log(x)
                        - rate * x
                        - special::ln_gamma(shape),
                )
            }),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Constant { length } => length,
            Self::TruncatedExponential { rate, cap } => {
                let tail = libm::exp(-rate * cap);
                1.0 / rate - cap * tail / (1.0 - tail)
            }
            Self::Gamma { shape, rate } => shape / rate,
        }
    }

    /// Exponential tail decay rate `mu = -lim log P[L>x] / x`.
    ///
    /// `None` for bounded laws, whose tails vanish.
    pub fn decay_rate(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } | Self::Gamma { rate, .. } => Some(rate),
            Self::Constant { .. } | Self::TruncatedExponential { .. } => None,
        }
    }
}

/// Law of the number of users `M` in the slotted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UserCountDistribution {
    Fixed {
        users: u32,
    },
    /// Geometric on `{1, 2, ...}` with the given mean, `P[M > k] = q^k`.
    Geometric {
        mean: f64,
    },
    /// `min(M, cap)` for `M` geometric with the given mean.
    TruncatedGeometric {
        mean: f64,
        cap: u32,
    },
}

impl UserCountDistribution {
    pub fn fixed(users: u32) -> Result<Self> {
        let d = Self::Fixed { users };
        d.validate().map(|_| d)
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        let d = Self::Geometric { mean };
        d.validate().map(|_| d)
    }

    pub fn truncated_geometric(mean: f64, cap: u32) -> Result<Self> {
        let d = Self::TruncatedGeometric { mean, cap };
        d.validate().map(|_| d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { users: 0 } => Err(Error::param("users", "must be >= 1")),
            Self::Fixed { .. } => Ok(()),
            Self::Geometric { mean } | Self::TruncatedGeometric { mean, .. } => {
                if !(mean.is_finite() && mean > 1.0) {
                    return Err(Error::param("mean", "must be finite and > 1"));
                }
                match *self {
                    Self::TruncatedGeometric { cap: 0, .. } => {
                        Err(Error::param("cap", "must be >= 1"))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// Geometric ratio `q = 1 - 1/mean`; `None` for a fixed population.
    pub fn ratio(&self) -> Option<f64> {
        match *self {
            Self::Fixed { .. } => None,
            Self::Geometric { mean } | Self::TruncatedGeometric { mean, .. } => {
                Some(1.0 - 1.0 / mean)
            }
        }
    }

    /// Largest possible user count, if bounded.
    pub fn max_users(&self) -> Option<u32> {
        match *self {
            Self::Fixed { users } => Some(users),
            Self::Geometric { .. } => None,
            Self::TruncatedGeometric { cap, .. } => Some(cap),
        }
    }

    /// `P[M = m]`.
    pub fn pmf(&self, m: u32) -> f64 {
        match *self {
            Self::Fixed { users } => {
                if m == users {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Geometric { .. } | Self::TruncatedGeometric { .. } => {
                let q = self.ratio().unwrap_or(0.0);
                let cap = self.max_users().unwrap_or(u32::MAX);
                if m == 0 || m > cap {
                    0.0
                } else if m == cap {
                    libm::pow(q, f64::from(m - 1))
                } else {
                    (1.0 - q) * libm::pow(q, f64::from(m - 1))
                }
            }
        }
    }

    /// `P[M > x]`.
    pub fn ccdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Fixed { users } => {
                if x < f64::from(users) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Geometric { .. } | Self::TruncatedGeometric { .. } => {
                if let Some(cap) = self.max_users() {
                    if x >= f64::from(cap) {
                        return 0.0;
                    }
                }
                let q = self.ratio().unwrap_or(0.0);
                libm::pow(q, libm::floor(x))
            }
        }
    }

    pub fn sample(&self, s: &mut RandomStream) -> u32 {
        match *self {
            Self::Fixed { users } => users,
            Self::Geometric { .. } | Self::TruncatedGeometric { .. } => {
                let q = self.ratio().unwrap_or(0.0);
                let failures = s.geometric_failures(1.0 - q);
                let m = failures.saturating_add(1).min(u64::from(u32::MAX)) as u32;
                match self.max_users() {
                    Some(cap) => m.min(cap),
                    None => m,
                }
            }
        }
    }

    /// Exponential tail decay rate `alpha = -lim log P[M>x] / x`.
    pub fn decay_rate(&self) -> Option<f64> {
        match *self {
            Self::Geometric { .. } => self.ratio().map(|q| -libm::log(q)),
            _ => None,
        }
    }
}
