//! Slotted ALOHA with unit packets and a random, fixed-over-time user count.
//!
//! With equal arrival and backoff exponents every user behaves as if it were
//! permanently backlogged, so given `M = m` each slot is independently
//!
//! * a success with probability `s_m = m e^{-(m-1) nu} (1 - e^{-nu})`,
//! * idle with probability `e^{-m nu}`,
//! * a collision otherwise.
//!
//! `T` counts the slots up to and including the next success and `N` counts
//! the slots in which at least one user transmitted, the successful slot
//! included. Both are geometric given `m`:
//! `P[T > t | m] = (1 - s_m)^t` and `P[N > n | m] = (1 - s_m / (1 - e^{-m nu}))^n`.

use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};

use crate::dist::UserCountDistribution;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Mixture terms whose remaining `M`-tail mass is below this are dropped.
pub const MIXTURE_TAIL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlottedModelParams {
    nu: f64,
    lambda: f64,
    users: UserCountDistribution,
}

impl SlottedModelParams {
    /// Parameters of the analysed regime, `lambda = nu`.
    pub fn new(nu: f64, users: UserCountDistribution) -> Result<Self> {
        Self::with_arrival_rate(nu, nu, users, false)
    }

    /// General parameters; `lambda != nu` is only accepted with `allow_unequal`.
    pub fn with_arrival_rate(
        nu: f64,
        lambda: f64,
        users: UserCountDistribution,
        allow_unequal: bool,
    ) -> Result<Self> {
        for (name, v) in [("nu", nu), ("lambda", lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, "must be finite and > 0"));
            }
        }
        if lambda != nu && !allow_unequal {
            return Err(Error::param(
                "lambda",
                "must equal nu unless unequal rates are explicitly allowed",
            ));
        }
        users.validate()?;
        Ok(Self { nu, lambda, users })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn users(&self) -> &UserCountDistribution {
        &self.users
    }

    pub fn rates_equal(&self) -> bool {
        self.lambda == self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlottedSample {
    /// `N`: slots with at least one transmitter, the success slot included.
    pub attempts: u64,
    /// `T`: slots between two successes, the success slot included.
    pub slots: u64,
    /// Realized user count.
    pub users: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlottedQuantity {
    /// `N`
    Attempts,
    /// `T`
    Slots,
}

/// Per-slot success probability given `users`.
pub fn slot_success_probability(users: u32, nu: f64) -> f64 {
    let m = f64::from(users);
    libm::exp(libm::log(m) - (m - 1.0) * nu + libm::log(-libm::expm1(-nu)))
}

/// Probability that a slot with at least one transmitter is a success.
pub fn attempt_success_probability(users: u32, nu: f64) -> f64 {
    let busy = -libm::expm1(-f64::from(users) * nu);
    (slot_success_probability(users, nu) / busy).min(1.0)
}

/// Exact conditional `P[X > value | M = users]`.
pub fn conditional_ccdf(value: u64, which: SlottedQuantity, users: u32, nu: f64) -> f64 {
    if value == 0 {
        return 1.0;
    }
    let p = match which {
        SlottedQuantity::Attempts => attempt_success_probability(users, nu),
        SlottedQuantity::Slots => slot_success_probability(users, nu),
    };
    if p >= 1.0 {
        0.0
    } else {
        libm::exp(value as f64 * libm::log1p(-p))
    }
}

fn check_users(users: u32, nu: f64) -> Result<()> {
    if users == 0 {
        return Err(Error::param("M", "must be >= 1"));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::param("nu", "must be finite and > 0"));
    }
    Ok(())
}

/// Draws `(N, T)` directly from their joint law given `M = users`.
///
/// `T` is geometric with the slot success probability; given `T`, each of
/// the `T - 1` earlier slots is independently a collision or idle, so `N` is
/// one plus a binomial count. This reproduces the slot-level joint law and
/// both geometric marginals in O(1) draws.
pub fn sample_conditional_geometric(
    users: u32,
    nu: f64,
    rng: &mut RandomStream,
) -> Result<SlottedSample> {
    check_users(users, nu)?;
    let success = slot_success_probability(users, nu);
    if !(success > 0.0) {
        return Err(Error::param("nu", "degenerate success probability"));
    }
    let slots = rng.geometric_failures(success).saturating_add(1);
    let idle = libm::exp(-f64::from(users) * nu);
    let collision_given_failure = ((1.0 - idle - success) / (1.0 - success)).clamp(0.0, 1.0);
    let collisions = if slots == 1 || collision_given_failure == 0.0 {
        0
    } else {
        let b = Binomial::new(slots - 1, collision_given_failure)
            .map_err(|_| Error::param("nu", "degenerate collision probability"))?;
        b.sample(rng)
    };
    Ok(SlottedSample {
        attempts: collisions + 1,
        slots,
        users,
    })
}

/// One draw from the `M`-mixture: a fresh user count, then the conditional sampler.
pub fn sample_mixture(
    params: &SlottedModelParams,
    rng: &mut RandomStream,
) -> Result<SlottedSample> {
    if !params.rates_equal() {
        return Err(Error::param(
            "lambda",
            "the geometric sampler needs lambda == nu",
        ));
    }
    let users = params.users.sample(rng);
    sample_conditional_geometric(users, params.nu, rng)
}

/// Slot-by-slot simulation of one replication with `M` drawn once.
///
/// Every user starts with a packet. In each slot a backlogged user transmits
/// with probability `1 - e^{-nu}`, and an empty user generates a packet with
/// probability `1 - e^{-lambda}` and sends it in the same slot.
pub fn simulate_slotted(
    params: &SlottedModelParams,
    n_successes: u64,
    rng: &mut RandomStream,
) -> Result<Vec<SlottedSample>> {
    if n_successes == 0 {
        return Err(Error::param("n_successes", "must be >= 1"));
    }
    let users = params.users.sample(rng);
    simulate_slotted_with_users(params, users, n_successes, rng)
}

/// Slot-by-slot simulation with the user count given.
pub fn simulate_slotted_with_users(
    params: &SlottedModelParams,
    users: u32,
    n_successes: u64,
    rng: &mut RandomStream,
) -> Result<Vec<SlottedSample>> {
    check_users(users, params.nu)?;
    let retransmit = -libm::expm1(-params.nu);
    let generate = -libm::expm1(-params.lambda);
    let mut backlogged = alloc::vec![true; users as usize];
    let mut samples = Vec::with_capacity(n_successes.min(1 << 20) as usize);
    let (mut attempts, mut slots) = (0u64, 0u64);
    while (samples.len() as u64) < n_successes {
        slots += 1;
        let mut transmitters = 0u32;
        let mut sender = 0usize;
        for (i, has_packet) in backlogged.iter_mut().enumerate() {
            let sends = if *has_packet {
                rng.bernoulli(retransmit)
            } else if rng.bernoulli(generate) {
                *has_packet = true;
                true
            } else {
                false
            };
            if sends {
                transmitters += 1;
                sender = i;
            }
        }
        if transmitters == 0 {
            continue;
        }
        attempts += 1;
        if transmitters == 1 {
            backlogged[sender] = false;
            samples.push(SlottedSample {
                attempts,
                slots,
                users,
            });
            attempts = 0;
            slots = 0;
        }
    }
    Ok(samples)
}

/// Exact mixture `P[X > value] = sum_m P[M = m] P[X > value | m]`.
///
/// Unbounded user laws are summed until the remaining `M`-tail mass drops
/// below [`MIXTURE_TAIL_CUTOFF`].
pub fn ccdf_slotted(value: u64, which: SlottedQuantity, params: &SlottedModelParams) -> f64 {
    let users = params.users;
    let nu = params.nu;
    if let UserCountDistribution::Fixed { users } = users {
        return conditional_ccdf(value, which, users, nu);
    }
    let cap = users.max_users().unwrap_or(u32::MAX);
    let mut total = 0.0;
    let mut m = 1u32;
    loop {
        total += users.pmf(m) * conditional_ccdf(value, which, m, nu);
        if m >= cap {
            break;
        }
        let rest = users.ccdf(f64::from(m));
        if rest < MIXTURE_TAIL_CUTOFF {
            // Remaining mass at the next conditional value.
            total += rest * conditional_ccdf(value, which, m + 1, nu);
            break;
        }
        m += 1;
    }
    total.min(1.0)
}

/// Largest `t` such that `|a(s) - b(s)| < tol` for every `s` in `1..=t`,
/// searched up to `t_max`.
///
/// Once both curves are below `tol` they agree trivially, so this horizon
/// saturates at `t_max`; [`relative_agreement_horizon`] does not.
pub fn agreement_horizon(
    a: impl Fn(u64) -> f64,
    b: impl Fn(u64) -> f64,
    tol: f64,
    t_max: u64,
) -> u64 {
    let mut t = 0;
    while t < t_max && (a(t + 1) - b(t + 1)).abs() < tol {
        t += 1;
    }
    t
}

/// Largest `t` such that `|a(s) / b(s) - 1| < rel_tol` for every `s` in
/// `1..=t`, searched up to `t_max`. Measures how far a truncated curve
/// follows the untruncated one before its exponential cut-off.
pub fn relative_agreement_horizon(
    a: impl Fn(u64) -> f64,
    b: impl Fn(u64) -> f64,
    rel_tol: f64,
    t_max: u64,
) -> u64 {
    let mut t = 0;
    while t < t_max {
        let (x, y) = (a(t + 1), b(t + 1));
        if !(y > 0.0 && (x / y - 1.0).abs() < rel_tol) {
            break;
        }
        t += 1;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = core::f64::consts::LN_2;

    fn fixed(m: u32) -> SlottedModelParams {
        SlottedModelParams::new(LN2, UserCountDistribution::fixed(m).unwrap()).unwrap()
    }

    #[test]
    fn unequal_rates_need_the_flag() {
        let users = UserCountDistribution::fixed(2).unwrap();
        assert!(SlottedModelParams::with_arrival_rate(1.0, 0.5, users, false).is_err());
        assert!(SlottedModelParams::with_arrival_rate(1.0, 0.5, users, true).is_ok());
    }

    #[test]
    fn conditional_formulas_for_two_users() {
        assert!((slot_success_probability(2, LN2) - 0.5).abs() < 1e-15);
        assert!((attempt_success_probability(2, LN2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((ccdf_slotted(3, SlottedQuantity::Slots, &fixed(2)) - 0.125).abs() < 1e-15);
        for n in 0..6u64 {
            let expect = libm::pow(1.0 / 3.0, n as f64);
            let got = conditional_ccdf(n, SlottedQuantity::Attempts, 2, LN2);
            assert!((got - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn ccdf_at_zero_is_one() {
        let geo =
            SlottedModelParams::new(LN2, UserCountDistribution::geometric(3.0).unwrap()).unwrap();
        assert!((ccdf_slotted(0, SlottedQuantity::Attempts, &geo) - 1.0).abs() < 1e-14);
        assert!((ccdf_slotted(0, SlottedQuantity::Slots, &geo) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_collapses() {
        let mut s = RandomStream::new(1, 1);
        let mut total = 0u64;
        for _ in 0..100_000 {
            let x = sample_conditional_geometric(1, LN2, &mut s).unwrap();
            assert_eq!(x.attempts, 1);
            total += x.slots;
        }
        let mean = total as f64 / 1e5;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
        assert!(sample_conditional_geometric(0, LN2, &mut s).is_err());

        let sim = simulate_slotted(&fixed(1), 100_000, &mut s).unwrap();
        assert!(sim.iter().all(|x| x.attempts == 1));
        let mean = sim.iter().map(|x| x.slots).sum::<u64>() as f64 / 1e5;
        assert!((1.98..=2.02).contains(&mean), "{mean}");
    }

    #[test]
    fn attempts_never_exceed_slots() {
        let mut s = RandomStream::new(2, 2);
        for m in 1..8 {
            for _ in 0..2_000 {
                let x = sample_conditional_geometric(m, 0.4, &mut s).unwrap();
                assert!(x.attempts >= 1 && x.attempts <= x.slots);
            }
            for x in simulate_slotted_with_users(&fixed(m), m, 2_000, &mut s).unwrap() {
                assert!(x.attempts >= 1 && x.attempts <= x.slots);
            }
        }
    }

    #[test]
    fn mixture_is_weighted_average() {
        let users = UserCountDistribution::truncated_geometric(3.0, 9).unwrap();
        let p = SlottedModelParams::new(LN2, users).unwrap();
        for t in [1u64, 4, 17, 250] {
            for which in [SlottedQuantity::Slots, SlottedQuantity::Attempts] {
                let direct: f64 = (1..=9)
                    .map(|m| users.pmf(m) * conditional_ccdf(t, which, m, LN2))
                    .sum();
                assert!((ccdf_slotted(t, which, &p) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_is_monotone_in_cap() {
        let ccdf_for = |cap: u32, t: u64| {
            let users = UserCountDistribution::truncated_geometric(3.0, cap).unwrap();
            ccdf_slotted(
                t,
                SlottedQuantity::Slots,
                &SlottedModelParams::new(LN2, users).unwrap(),
            )
        };
        for t in [1u64, 3, 10, 40, 200, 1000, 5000] {
            for cap in 1..20 {
                assert!(ccdf_for(cap, t) <= ccdf_for(cap + 1, t) + 1e-15);
            }
        }
    }

    #[test]
    fn two_user_slot_simulation_matches_formulas() {
        let mut s = RandomStream::new(77, 0);
        let sim = simulate_slotted(&fixed(2), 100_000, &mut s).unwrap();
        let n = sim.len() as f64;
        let p_n1 = sim.iter().filter(|x| x.attempts > 1).count() as f64 / n;
        let p_t1 = sim.iter().filter(|x| x.slots > 1).count() as f64 / n;
        assert!((p_n1 / (1.0 / 3.0) - 1.0).abs() < 0.05, "{p_n1}");
        assert!((p_t1 / 0.5 - 1.0).abs() < 0.03, "{p_t1}");
    }
}
