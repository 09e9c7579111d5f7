use aloha_core::bounds::{bound_ccdf, BoundKind};
use aloha_core::slotted::sample_conditional_geometric;
use aloha_core::stability::classify_finite;
use aloha_core::tail::{empirical_ccdf, fit_loglog_slope, hill_estimator, CcdfPoints, Window};
use aloha_core::{FiniteModelParams, PacketDistribution, RandomStream, UserCountDistribution};
use proptest::prelude::*;

fn packet() -> impl Strategy<Value = PacketDistribution> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|r| PacketDistribution::exponential(r).unwrap()),
        (0.1f64..5.0).prop_map(|c| PacketDistribution::constant(c).unwrap()),
        (0.1f64..5.0, 0.5f64..10.0)
            .prop_map(|(r, b)| PacketDistribution::truncated_exponential(r, b).unwrap()),
        (0.3f64..5.0, 0.2f64..5.0).prop_map(|(k, r)| PacketDistribution::gamma(k, r).unwrap()),
    ]
}

fn users() -> impl Strategy<Value = UserCountDistribution> {
    prop_oneof![
        (1u32..50).prop_map(|m| UserCountDistribution::fixed(m).unwrap()),
        (1.1f64..20.0).prop_map(|m| UserCountDistribution::geometric(m).unwrap()),
        (1.1f64..20.0, 1u32..30)
            .prop_map(|(m, k)| UserCountDistribution::truncated_geometric(m, k).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packet_ccdf_is_a_survival_function(d in packet(), a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p, q) = (d.ccdf(lo), d.ccdf(hi));
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        prop_assert!(q <= p + 1e-15);
    }

    #[test]
    fn packets_are_positive(d in packet(), seed in any::<u64>()) {
        let mut s = RandomStream::new(seed, 0);
        for _ in 0..100 {
            prop_assert!(d.sample(&mut s) > 0.0);
        }
    }

    #[test]
    fn user_count_pmf_sums_to_one(u in users()) {
        let total: f64 = (1..=5_000).map(|m| u.pmf(m)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        if let Some(k) = u.max_users() {
            prop_assert_eq!(u.ccdf(f64::from(k)), 0.0);
        }
    }

    #[test]
    fn bound_laws_are_ordered(
        m in 2usize..12,
        lambda in 0.1f64..5.0,
        nu in 0.1f64..5.0,
        d in packet(),
        n in 0u64..5_000,
    ) {
        let p = FiniteModelParams::new(m, lambda, nu, d).unwrap();
        let lo = bound_ccdf(BoundKind::LowerN, n, &p).unwrap().value();
        let hi = bound_ccdf(BoundKind::UpperN, n, &p).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((0.0..=1.0).contains(&hi));
        prop_assert!(lo <= hi * (1.0 + 1e-10) + 1e-300);
        let lo_next = bound_ccdf(BoundKind::LowerN, n + 1, &p).unwrap().value();
        prop_assert!(lo_next <= lo * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn exactly_one_verdict(
        m in 2usize..40,
        lambda in 0.01f64..10.0,
        nu in 0.01f64..10.0,
        mu in 0.01f64..10.0,
        c in 1e-3f64..1e3,
    ) {
        let v = classify_finite(m, lambda, nu, mu).unwrap();
        prop_assert!(!v.rule.is_empty());
        prop_assert_eq!(v, classify_finite(m, c * lambda, c * nu, c * mu).unwrap());
    }

    #[test]
    fn empirical_ccdf_shape(samples in prop::collection::vec(0.0f64..100.0, 2..300)) {
        if let Ok(points) = empirical_ccdf(&samples) {
            prop_assert!(points.x.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(points.survival.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(points.survival.iter().all(|&p| p > 0.0 && p <= 1.0));
            prop_assert_eq!(points.sample_count, samples.len());
        }
    }

    #[test]
    fn slope_is_scale_and_window_free(index in 0.2f64..4.0, c in 1e-3f64..1e3) {
        let x: Vec<f64> = (0..400).map(|i| 10f64.powf(i as f64 / 100.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powf(-index)).collect();
        let window = Window::new(1.0, 1e-300).unwrap();
        let base = fit_loglog_slope(&CcdfPoints::from_curve(x.clone(), y.clone()).unwrap(), window).unwrap();
        let scaled_x: Vec<f64> = x.iter().map(|v| v * c).collect();
        let scaled = fit_loglog_slope(&CcdfPoints::from_curve(scaled_x, y.clone()).unwrap(), window).unwrap();
        prop_assert!((base.slope + index).abs() < 1e-9);
        prop_assert!((scaled.slope - base.slope).abs() < 1e-9);
        let sub = Window::new(y[50], y[300]).unwrap();
        let part = fit_loglog_slope(&CcdfPoints::from_curve(x, y).unwrap(), sub).unwrap();
        prop_assert!((part.slope - base.slope).abs() < 1e-9);
    }

    #[test]
    fn hill_is_scale_free(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let mut s = RandomStream::new(seed, 1);
        let xs: Vec<f64> = (0..2_000).map(|_| 1.0 / s.open01()).collect();
        let scaled: Vec<f64> = xs.iter().map(|v| v * c).collect();
        let a = hill_estimator(&xs, 200).unwrap();
        let b = hill_estimator(&scaled, 200).unwrap();
        prop_assert!((a.estimate - b.estimate).abs() < 1e-9 * a.estimate.abs());
    }

    #[test]
    fn conditional_samples_are_consistent(m in 1u32..40, nu in 0.05f64..3.0, seed in any::<u64>()) {
        let mut s = RandomStream::new(seed, 2);
        for _ in 0..50 {
            let x = sample_conditional_geometric(m, nu, &mut s).unwrap();
            prop_assert!(x.attempts >= 1 && x.attempts <= x.slots);
            if m == 1 {
                prop_assert_eq!(x.attempts, 1);
            }
        }
    }

    #[test]
    fn streams_are_reproducible(master in any::<u64>(), e in any::<u64>(), r in any::<u64>()) {
        use rand::RngCore;
        let mut a = RandomStream::for_replicate(master, e, r);
        let mut b = RandomStream::for_replicate(master, e, r);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
