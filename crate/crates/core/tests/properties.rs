use approx::assert_relative_eq;
use proptest::prelude::*;

use rsmooth_core::analysis::{
    critical_lambda, exp_seq_count, exp_seq_count_iterated, h_lambda, h_lambda_root, h_lambda_slope,
};
use rsmooth_core::numerics::linalg::{dist, dot, norm, norm_scaled, scaled};
use rsmooth_core::oracles::{draw_coordinate_rademacher, draw_scaling_dropout, draw_two_point, ZeroSelector};
use rsmooth_core::{ExtendedScalar, OptimizerConfig, RandomStream, StepSizeFn};

fn vec_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e3..1e3f64, n),
            prop::collection::vec(-1e3..1e3f64, n),
        )
    })
}

proptest! {
    #[test]
    fn triangle_and_cauchy_schwarz((x, y) in vec_pair(16)) {
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(norm(&s) <= (norm(&x) + norm(&y)) * (1.0 + 1e-12));
        prop_assert!(dot(&x, &y).abs() <= norm(&x) * norm(&y) * (1.0 + 1e-12) + 1e-300);
        prop_assert!((dist(&x, &y) - dist(&y, &x)).abs() <= 1e-12 * dist(&x, &y));
    }

    #[test]
    fn norm_is_homogeneous((x, _y) in vec_pair(16), c in -1e3..1e3f64) {
        let lhs = norm(&scaled(&x, c));
        prop_assert!((lhs - c.abs() * norm(&x)).abs() <= 1e-12 * lhs.max(1e-300));
    }

    #[test]
    fn scaled_norm_survives_extreme_magnitudes((x, _y) in vec_pair(8), e in -300i32..300) {
        prop_assume!(norm(&x) > 0.0);
        let s = 10f64.powi(e);
        let big = scaled(&x, s);
        prop_assume!(big.iter().all(|v| v.is_finite()));
        let n = norm_scaled(&big);
        prop_assert!(n.is_finite() && n > 0.0);
        prop_assert!((n / (norm(&x) * s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extended_matches_f64_products(a in -1e100..1e100f64, b in -1e100..1e100f64) {
        let (ea, eb) = (ExtendedScalar::from_f64(a).unwrap(), ExtendedScalar::from_f64(b).unwrap());
        let p = ea.mul(eb).to_f64();
        prop_assert!((p - a * b).abs() <= 1e-12 * (a * b).abs());
        if b != 0.0 {
            let q = ea.div(eb).unwrap().to_f64();
            prop_assert!((q - a / b).abs() <= 1e-12 * (a / b).abs());
        }
        prop_assert_eq!(ea.partial_cmp(&eb), a.partial_cmp(&b));
    }

    #[test]
    fn extended_sums_and_roots(a in 0.0..1e200f64, b in 0.0..1e200f64) {
        let (ea, eb) = (ExtendedScalar::from_f64(a).unwrap(), ExtendedScalar::from_f64(b).unwrap());
        let s = ea.add_same_sign(eb).unwrap().to_f64();
        prop_assert!((s - (a + b)).abs() <= 1e-12 * (a + b));
        let r = ea.sqrt().unwrap().to_f64();
        prop_assert!((r - a.sqrt()).abs() <= 1e-12 * a.sqrt());
        let n = ea.neg().add_same_sign(eb.neg()).unwrap().to_f64();
        prop_assert!((n + (a + b)).abs() <= 1e-12 * (a + b));
    }

    #[test]
    fn extended_powers_stay_ordered(l in -1e6..1e6f64, n in 1i32..1000) {
        let x = ExtendedScalar::from_log(1, l).unwrap();
        let y = x.pow_int(n).unwrap();
        prop_assert!((y.logmag() - f64::from(n) * l).abs() <= 1e-9 * (f64::from(n) * l).abs().max(1.0));
        prop_assert_eq!(y > x, l > 0.0 && n > 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_count_matches_iteration(
        a0 in 1e-3..10.0f64,
        r in 1.01..5.0f64,
        bfrac in -0.9..3.0f64,
        growth in 0.0..14.0f64,
    ) {
        let b = bfrac * a0 * (r - 1.0);
        let big_a = a0 * 10f64.powf(growth);
        let k = exp_seq_count(a0, r, b, big_a).unwrap();
        let it = exp_seq_count_iterated(a0, r, b, big_a, 1_000_000).unwrap();
        prop_assert_eq!(Some(k), it, "a0={} r={} b={} A={}", a0, r, b, big_a);
    }
}

proptest! {
    #[test]
    fn martingale_root_is_accurate(p in 0.51..0.97f64, stretch in 1.01..30.0f64, tol_exp in 3.0..12.0f64) {
        let lambda = critical_lambda(p) * stretch;
        let tol = 10f64.powf(-tol_exp);
        let r = h_lambda_root(p, lambda, tol).unwrap();
        prop_assert!(r > 0.0 && r < 1.0);
        let h = h_lambda(p, lambda, r).abs();
        let slope = h_lambda_slope(p, lambda, r).abs();
        prop_assert!(h <= 10.0 * tol * slope, "h={} slope={} tol={}", h, slope, tol);
    }

    #[test]
    fn roots_decrease_with_lambda(p in 0.51..0.97f64, s1 in 1.05..10.0f64, ds in 0.05..10.0f64) {
        let c = critical_lambda(p);
        let r1 = h_lambda_root(p, c * s1, 1e-12).unwrap();
        let r2 = h_lambda_root(p, c * (s1 + ds), 1e-12).unwrap();
        prop_assert!(r2 < r1);
    }

    #[test]
    fn streams_replay_and_stay_in_unit_interval(seed in any::<u64>(), off in 0u64..1 << 50, i in 0u64..1000) {
        let s = RandomStream::new(seed);
        let u = s.uniform_at(off);
        prop_assert!((0.0..1.0).contains(&u));
        prop_assert_eq!(u.to_bits(), RandomStream::new(seed).uniform_at(off).to_bits());
        prop_assert_eq!(s.split(i).uniform_at(off).to_bits(), s.split(i).uniform_at(off).to_bits());
    }
}

/// Midpoints of `n` equal strata of `[0, 1)`: averages over them are exact
/// expectations for oracles that threshold `u`.
fn strata(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}

fn mean_draw(n: usize, draw: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for u in strata(n) {
        let d = draw(u);
        if acc.is_empty() {
            acc = vec![0.0; d.len()];
        }
        for (a, v) in acc.iter_mut().zip(d) {
            *a += v / n as f64;
        }
    }
    acc
}

proptest! {
    #[test]
    fn rademacher_noise_is_unbiased((g, _y) in vec_pair(6), sigma in 0.0..10.0f64, zero in 0usize..6) {
        let mut x: Vec<f64> = g.iter().map(|v| v + 1.0).collect();
        let zero = zero % x.len();
        x[zero] = 0.0;
        let sel = ZeroSelector { first: 0, last: x.len(), fallback: None };
        let m = mean_draw(1000, |u| draw_coordinate_rademacher(&x, &g, sigma, sel, u).unwrap().0);
        for (a, b) in m.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs() + sigma));
        }
        let (one, _) = draw_coordinate_rademacher(&x, &g, sigma, sel, 0.3).unwrap();
        prop_assert!(dist(&one, &g) <= sigma * (1.0 + 1e-12));
    }

    #[test]
    fn scaling_dropout_is_unbiased((g, _y) in vec_pair(6), k in 1usize..20) {
        let scale = k as f64;
        let n = 100 * k;
        let m = mean_draw(n, |u| draw_scaling_dropout(&g, scale, u).unwrap());
        for (a, b) in m.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn two_point_mean_is_the_mixture((g1, g2) in vec_pair(4), p in 0.501..0.99f64) {
        let m = mean_draw(10_000, |u| draw_two_point(&g1, &g2, p, 1, u).unwrap());
        for ((a, x), y) in m.iter().zip(&g1).zip(&g2) {
            let want = p * x + (1.0 - p) * y;
            // Strata resolve p to within 1/n.
            prop_assert!((a - want).abs() <= 2e-4 * (x - y).abs() + 1e-9 * (1.0 + want.abs()));
        }
    }
}

fn adaptive_config(kind: u8, eta: f64, gamma: f64) -> OptimizerConfig {
    match kind % 4 {
        0 => OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma },
        1 => OptimizerConfig::AdaGradNorm { eta, gamma },
        2 => OptimizerConfig::AdaGrad { eta, gamma },
        _ => OptimizerConfig::DecorrelatedAdaGrad { eta, gamma },
    }
}

proptest! {
    #[test]
    fn adaptive_steps_shrink_and_accumulators_grow(
        kind in any::<u8>(),
        eta in 1e-3..10.0f64,
        gamma in 1e-3..10.0f64,
        grads in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 3), 1..30),
    ) {
        let cfg = adaptive_config(kind, eta, gamma);
        let mut st = cfg.init(&[0.0; 3]);
        let mut prev_total = 0.0;
        let mut prev_step = f64::INFINITY;
        let scalar = matches!(cfg, OptimizerConfig::DecorrelatedAdaGradNorm { .. } | OptimizerConfig::AdaGradNorm { .. });
        for g in &grads {
            let x_before = st.x.clone();
            let step = cfg.step(&mut st, g).unwrap();
            let total = st.accum.total();
            prop_assert!(total >= prev_total);
            prop_assert!(step <= eta / gamma * (1.0 + 1e-12));
            if scalar {
                // One scalar step size per update, applied along -g.
                prop_assert!(step <= prev_step * (1.0 + 1e-12));
                for ((a, b), gi) in st.x.iter().zip(&x_before).zip(g) {
                    prop_assert!((a - (b - step * gi)).abs() <= 1e-9 * (1.0 + b.abs() + (step * gi).abs()));
                }
                prev_step = step;
            }
            prev_total = total;
        }
        prop_assert_eq!(st.t, grads.len() as u64);
    }

    #[test]
    fn decorrelated_first_step_uses_gamma_only(
        eta in 1e-3..10.0f64,
        gamma in 1e-3..10.0f64,
        g in prop::collection::vec(-100.0..100.0f64, 1..5),
    ) {
        let cfg = OptimizerConfig::DecorrelatedAdaGradNorm { eta, gamma };
        let mut st = cfg.init(&vec![0.0; g.len()]);
        let step = cfg.step(&mut st, &g).unwrap();
        assert_relative_eq!(step, eta / gamma, max_relative = 1e-14);
    }

    #[test]
    fn clip_and_normalized_step_lengths(
        eta in 1e-3..10.0f64,
        c in 1e-3..10.0f64,
        g in prop::collection::vec(-100.0..100.0f64, 1..5),
    ) {
        prop_assume!(norm(&g) > 1e-6);
        for (alpha, exact) in [(StepSizeFn::Clip { eta, c }, false), (StepSizeFn::Normalized { c }, true)] {
            let cfg = OptimizerConfig::SingleStep { alpha };
            let mut st = cfg.init(&vec![0.0; g.len()]);
            cfg.step(&mut st, &g).unwrap();
            let moved = norm(&st.x);
            prop_assert!(moved <= c * (1.0 + 1e-12));
            if exact {
                prop_assert!((moved - c).abs() <= 1e-12 * c);
            }
        }
    }
}
