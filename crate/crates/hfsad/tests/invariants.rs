//! Property-based invariants of the proximal operators and schedules.

use proptest::prelude::*;

use hfsad::prox::{
    mcp_value, project_box, prox_mcp, prox_scad, prox_smoothed_penalty_scalar, scad_value,
    soft_threshold, BoxDomain,
};
use hfsad::smoothing::{smoothed_abs, ScheduleParams};

proptest! {
    // prox of a convex function is 1-Lipschitz; soft threshold specifically
    #[test]
    fn soft_threshold_nonexpansive(a in -10.0..10.0f64, b in -10.0..10.0f64, t in 0.0..5.0f64) {
        let d = (soft_threshold(a, t) - soft_threshold(b, t)).abs();
        prop_assert!(d <= (a - b).abs() + 1e-12);
    }

    #[test]
    fn soft_threshold_shrinks(w in -10.0..10.0f64, t in 0.0..5.0f64) {
        let v = soft_threshold(w, t);
        prop_assert!(v.abs() <= w.abs() + 1e-15);
        prop_assert!(v * w >= 0.0);
    }

    // prox points never increase magnitude and keep the input's sign
    #[test]
    fn scad_prox_shrinks(w in -10.0..10.0f64, lambda in 0.01..2.0f64,
                         gamma in 2.01..8.0f64, step in 0.01..10.0f64) {
        let v = prox_scad(w, lambda, gamma, step);
        prop_assert!(v.abs() <= w.abs() + 1e-12);
        prop_assert!(v * w >= 0.0);
    }

    #[test]
    fn mcp_prox_shrinks(w in -10.0..10.0f64, lambda in 0.01..2.0f64,
                        gamma in 1.01..8.0f64, step in 0.01..10.0f64) {
        let v = prox_mcp(w, lambda, gamma, step);
        prop_assert!(v.abs() <= w.abs() + 1e-12);
        prop_assert!(v * w >= 0.0);
    }

    #[test]
    fn smoothed_prox_shrinks(u in -10.0..10.0f64, weight in 0.0..5.0f64,
                             mu in 1e-6..1.0f64, step in 0.01..10.0f64) {
        let v = prox_smoothed_penalty_scalar(u, weight, mu, step);
        prop_assert!(v.abs() <= u.abs() + 1e-12);
        prop_assert!(v * u >= 0.0);
    }

    // penalties are even, nonnegative, nondecreasing in |t|
    #[test]
    fn penalties_even_monotone(t in 0.0..10.0f64, dt in 0.0..5.0f64,
                               lambda in 0.01..2.0f64, gamma in 2.01..8.0f64) {
        for f in [scad_value, mcp_value] {
            prop_assert!(f(t, lambda, gamma) >= 0.0);
            prop_assert!((f(t, lambda, gamma) - f(-t, lambda, gamma)).abs() < 1e-12);
            prop_assert!(f(t + dt, lambda, gamma) >= f(t, lambda, gamma) - 1e-12);
        }
    }

    // as step -> 0+, every prox approaches the identity
    #[test]
    fn prox_step_to_zero_is_identity(w in -5.0..5.0f64, lambda in 0.01..2.0f64,
                                     gamma in 2.01..8.0f64) {
        let step = 1e-8;
        prop_assert!((prox_scad(w, lambda, gamma, step) - w).abs() < 1e-4);
        prop_assert!((prox_mcp(w, lambda, gamma, step) - w).abs() < 1e-4);
        prop_assert!((soft_threshold(w, lambda * step) - w).abs() < 1e-4);
        prop_assert!((prox_smoothed_penalty_scalar(w, lambda, 0.1, step) - w).abs() < 1e-4);
    }

    // smoothed absolute value: |x| <= g(x; mu) <= |x| + mu
    #[test]
    fn smoothing_sandwich(x in -100.0..100.0f64, mu in 1e-9..10.0f64) {
        let g = smoothed_abs(x, mu);
        prop_assert!(g >= x.abs());
        prop_assert!(g <= x.abs() + mu);
    }

    #[test]
    fn box_projection_idempotent(v in prop::collection::vec(-20.0..20.0f64, 1..6),
                                 bound in 0.1..10.0f64) {
        let b = BoxDomain { bound };
        let p = project_box(&v, b);
        prop_assert!(b.contains(&p));
        prop_assert_eq!(project_box(&p, b), p.clone());
        // projection moves no coordinate past the original
        for (pi, vi) in p.iter().zip(&v) {
            prop_assert!(pi.abs() <= vi.abs() + 1e-15);
        }
    }

    // sigma increasing, mu decreasing, both positive
    #[test]
    fn schedule_monotone(c in 0.01..10.0f64, d in 0.01..10.0f64,
                         alpha in 0.01..10.0f64, beta in 0.01..10.0f64,
                         k in 1u64..1_000_000) {
        let s = ScheduleParams { c, d, alpha, beta };
        let (s1, m1) = s.client(k);
        let (s2, m2) = s.client(k + 1);
        prop_assert!(s1 > 0.0 && m1 > 0.0);
        prop_assert!(s2 > s1 && m2 < m1);
        let (s1, m1) = s.cluster(k);
        let (s2, m2) = s.cluster(k + 1);
        prop_assert!(s2 > s1 && m2 < m1);
    }
}
