//! Reduced self-verification suite behind `hfsad verify`: each check prints
//! one PASS/FAIL line and the whole suite reports an overall verdict.

use rand::Rng;

use crate::engine::joint_zq_update;
use crate::oracle::{
    oracle_prox_mcp, oracle_prox_phase_retrieval, oracle_prox_scad, oracle_prox_smoothed,
    oracle_soft_threshold,
};
use crate::prox::{
    prox_mcp, prox_phase_retrieval_loss, prox_scad, prox_smoothed_penalty, soft_threshold,
    BoxDomain, PenaltySpec,
};
use crate::smoothing::ScheduleParams;
use crate::stream::{derive_rng, Purpose};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.1e})"),
    }
}

/// Runs all checks with small case counts (the full-size suites live in the
/// test harness) and returns them for printing.
pub fn run_checks() -> Vec<Check> {
    let mut rng = derive_rng(0xfeed, 0, 0, Purpose::Data);
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let w = rng.random_range(-4.0..4.0);
        let t = rng.random_range(0.0..2.0);
        worst = worst.max((soft_threshold(w, t) - oracle_soft_threshold(w, t)).abs());
    }
    checks.push(check("soft-threshold prox vs brute force", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let w = rng.random_range(-4.0..4.0);
        let lambda = rng.random_range(0.01..1.0);
        let gamma = rng.random_range(2.01..5.0);
        let step = rng.random_range(0.01..6.0);
        let got = prox_scad(w, lambda, gamma, step);
        let want = oracle_prox_scad(w, lambda, gamma, step);
        worst = worst.max((got - want).abs());
    }
    checks.push(check("SCAD prox vs brute force", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let w = rng.random_range(-4.0..4.0);
        let lambda = rng.random_range(0.01..1.0);
        let gamma = rng.random_range(1.01..5.0);
        let step = rng.random_range(0.01..6.0);
        let got = prox_mcp(w, lambda, gamma, step);
        let want = oracle_prox_mcp(w, lambda, gamma, step);
        worst = worst.max((got - want).abs());
    }
    checks.push(check("MCP prox vs brute force", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let u = rng.random_range(-4.0..4.0);
        let weight = rng.random_range(0.0..3.0);
        let mu = rng.random_range(1e-4..1.0);
        let step = rng.random_range(0.01..5.0);
        let spec = PenaltySpec::l1(1.0, weight);
        let got = prox_smoothed_penalty(u, &spec, mu, step);
        let want = oracle_prox_smoothed(u, weight, mu, step);
        worst = worst.max((got - want).abs());
    }
    checks.push(check("smoothed-coupling prox vs brute force", worst, 1e-6));

    let mut worst: f64 = 0.0;
    let box_dom = BoxDomain { bound: 5.0 };
    for _ in 0..50 {
        let m = 3;
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y = rng.random_range(0.0..8.0);
        let step = rng.random_range(0.05..3.0);
        let got = prox_phase_retrieval_loss(&v, &x, y, step, box_dom);
        let want = oracle_prox_phase_retrieval(&v, &x, y, step, box_dom, 1e-5);
        let dev = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    checks.push(check("phase-retrieval prox vs brute force", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = 4;
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let rc = PenaltySpec::l1(1.0, rng.random_range(0.0..3.0));
        let mu = rng.random_range(1e-4..0.5);
        let sigma = rng.random_range(0.1..10.0);
        let (z, q) = joint_zq_update(&a, &b, &rc, mu, sigma);
        for i in 0..m {
            worst = worst.max((z[i] + q[i] - a[i] - b[i]).abs());
        }
    }
    checks.push(check(
        "joint-update conservation z + q = a + b",
        worst,
        1e-12,
    ));

    let sched = ScheduleParams {
        c: 2.5,
        d: 1.25,
        alpha: 3.0,
        beta: 0.5,
    };
    let mut worst: f64 = 0.0;
    for &k in &[1u64, 2, 10, 1_000, 1_000_000] {
        let kf = k as f64;
        let (sigma, mu) = sched.client(k);
        worst = worst.max((sigma - 2.5 * kf.sqrt()).abs());
        worst = worst.max((mu - 3.0 / kf.sqrt()).abs());
        let (sigma, mu) = sched.cluster(k);
        worst = worst.max((sigma - 1.25 * kf.sqrt()).abs());
        worst = worst.max((mu - 0.5 / kf.sqrt()).abs());
    }
    checks.push(check("sqrt-law schedule exactness", worst, 0.0));

    checks
}

/// Prints one line per check; returns true when everything passed.
pub fn verify() -> bool {
    let checks = run_checks();
    let mut all = true;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} — {}", c.name, c.detail);
        all &= c.passed;
    }
    println!(
        "{} ({}/{} checks passed)",
        if all { "OK" } else { "FAILED" },
        checks.iter().filter(|c| c.passed).count(),
        checks.len()
    );
    all
}
