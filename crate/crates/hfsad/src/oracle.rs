//! Brute-force reference minimizers used by the verification suites.
//!
//! Everything here solves the same subproblems as the closed-form proximal
//! operators, but by dense grid scan plus golden-section refinement, with
//! no shared code path, so the two routes check each other.

use crate::prox::{golden_section, mcp_value, project_box, scad_value, BoxDomain};
use crate::smoothing::smoothed_abs;
use crate::vecops::{dot, norm1, sq_norm};

/// Minimizes `f` on `[lo, hi]` by scanning at `resolution` and refining the
/// best cell (including both neighbors) with golden section to 1e-12.
pub fn brute_force_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, resolution: f64) -> f64 {
    assert!(hi > lo && resolution > 0.0);
    let steps = ((hi - lo) / resolution).ceil() as usize;
    let mut best_i = 0usize;
    let mut best_val = f(lo);
    for i in 1..=steps {
        let v = f(lo + (hi - lo) * i as f64 / steps as f64);
        if v < best_val {
            best_val = v;
            best_i = i;
        }
    }
    let cell = (hi - lo) / steps as f64;
    let a = lo + cell * best_i.saturating_sub(1) as f64;
    let b = (lo + cell * (best_i + 1) as f64).min(hi);
    golden_section(f, a, b, 1e-12)
}

fn prox_bracket(w: f64) -> (f64, f64) {
    let r = w.abs() + 1.0;
    (-r, r)
}

pub fn oracle_soft_threshold(w: f64, t: f64) -> f64 {
    let obj = |v: f64| t * v.abs() + 0.5 * (v - w) * (v - w);
    let (lo, hi) = prox_bracket(w);
    brute_force_min(&obj, lo, hi, 1e-4)
}

pub fn oracle_prox_scad(w: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    let obj = |v: f64| scad_value(v, lambda, gamma) + (v - w) * (v - w) / (2.0 * step);
    let (lo, hi) = prox_bracket(w);
    brute_force_min(&obj, lo, hi, 1e-4)
}

pub fn oracle_prox_mcp(w: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    let obj = |v: f64| mcp_value(v, lambda, gamma) + (v - w) * (v - w) / (2.0 * step);
    let (lo, hi) = prox_bracket(w);
    brute_force_min(&obj, lo, hi, 1e-4)
}

pub fn oracle_prox_smoothed(u: f64, weight: f64, mu: f64, step: f64) -> f64 {
    let obj = |v: f64| weight * smoothed_abs(v, mu) + (v - u) * (v - u) / (2.0 * step);
    let (lo, hi) = prox_bracket(u);
    brute_force_min(&obj, lo, hi, 1e-4)
}

/// Two-stage reference for the phase-retrieval prox: a dense scalar scan
/// over `u = x' w`, then the rank-one reconstruction and box projection.
pub fn oracle_prox_phase_retrieval(
    v: &[f64],
    x: &[f64],
    y: f64,
    step: f64,
    box_dom: BoxDomain,
    resolution: f64,
) -> Vec<f64> {
    let s = sq_norm(x);
    if s == 0.0 {
        return project_box(v, box_dom);
    }
    let a = dot(x, v);
    let obj = |u: f64| (y - u * u).abs() + (u - a) * (u - a) / (2.0 * step * s);
    let r = box_dom.bound * norm1(x) + 1.0;
    let u = brute_force_min(&obj, -r, r, resolution);
    let scale = (u - a) / s;
    let w: Vec<f64> = v.iter().zip(x).map(|(&vi, &xi)| vi + scale * xi).collect();
    project_box(&w, box_dom)
}
