//! Scalar and vector proximal operators for the penalties and losses used by
//! the solver: soft thresholding, SCAD, MCP, the smoothed total-variation
//! penalty, and the exact prox of the robust phase-retrieval loss.
//!
//! All operators minimize `p(v) + (1/(2*step)) * (v - w)^2`. Non-convex
//! subproblems (SCAD/MCP with large steps) are handled by enumerating the
//! stationary candidates of every piece plus the region boundaries and
//! returning the best, so the result is a global minimizer for any step.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Shape of a separable sparsity penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    L1,
    Scad,
    Mcp,
}

/// A separable penalty `weight * sum_m p(|w_m|)` with shape parameters
/// `(lambda, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub gamma: f64,
    pub weight: f64,
}

impl PenaltySpec {
    pub fn none() -> Self {
        PenaltySpec {
            kind: PenaltyKind::None,
            lambda: 0.0,
            gamma: 2.0,
            weight: 0.0,
        }
    }

    pub fn l1(lambda: f64, weight: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::L1,
            lambda,
            gamma: 2.0,
            weight,
        }
    }

    pub fn scad(lambda: f64, gamma: f64, weight: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Scad,
            lambda,
            gamma,
            weight,
        }
    }

    pub fn mcp(lambda: f64, gamma: f64, weight: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Mcp,
            lambda,
            gamma,
            weight,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidPenalty("lambda must be nonnegative".into()));
        }
        if !(self.weight >= 0.0) {
            return Err(Error::InvalidPenalty("weight must be nonnegative".into()));
        }
        match self.kind {
            PenaltyKind::Scad if !(self.gamma > 2.0) => {
                Err(Error::InvalidPenalty("SCAD requires gamma > 2".into()))
            }
            PenaltyKind::Mcp if !(self.gamma > 1.0) => {
                Err(Error::InvalidPenalty("MCP requires gamma > 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Symmetric box `[-bound, bound]^M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub bound: f64,
}

impl BoxDomain {
    pub fn new(bound: f64) -> Result<Self, Error> {
        if !(bound > 0.0) {
            return Err(Error::InvalidPenalty("box bound must be positive".into()));
        }
        Ok(BoxDomain { bound })
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.iter().all(|&v| v.abs() <= self.bound)
    }
}

/// `sign(w) * max(|w| - t, 0)`, the prox of `t * |.|`.
pub fn soft_threshold(w: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    w.signum() * (w.abs() - t).max(0.0)
}

/// SCAD penalty of a scalar magnitude `t >= 0` (Fan–Li parameterization).
pub fn scad_value(t: f64, lambda: f64, gamma: f64) -> f64 {
    let t = t.abs();
    if t <= lambda {
        lambda * t
    } else if t <= gamma * lambda {
        (2.0 * gamma * lambda * t - t * t - lambda * lambda) / (2.0 * (gamma - 1.0))
    } else {
        lambda * lambda * (gamma + 1.0) / 2.0
    }
}

/// Derivative of the SCAD penalty w.r.t. the magnitude, for `t >= 0`.
pub fn scad_derivative(t: f64, lambda: f64, gamma: f64) -> f64 {
    let t = t.abs();
    if t <= lambda {
        lambda
    } else if t <= gamma * lambda {
        (gamma * lambda - t) / (gamma - 1.0)
    } else {
        0.0
    }
}

/// MCP penalty of a scalar magnitude (Zhang parameterization).
pub fn mcp_value(t: f64, lambda: f64, gamma: f64) -> f64 {
    let t = t.abs();
    if t <= gamma * lambda {
        lambda * t - t * t / (2.0 * gamma)
    } else {
        gamma * lambda * lambda / 2.0
    }
}

fn scad_prox_objective(v: f64, t: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    scad_value(v, lambda, gamma) + (v - t) * (v - t) / (2.0 * step)
}

/// Global minimizer of `P_scad(v) + (1/(2*step)) (v - w)^2`.
///
/// Candidates: the stationary point of each of the three pieces clamped to
/// its region, plus the region boundaries. For steps large enough to make
/// the middle piece concave this still returns the global minimizer.
pub fn prox_scad(w: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    assert!(gamma > 2.0, "SCAD prox requires gamma > 2");
    assert!(lambda >= 0.0 && step > 0.0);
    if lambda == 0.0 {
        return w;
    }
    let t = w.abs();
    let mut candidates = [0.0f64; 5];
    // piece 1: lambda * v on [0, lambda]
    candidates[0] = soft_threshold(t, step * lambda).clamp(0.0, lambda);
    // piece 2: quadratic on [lambda, gamma*lambda]
    let denom = gamma - 1.0 - step;
    candidates[1] = if denom.abs() > 1e-14 {
        ((t * (gamma - 1.0) - step * gamma * lambda) / denom).clamp(lambda, gamma * lambda)
    } else {
        lambda
    };
    candidates[2] = gamma * lambda;
    // piece 3: flat beyond gamma*lambda
    candidates[3] = t.max(gamma * lambda);
    candidates[4] = lambda;

    let mut best = candidates[0];
    let mut best_val = scad_prox_objective(best, t, lambda, gamma, step);
    for &cand in &candidates[1..] {
        let val = scad_prox_objective(cand, t, lambda, gamma, step);
        if val < best_val {
            best = cand;
            best_val = val;
        }
    }
    w.signum() * best
}

fn mcp_prox_objective(v: f64, t: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    mcp_value(v, lambda, gamma) + (v - t) * (v - t) / (2.0 * step)
}

/// Global minimizer of `P_mcp(v) + (1/(2*step)) (v - w)^2`, by the same
/// candidate enumeration as [`prox_scad`].
pub fn prox_mcp(w: f64, lambda: f64, gamma: f64, step: f64) -> f64 {
    assert!(gamma > 1.0, "MCP prox requires gamma > 1");
    assert!(lambda >= 0.0 && step > 0.0);
    if lambda == 0.0 {
        return w;
    }
    let t = w.abs();
    let denom = gamma - step;
    let mut candidates = [0.0f64; 4];
    // inner piece on [0, gamma*lambda]
    candidates[0] = if denom.abs() > 1e-14 {
        (gamma * (t - step * lambda) / denom).clamp(0.0, gamma * lambda)
    } else {
        0.0
    };
    candidates[1] = 0.0;
    candidates[2] = gamma * lambda;
    // flat piece
    candidates[3] = t.max(gamma * lambda);

    let mut best = candidates[0];
    let mut best_val = mcp_prox_objective(best, t, lambda, gamma, step);
    for &cand in &candidates[1..] {
        let val = mcp_prox_objective(cand, t, lambda, gamma, step);
        if val < best_val {
            best = cand;
            best_val = val;
        }
    }
    w.signum() * best
}

/// Unique minimizer of `weight * sqrt(v^2 + mu^2) + (1/(2*step)) (v - u)^2`,
/// the prox of the smoothed absolute value. Solved by safeguarded Newton on
/// the stationarity equation, bracketed on `[0, |u|]`.
pub fn prox_smoothed_penalty_scalar(u: f64, weight: f64, mu: f64, step: f64) -> f64 {
    assert!(
        mu > 0.0,
        "mu must be positive; use soft_threshold for mu = 0"
    );
    assert!(step > 0.0 && weight >= 0.0);
    if weight == 0.0 || u == 0.0 {
        return u;
    }
    let s = u.abs();
    // phi(v) = weight * v / sqrt(v^2 + mu^2) + (v - s) / step, strictly increasing.
    let phi = |v: f64| weight * v / (v * v + mu * mu).sqrt() + (v - s) / step;
    let dphi = |v: f64| {
        let r = v * v + mu * mu;
        weight * mu * mu / (r * r.sqrt()) + 1.0 / step
    };
    let (mut lo, mut hi) = (0.0f64, s);
    let mut v = s / (1.0 + weight * step / (s * s + mu * mu).sqrt());
    for _ in 0..200 {
        let f = phi(v);
        if f > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let mut next = v - f / dphi(v);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-12 {
            v = next;
            break;
        }
        v = next;
    }
    u.signum() * v
}

/// Prox of the smoothed penalty `weight * p(sqrt(v^2 + mu^2))` for any
/// [`PenaltySpec`]. The L1/TV shape uses the Newton path; SCAD/MCP shapes
/// fall back to a grid plus golden-section search on `[0, |u|]` since the
/// smoothed subproblem may be multimodal.
pub fn prox_smoothed_penalty(u: f64, spec: &PenaltySpec, mu: f64, step: f64) -> f64 {
    if spec.weight == 0.0 || u == 0.0 {
        return u;
    }
    match spec.kind {
        PenaltyKind::None => u,
        PenaltyKind::L1 => prox_smoothed_penalty_scalar(u, spec.weight * spec.lambda, mu, step),
        PenaltyKind::Scad | PenaltyKind::Mcp => {
            let pen = |t: f64| -> f64 {
                let smoothed = (t * t + mu * mu).sqrt();
                match spec.kind {
                    PenaltyKind::Scad => {
                        spec.weight * scad_value(smoothed, spec.lambda, spec.gamma)
                    }
                    _ => spec.weight * mcp_value(smoothed, spec.lambda, spec.gamma),
                }
            };
            let s = u.abs();
            let obj = |v: f64| pen(v) + (v - s) * (v - s) / (2.0 * step);
            let v = minimize_grid_golden(obj, 0.0, s, 256, 1e-12);
            u.signum() * v
        }
    }
}

/// Componentwise clamp onto the box.
pub fn project_box(w: &[f64], box_dom: BoxDomain) -> Vec<f64> {
    w.iter()
        .map(|&v| v.clamp(-box_dom.bound, box_dom.bound))
        .collect()
}

/// `weight * sum_m p(|w_m|)` for the chosen penalty shape.
pub fn penalty_value(spec: &PenaltySpec, w: &[f64]) -> f64 {
    if spec.kind == PenaltyKind::None || spec.weight == 0.0 {
        return 0.0;
    }
    let sum: f64 = w
        .iter()
        .map(|&v| {
            let t = v.abs();
            match spec.kind {
                PenaltyKind::None => 0.0,
                PenaltyKind::L1 => spec.lambda * t,
                PenaltyKind::Scad => scad_value(t, spec.lambda, spec.gamma),
                PenaltyKind::Mcp => mcp_value(t, spec.lambda, spec.gamma),
            }
        })
        .sum();
    spec.weight * sum
}

/// Componentwise prox of `weight * sum p(|v_m|)` with step `step`; the
/// weight is folded into the effective step so the scalar ops stay
/// shape-pure.
pub fn prox_penalty_vec(spec: &PenaltySpec, r: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0);
    match spec.kind {
        PenaltyKind::None => r.to_vec(),
        PenaltyKind::L1 => r
            .iter()
            .map(|&v| soft_threshold(v, step * spec.weight * spec.lambda))
            .collect(),
        PenaltyKind::Scad => {
            if spec.weight == 0.0 {
                return r.to_vec();
            }
            let eff_step = step * spec.weight;
            r.iter()
                .map(|&v| prox_scad(v, spec.lambda, spec.gamma, eff_step))
                .collect()
        }
        PenaltyKind::Mcp => {
            if spec.weight == 0.0 {
                return r.to_vec();
            }
            let eff_step = step * spec.weight;
            r.iter()
                .map(|&v| prox_mcp(v, spec.lambda, spec.gamma, eff_step))
                .collect()
        }
    }
}

/// Exact prox of the robust phase-retrieval loss
/// `|y - (x' w)^2| + (1/(2*step)) ||w - v||^2`, followed by projection onto
/// the box. The vector problem reduces to a scalar problem in `u = x' w`
/// along the direction of `x`; the global scalar minimizer is found by
/// enumerating the kinks `u = ±sqrt(y)` and the stationary points of the two
/// smooth pieces.
///
/// Composing the exact (box-free) prox with the projection is an
/// approximation of the prox of loss-plus-indicator; it preserves
/// boundedness of the iterates, which is what matters downstream.
pub fn prox_phase_retrieval_loss(
    v: &[f64],
    x: &[f64],
    y: f64,
    step: f64,
    box_dom: BoxDomain,
) -> Vec<f64> {
    assert!(step > 0.0);
    assert_eq!(v.len(), x.len());
    let s: f64 = x.iter().map(|&c| c * c).sum();
    if s == 0.0 {
        // loss ignores w entirely
        return project_box(v, box_dom);
    }
    let a: f64 = x.iter().zip(v).map(|(&xi, &vi)| xi * vi).sum();
    let ts = step * s;
    let h = |u: f64| (y - u * u).abs() + (u - a) * (u - a) / (2.0 * ts);

    let mut candidates: Vec<f64> = Vec::with_capacity(4);
    if y >= 0.0 {
        let r = y.sqrt();
        candidates.push(r);
        candidates.push(-r);
        // inner piece u^2 < y: convex only when 2*ts < 1
        let denom = 1.0 - 2.0 * ts;
        if denom > 0.0 {
            let u = a / denom;
            if u * u <= y {
                candidates.push(u);
            }
        }
    }
    // outer piece u^2 > y (the whole line when y < 0): always convex
    let u_out = a / (1.0 + 2.0 * ts);
    if u_out * u_out >= y {
        candidates.push(u_out);
    }
    if candidates.is_empty() {
        candidates.push(u_out);
    }

    let mut best = candidates[0];
    let mut best_val = h(best);
    for &c in &candidates[1..] {
        let val = h(c);
        if val < best_val {
            best = c;
            best_val = val;
        }
    }
    let scale = (best - a) / s;
    let w: Vec<f64> = v.iter().zip(x).map(|(&vi, &xi)| vi + scale * xi).collect();
    project_box(&w, box_dom)
}

/// Grid scan followed by golden-section refinement of a 1-D function on
/// `[lo, hi]`.
pub fn minimize_grid_golden<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> f64 {
    debug_assert!(hi >= lo && grid >= 2);
    let step = (hi - lo) / grid as f64;
    let mut best_i = 0usize;
    let mut best_val = f(lo);
    for i in 1..=grid {
        let v = f(lo + step * i as f64);
        if v < best_val {
            best_val = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    golden_section(&f, a, b, tol)
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_basics() {
        assert_eq!(soft_threshold(0.0, 0.5), 0.0);
        assert!((soft_threshold(1.0, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.2, 0.3), 0.0);
        assert!((soft_threshold(-1.0, 0.25) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn scad_prox_regions() {
        // zero fixed point
        assert_eq!(prox_scad(0.0, 0.1, 2.4, 1.0), 0.0);
        // |w| <= lambda * step shrinks to zero
        assert_eq!(prox_scad(0.05, 0.1, 2.4, 1.0), 0.0);
        // beyond gamma*lambda the penalty is flat: identity
        assert!((prox_scad(1.0, 0.1, 2.4, 1.0) - 1.0).abs() < 1e-12);
        assert!((prox_scad(-1.0, 0.1, 2.4, 1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scad_prox_rejects_bad_gamma() {
        let r = std::panic::catch_unwind(|| prox_scad(1.0, 0.1, 1.5, 1.0));
        assert!(r.is_err());
    }

    #[test]
    fn mcp_prox_regions() {
        assert_eq!(prox_mcp(0.0, 0.1, 3.0, 1.0), 0.0);
        assert!((prox_mcp(2.0, 0.1, 3.0, 1.0) - 2.0).abs() < 1e-12);
        let r = std::panic::catch_unwind(|| prox_mcp(1.0, 0.1, 0.9, 1.0));
        assert!(r.is_err());
    }

    #[test]
    fn smoothed_prox_trivial_cases() {
        assert_eq!(prox_smoothed_penalty_scalar(0.0, 1.0, 0.01, 0.5), 0.0);
        assert_eq!(prox_smoothed_penalty_scalar(1.7, 0.0, 0.01, 0.5), 1.7);
        let r = std::panic::catch_unwind(|| prox_smoothed_penalty_scalar(1.0, 1.0, 0.0, 0.5));
        assert!(r.is_err());
    }

    #[test]
    fn smoothed_prox_stationarity() {
        let (u, w, mu, step) = (1.0, 1.0, 0.01, 0.5);
        let v = prox_smoothed_penalty_scalar(u, w, mu, step);
        let resid = w * v / (v * v + mu * mu).sqrt() + (v - u) / step;
        assert!(resid.abs() < 1e-9, "stationarity residual {resid}");
        assert!(v.abs() <= u.abs() && v > 0.0);
    }

    #[test]
    fn phase_retrieval_prox_trivial() {
        let b = BoxDomain::new(5.0).unwrap();
        // v = 0 is the global minimizer for y = 0
        let w = prox_phase_retrieval_loss(&[0.0, 0.0], &[1.0, 0.0], 0.0, 1.0, b);
        assert_eq!(w, vec![0.0, 0.0]);
        // loss already zero at x'v = sqrt(y): identity up to box
        let v = vec![2.0, 1.0];
        let x = vec![1.0, 0.0];
        let y = 4.0;
        let w = prox_phase_retrieval_loss(&v, &x, y, 1.0, b);
        for (wi, vi) in w.iter().zip(&v) {
            assert!((wi - vi).abs() < 1e-12);
        }
        // all-zero x: box projection of v
        let w = prox_phase_retrieval_loss(&[6.0, -7.0], &[0.0, 0.0], 1.0, 1.0, b);
        assert_eq!(w, vec![5.0, -5.0]);
    }

    #[test]
    fn project_box_clamps() {
        let b = BoxDomain::new(5.0).unwrap();
        assert_eq!(project_box(&[6.0, -7.0], b), vec![5.0, -5.0]);
        let interior = vec![1.0, -4.9, 0.0];
        assert_eq!(project_box(&interior, b), interior);
        // idempotent
        let once = project_box(&[8.0, 2.0], b);
        assert_eq!(project_box(&once, b), once);
    }

    #[test]
    fn penalty_plateaus() {
        let m = 4usize;
        let (lambda, gamma) = (0.1, 2.4);
        let w = vec![1.0; m];
        let spec = PenaltySpec::scad(lambda, gamma, 2.0);
        let expect = 2.0 * m as f64 * lambda * lambda * (gamma + 1.0) / 2.0;
        assert!((penalty_value(&spec, &w) - expect).abs() < 1e-12);

        let spec = PenaltySpec::mcp(lambda, 3.0, 2.0);
        let expect = 2.0 * m as f64 * 3.0 * lambda * lambda / 2.0;
        assert!((penalty_value(&spec, &w) - expect).abs() < 1e-12);

        assert_eq!(penalty_value(&PenaltySpec::l1(0.3, 1.0), &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn penalty_spec_validation() {
        assert!(PenaltySpec::scad(0.1, 2.4, 1.0).validate().is_ok());
        assert!(PenaltySpec::scad(0.1, 2.0, 1.0).validate().is_err());
        assert!(PenaltySpec::mcp(0.1, 1.0, 1.0).validate().is_err());
        assert!(PenaltySpec::l1(-0.1, 1.0).validate().is_err());
        assert!(PenaltySpec::l1(0.1, -1.0).validate().is_err());
    }
}
