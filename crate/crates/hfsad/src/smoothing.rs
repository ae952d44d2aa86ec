//! Penalty/smoothing parameter schedules and the checkable convergence
//! preconditions for consensus.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Growth and decay constants for the sqrt-law schedules: client penalty
/// sigma = c * sqrt(k), client smoothing mu = alpha / sqrt(k), and the
/// cluster-level pair driven by (d, beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("c", self.c),
            ("d", self.d),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidSchedule(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn client(&self, k: u64) -> (f64, f64) {
        schedule_params(k, self.c, self.alpha)
    }

    pub fn cluster(&self, k: u64) -> (f64, f64) {
        schedule_params(k, self.d, self.beta)
    }
}

/// `(sigma, mu) = (growth * sqrt(k), decay / sqrt(k))` for update counter
/// `k >= 1`.
pub fn schedule_params(k: u64, growth: f64, decay: f64) -> (f64, f64) {
    assert!(k >= 1, "schedule counter starts at 1");
    let root = (k as f64).sqrt();
    (growth * root, decay / root)
}

/// Smooth upper bound `sqrt(x^2 + mu^2)` of `|x|`; within `mu` of `|x|`
/// everywhere and 1-Lipschitz in `x`.
pub fn smoothed_abs(x: f64, mu: f64) -> f64 {
    debug_assert!(mu > 0.0);
    (x * x + mu * mu).sqrt()
}

/// Gradient bounds entering the consensus preconditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBounds {
    /// Bound on the loss subgradients.
    pub nu_f: f64,
    /// Bound on the prior-penalty subgradients.
    pub nu_r: f64,
    /// Combined bound `max_l N_l * nu_f + nu_r`.
    pub omega: f64,
    /// Cluster-level TV weight.
    pub omega0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub client_ok: bool,
    pub cluster_ok: bool,
}

/// Checks the schedule/gradient-bound inequalities required for consensus:
/// `alpha * c >= sqrt(20) * nu_f` at the client level and
/// `beta * d >= sqrt(20) * omega` at the cluster level.
pub fn check_convergence_conditions(s: &ScheduleParams, b: &ConvergenceBounds) -> ConvergenceReport {
    let root20 = 20f64.sqrt();
    ConvergenceReport {
        client_ok: s.alpha * s.c >= root20 * b.nu_f,
        cluster_ok: s.beta * s.d >= root20 * b.omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_formula() {
        let (c, alpha) = (3.0, 6.0);
        assert_eq!(schedule_params(1, c, alpha), (c, alpha));
        let (s4, m4) = schedule_params(4, c, alpha);
        assert!((s4 - 2.0 * c).abs() < 1e-15);
        assert!((m4 - alpha / 2.0).abs() < 1e-15);
        assert_eq!(schedule_params(9, 3.0, 6.0), (9.0, 2.0));
    }

    #[test]
    fn schedule_rejects_zero_counter() {
        assert!(std::panic::catch_unwind(|| schedule_params(0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn schedule_monotone() {
        let p = ScheduleParams {
            c: 2.0,
            d: 1.0,
            alpha: 0.5,
            beta: 3.0,
        };
        let mut prev = p.client(1);
        for k in 2..100 {
            let cur = p.client(k);
            assert!(cur.0 > prev.0 && cur.1 < prev.1);
            prev = cur;
        }
    }

    #[test]
    fn smoothed_abs_bounds() {
        assert_eq!(smoothed_abs(0.0, 0.3), 0.3);
        assert!((smoothed_abs(3.0, 4.0) - 5.0).abs() < 1e-15);
        for i in 0..100 {
            let x = -5.0 + 0.1 * i as f64;
            let mu = 1e-3;
            let g = smoothed_abs(x, mu);
            assert!(g >= x.abs() && g <= x.abs() + mu);
        }
    }

    #[test]
    fn convergence_conditions_trivial_and_benchmark_config() {
        let s = ScheduleParams {
            c: 1.0,
            d: 1.0,
            alpha: 1.0,
            beta: 1.0,
        };
        let b = ConvergenceBounds {
            nu_f: 0.0,
            nu_r: 0.0,
            omega: 0.0,
            omega0: 0.0,
        };
        let r = check_convergence_conditions(&s, &b);
        assert!(r.client_ok && r.cluster_ok);

        // c = omega, alpha = sqrt(20), with omega >= nu_f
        let omega = 7.5;
        let s = ScheduleParams {
            c: omega,
            d: 1.0,
            alpha: 20f64.sqrt(),
            beta: 1.0,
        };
        let b = ConvergenceBounds {
            nu_f: omega,
            nu_r: 0.0,
            omega,
            omega0: omega,
        };
        assert!(check_convergence_conditions(&s, &b).client_ok);
    }

    #[test]
    fn convergence_conditions_monotone_in_schedule() {
        let b = ConvergenceBounds {
            nu_f: 1.0,
            nu_r: 0.5,
            omega: 3.0,
            omega0: 4.0,
        };
        let base = ScheduleParams {
            c: 2.0,
            d: 2.0,
            alpha: 2.5,
            beta: 7.0,
        };
        let r0 = check_convergence_conditions(&base, &b);
        for scale in [1.5, 2.0, 10.0] {
            let s = ScheduleParams {
                c: base.c * scale,
                d: base.d * scale,
                alpha: base.alpha * scale,
                beta: base.beta * scale,
            };
            let r = check_convergence_conditions(&s, &b);
            assert!(!r0.client_ok || r.client_ok);
            assert!(!r0.cluster_ok || r.cluster_ok);
        }
    }
}
