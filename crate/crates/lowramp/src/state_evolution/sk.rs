//! Replica-symmetric solution of the Sherrington-Kirkpatrick model with
//! couplings of variance `J^2 / N` and no external field.

use serde::{Deserialize, Serialize};

use crate::quadrature::{expect_normal, IntegrationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkSolution {
    pub q: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `q <- E[tanh^2(J sqrt(q) W)]` from `q0` to tolerance `1e-12`.
pub fn sk_state_evolution(j: f64, q0: f64, cfg: &IntegrationConfig) -> SkSolution {
    const MAX_ITERS: usize = 1_000_000;
    let mut q = q0.clamp(0.0, 1.0);
    for t in 1..=MAX_ITERS {
        let s = j * q.sqrt();
        let next = expect_normal(cfg, |w| (s * w).tanh().powi(2));
        let change = (next - q).abs();
        q = next;
        if change < 1e-12 {
            return SkSolution { q, iterations: t, converged: true };
        }
    }
    SkSolution { q, iterations: MAX_ITERS, converged: false }
}

/// `(J^2 (1 - q)^2 - J^2) / 4 + E[ln cosh(J sqrt(q) W)]`.
pub fn sk_free_energy(j: f64, q: f64, cfg: &IntegrationConfig) -> f64 {
    let s = j * q.sqrt();
    let j2 = j * j;
    (j2 * (1.0 - q).powi(2) - j2) / 4.0
        + expect_normal(cfg, |w| {
            let a = (s * w).abs();
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        })
}
