//! Leading-order thresholds for very sparse signals and many communities.
//!
//! For sparse rank-one priors `f(-beta ln rho) / rho` tends to a limit
//! `g(beta)` as `rho -> 0`, so that `Delta_Dyn ~ C_dyn (-rho / ln rho)` with
//! `C_dyn = max g(beta) / beta`, and `Delta_IT ~ C_it (-rho / ln rho)` with
//! `C_it = g(b) / b` at the non-trivial root of `int_0^b g = b g(b) / 2`.
//! The bipartite spiked model follows with `Delta ~ sqrt(alpha C (-rho / ln rho))`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    SmallRho { rho: f64 },
    /// `rho` is needed by the jointly sparse model only.
    LargeRank { rank: usize, rho: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticThresholds {
    pub delta_alg: f64,
    pub delta_it: f64,
    pub delta_dyn: f64,
}

/// Small-`rho` limit `g(beta)` of `f(-beta ln rho) / rho` for the
/// Gauss-Bernoulli prior.
pub fn gauss_bernoulli_limit(beta: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    2.0 * (-1.0 / beta).exp() / (std::f64::consts::PI * beta).sqrt() + erfc(1.0 / beta.sqrt())
}

/// `(C_dyn, C_it)` of the Gauss-Bernoulli prior (about 0.595 and 0.528).
pub fn gauss_bernoulli_constants() -> (f64, f64) {
    static CONSTANTS: OnceLock<(f64, f64)> = OnceLock::new();
    *CONSTANTS.get_or_init(|| {
        let g = gauss_bernoulli_limit;
        let ratio = |b: f64| g(b) / b;
        // g(b)/b is unimodal on (0, inf); its maximum lies well inside [0.1, 20].
        let (mut lo, mut hi) = (0.1f64, 20.0f64);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        while hi - lo > 1e-12 {
            let c = hi - phi * (hi - lo);
            let d = lo + phi * (hi - lo);
            if ratio(c) > ratio(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        let c_dyn = ratio(0.5 * (lo + hi));
        // int_0^b g - b g(b) / 2 is negative just past the maximum of g/b and
        // positive for large b; integrate with a fine Simpson rule.
        let integral = |b: f64| {
            let n = 4000;
            let h = b / n as f64;
            let mut s = g(0.0) + g(b);
            for k in 1..n {
                s += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let balance = |b: f64| integral(b) - 0.5 * b * g(b);
        let (mut a, mut c) = (0.5 * (lo + hi), 50.0);
        for _ in 0..100 {
            let mid = 0.5 * (a + c);
            if balance(mid) < 0.0 {
                a = mid;
            } else {
                c = mid;
            }
        }
        let b_it = 0.5 * (a + c);
        (c_dyn, g(b_it) / b_it)
    })
}

/// Leading-order thresholds of a symmetric model.
///
/// Small `rho`: `bernoulli`, `rademacher_bernoulli`, `gauss_bernoulli`.
/// Large rank: `community`, `jointly_sparse`.
pub fn asymptotic_thresholds(model: &str, regime: Regime) -> Result<AsymptoticThresholds> {
    match regime {
        Regime::SmallRho { rho } => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
            }
            let scale = -rho / rho.ln();
            match model {
                "bernoulli" => Ok(AsymptoticThresholds {
                    delta_alg: std::f64::consts::E * rho * rho,
                    delta_it: scale / 4.0,
                    delta_dyn: scale / 2.0,
                }),
                "rademacher_bernoulli" => Ok(AsymptoticThresholds {
                    delta_alg: rho * rho,
                    delta_it: scale / 4.0,
                    delta_dyn: scale / 2.0,
                }),
                "gauss_bernoulli" => {
                    let (c_dyn, c_it) = gauss_bernoulli_constants();
                    Ok(AsymptoticThresholds {
                        delta_alg: rho * rho,
                        delta_it: c_it * scale,
                        delta_dyn: c_dyn * scale,
                    })
                }
                other => Err(Error::Config(format!("no small-rho asymptotics for `{other}`"))),
            }
        }
        Regime::LargeRank { rank, rho } => {
            if rank < 2 {
                return Err(Error::Config(format!("rank must be at least 2, got {rank}")));
            }
            let r = rank as f64;
            match model {
                "community" => Ok(AsymptoticThresholds {
                    delta_alg: 1.0 / (r * r),
                    delta_it: 1.0 / (4.0 * r * r.ln()),
                    delta_dyn: 1.0 / (2.0 * r * r.ln()),
                }),
                "jointly_sparse" => {
                    let rho = rho.ok_or_else(|| {
                        Error::Config("jointly sparse asymptotics need the field `rho`".into())
                    })?;
                    Ok(AsymptoticThresholds { delta_alg: rho * rho, delta_it: rho, delta_dyn: rho })
                }
                other => Err(Error::Config(format!("no large-rank asymptotics for `{other}`"))),
            }
        }
    }
}

/// Small-`rho` thresholds of the bipartite spiked model with a Gaussian
/// side and a sparse side of density `rho`; `Delta_Alg = Delta_c = rho sqrt(alpha)`.
pub fn asymptotic_thresholds_bipartite(model: &str, rho: f64, alpha: f64) -> Result<AsymptoticThresholds> {
    if !(rho > 0.0 && rho < 1.0) || !(alpha > 0.0) {
        return Err(Error::Config(format!("need 0 < rho < 1 and alpha > 0, got {rho}, {alpha}")));
    }
    let scale = alpha * (-rho / rho.ln());
    let (c_dyn, c_it) = match model {
        "rademacher_bernoulli" => (0.5, 0.25),
        "gauss_bernoulli" => gauss_bernoulli_constants(),
        other => return Err(Error::Config(format!("no bipartite asymptotics for `{other}`"))),
    };
    Ok(AsymptoticThresholds {
        delta_alg: rho * alpha.sqrt(),
        delta_it: (c_it * scale).sqrt(),
        delta_dyn: (c_dyn * scale).sqrt(),
    })
}
