//! The order-parameter map `b -> M_r(b / Delta)` of symmetric community
//! detection with `r` groups.
//!
//! `M_r(x) = (r E[F_1 / (F_1 + ... + F_r)] - 1) / (r - 1)` with
//! `F_1 = exp(x/r + u_1 sqrt(x/r))` and `F_k = exp(u_k sqrt(x/r))` for i.i.d.
//! standard normal `u_k`. Writing `F_1 / (F_1 + F') = int_0^inf F_1 exp(-t (F_1 + F')) dt`
//! and using independence turns the r-dimensional expectation into a single
//! integral over `t` of products of one-dimensional ones, which we evaluate
//! with trapezoid rules (exponentially accurate for these analytic integrands).
//! A scrambled-Halton estimate is kept as an independent cross-check.

use serde::{Deserialize, Serialize};

use crate::quadrature::ScrambledHalton;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// One-dimensional grid for expectations over `u ~ N(0, 1)` of functions of
/// `exp(c u)`.
struct Lognormal {
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl Lognormal {
    fn new(c: f64, refine: f64) -> Self {
        let h = if c > 0.0 { (0.05f64).min(0.1 / c) } else { 0.05 } / refine;
        let (lo, hi) = (-10.0, 10.0 + c);
        let n = ((hi - lo) / h).ceil() as usize + 1;
        let mut weights = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let u = lo + k as f64 * h;
            weights.push(h * (-0.5 * u * u - LN_SQRT_2PI).exp());
            values.push((c * u).exp());
        }
        Lognormal { weights, values }
    }

    /// `E[exp(-t e^{cu})]`.
    fn laplace(&self, t: f64) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * (-t * v).exp()).sum()
    }

    /// `E[e^{cu} exp(-t e^{cu})]`.
    fn tilted(&self, t: f64) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * v * (-t * v).exp()).sum()
    }
}

/// `M_r(x)` for `r >= 2` and `x >= 0`, clamped to `[0, 1]`.
pub fn community_m(r: usize, x: f64) -> f64 {
    community_m_refined(r, x, 1.0)
}

/// Same as [`community_m`] with all quadrature steps divided by `refine`.
pub(crate) fn community_m_refined(r: usize, x: f64, refine: f64) -> f64 {
    assert!(r >= 2, "community map needs at least two groups");
    if x <= 0.0 {
        return 0.0;
    }
    let rf = r as f64;
    let a = x / rf;
    let c = a.sqrt();
    let grid = Lognormal::new(c, refine);
    let ea = a.exp();
    // Integrand in s = ln t: t E[F1 e^{-t F1}] E[e^{-t F}]^(r-1).
    let term = |s: f64| {
        let t = s.exp();
        let phi = grid.laplace(t);
        if phi <= 0.0 {
            return 0.0;
        }
        t * ea * grid.tilted(t * ea) * ((rf - 1.0) * phi.ln()).exp()
    };
    let h = 0.2 / refine;
    // E[F1] = exp(a + c^2 / 2) = exp(2a); start where t E[F1] < 1e-18.
    let s_lo = (1e-18f64).ln() - 2.0 * a;
    let mut s = s_lo;
    let mut total = 0.0;
    let mut peak = 0.0f64;
    loop {
        let v = term(s);
        total += v;
        peak = peak.max(v);
        if v < 1e-19 * peak && s > s_lo + 10.0 {
            break;
        }
        s += h;
        if s > 200.0 {
            break;
        }
    }
    let e = total * h;
    ((rf * e - 1.0) / (rf - 1.0)).clamp(0.0, 1.0)
}

/// `b^{t+1}` from `b^t` for community detection at noise `delta`.
pub fn se_community(r: usize, b: f64, delta: f64) -> f64 {
    community_m(r, b / delta)
}

/// Quasi-Monte-Carlo estimate with a spread over independent scramblings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `M_r(x)` from `points` scrambled-Halton points per replicate, averaged
/// over `replicates` independent scramblings.
pub fn community_m_qmc(r: usize, x: f64, points: usize, replicates: usize, seed: u64) -> QmcEstimate {
    assert!(r >= 2 && replicates >= 2);
    let rf = r as f64;
    let a = x / rf;
    let c = a.sqrt();
    let estimates: Vec<f64> = (0..replicates)
        .map(|k| {
            let seq = ScrambledHalton::new(r, seed.wrapping_add(k as u64));
            let mut u = vec![0.0; r];
            let mut acc = 0.0;
            for p in 0..points {
                seq.normal_point(p as u64 + 1, &mut u);
                // Shift by the largest exponent for stability.
                let e1 = a + c * u[0];
                let mx = u[1..].iter().fold(e1, |m, v| m.max(c * v));
                let num = (e1 - mx).exp();
                let den = num + u[1..].iter().map(|v| (c * v - mx).exp()).sum::<f64>();
                acc += num / den;
            }
            (rf * acc / points as f64 - 1.0) / (rf - 1.0)
        })
        .collect();
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    QmcEstimate { value: mean, std_error: (var / k).sqrt() }
}
