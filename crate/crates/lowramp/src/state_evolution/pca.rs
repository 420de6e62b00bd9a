//! Performance of the spectral method (top eigenvector of the score matrix)
//! in the rank-one case, followed by the optimal scalar denoiser.
//!
//! In the zero-temperature limit the eigenvector entries behave as
//! `x_hat = M_hat x0 + sqrt(Q_hat) W`. With `v = <x0^2>` the fixed point is
//! `Sigma' = Dh / v`, `Q = (Dt / Sigma' + Sigma') / (1 - R Dt)` and
//! `M^2 = Q Dh^2 (1 - Sigma'^2 / Dt) / (Sigma'^2 v)`, which exists iff
//! `v^2 > Dh^2 / Dt`.

use serde::{Deserialize, Serialize};

use super::general::expect_prior_scalar;
use crate::channels::NoiseParams;
use crate::priors::PriorSpec;
use crate::quadrature::{expect_normal, IntegrationConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaFixedPoint {
    pub m: f64,
    pub q: f64,
    pub sigma_prime: f64,
    /// Effective signal-to-noise ratio `M_hat^2 / Q_hat` of the eigenvector.
    pub snr: f64,
    /// Squared normalised overlap between the eigenvector and `x0`.
    pub overlap2: f64,
    /// Error of the optimally denoised eigenvector.
    pub mse: f64,
}

/// Informative fixed point of the spectral state evolution for a rank-one
/// planted prior.
pub fn pca_analysis(prior0: &PriorSpec, noise: &NoiseParams, cfg: &IntegrationConfig) -> Result<PcaFixedPoint> {
    if prior0.rank() != 1 || matches!(prior0, PriorSpec::Community { .. }) {
        return Err(Error::RankUnsupported(prior0.rank()));
    }
    let v = prior0.moments().1[(0, 0)];
    let dh = noise.delta_hat;
    let dt = noise.delta_tilde;
    let c = 1.0 - noise.r_bar * dt;
    if !dh.is_finite() || !(c > 0.0) || v * v * dt <= dh * dh {
        return Err(Error::NoInformativeFixedPoint);
    }
    let sp = dh / v;
    let q = (dt / sp + sp) / c;
    let m = (q * dh * dh * (1.0 - sp * sp / dt) / (sp * sp * v)).sqrt();
    let snr = (dt * v * v / (dh * dh) - 1.0) / v;
    let overlap2 = 1.0 - dh * dh / (dt * v * v);
    let mse = denoised_mse(prior0, snr, cfg)?;
    Ok(PcaFixedPoint { m, q, sigma_prime: sp, snr, overlap2, mse })
}

/// Error of the spectral estimator; the prior's second moment when the
/// spectrum carries no information.
pub fn pca_mse(prior0: &PriorSpec, noise: &NoiseParams, cfg: &IntegrationConfig) -> Result<f64> {
    match pca_analysis(prior0, noise, cfg) {
        Ok(p) => Ok(p.mse),
        Err(Error::NoInformativeFixedPoint) => {
            // Without information the best estimate is the prior mean.
            let (mean, second) = prior0.moments();
            Ok(second[(0, 0)] - mean[0] * mean[0])
        }
        Err(e) => Err(e),
    }
}

/// `E[(x0 - f_in(s, s x0 + sqrt(s) W))^2]`.
fn denoised_mse(prior0: &PriorSpec, s: f64, cfg: &IntegrationConfig) -> Result<f64> {
    let ss = s.sqrt();
    let mut failure = None;
    let out = expect_prior_scalar(prior0, cfg, 1, |x0, out| {
        out[0] = expect_normal(cfg, |w| match prior0.f_in_scalar(s, s * x0 + ss * w) {
            Ok(v) => (x0 - v.mean).powi(2),
            Err(_) => f64::NAN,
        });
        if !out[0].is_finite() && failure.is_none() {
            failure = Some(Error::NonConvergentIntegral("denoiser failed".into()));
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out[0]),
    }
}
