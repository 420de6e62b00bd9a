//! State evolution: the deterministic recursion on the overlaps `(M, Q, Sigma)`
//! that Low-RAMP follows when `N` is large, the replica free energy whose
//! stationary points are its fixed points, and the tools built on top of it
//! (scalar Bayes-optimal maps, spectral analysis, phase-transition finder).

pub mod asymptotics;
mod community;
mod general;
mod jointly_sparse;
mod pca;
mod scalar;
mod sk;
mod thresholds;

pub use community::{community_m, community_m_qmc, se_community, QmcEstimate};
pub use general::{
    bipartite_free_energy, bipartite_free_energy_bayes, iterate_bipartite, iterate_se,
    replica_free_energy, replica_free_energy_bayes, se_bipartite_step, se_step_bayes,
    se_step_general, BipartiteSEModel, FixedPoint, FixedPointOptions,
};
pub use jointly_sparse::se_jointly_sparse;
pub use pca::{pca_analysis, pca_mse, PcaFixedPoint};
pub use scalar::{free_energy_gap, iterate_scalar, se_scalar_bayes, ScalarFixedPoint, ScalarModel};
pub use sk::{sk_free_energy, sk_state_evolution, SkSolution};
pub use thresholds::{
    first_order_criterion, fixed_point_curve, max_log_slope, thresholds, transition_boundary,
    uniform_stability, uniform_stability_bipartite, CurvePoint, Thresholds, TransitionOrder,
    TriCritical,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channels::NoiseParams;
use crate::linalg::{min_eigenvalue, PSD_TOLERANCE};
use crate::priors::PriorSpec;
use crate::quadrature::IntegrationConfig;
use crate::{Error, Result};

/// Overlaps tracked by state evolution.
///
/// `m = E[x_hat x0^T]`, `q = E[x_hat x_hat^T]` and `sigma = E[cov]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SEOrderParams {
    pub m: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl SEOrderParams {
    /// Parameters on the Bayes-optimal manifold: `Q = M` and
    /// `Q + Sigma = <x0 x0^T>`.
    pub fn bayes(m: DMatrix<f64>, second_moment: &DMatrix<f64>) -> Self {
        let sigma = second_moment - &m;
        SEOrderParams { q: m.clone(), m, sigma }
    }

    pub fn rank(&self) -> usize {
        self.q.nrows()
    }

    /// Mean-squared error `Tr[<x0 x0^T> - 2M + Q]`.
    pub fn mse(&self, second_moment: &DMatrix<f64>) -> f64 {
        (second_moment - &self.m * 2.0 + &self.q).trace()
    }

    pub fn check_psd(&self) -> Result<()> {
        for m in [&self.q, &self.sigma] {
            let e = min_eigenvalue(m);
            if e < -PSD_TOLERANCE {
                return Err(Error::NonPsdOrderParam(e));
            }
        }
        Ok(())
    }

    fn max_change(&self, other: &Self) -> f64 {
        let d = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).abs().max();
        d(&self.m, &other.m).max(d(&self.q, &other.q)).max(d(&self.sigma, &other.sigma))
    }

    fn damped(&self, next: &Self, damping: f64) -> Self {
        let mix = |a: &DMatrix<f64>, b: &DMatrix<f64>| b * damping + a * (1.0 - damping);
        SEOrderParams {
            m: mix(&self.m, &next.m),
            q: mix(&self.q, &next.q),
            sigma: mix(&self.sigma, &next.sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SEMode {
    General,
    BayesOptimal,
    /// Randomly quenched disorder analysed with a conventional Hamiltonian;
    /// there is no planted signal, so `M` plays no role.
    QuenchedConventional,
}

/// Everything state evolution needs to know about a symmetric problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SEModel {
    /// Prior used by the algorithm.
    pub prior: PriorSpec,
    /// Prior the signal was drawn from.
    pub prior0: PriorSpec,
    pub noise: NoiseParams,
    pub mode: SEMode,
    pub integration: IntegrationConfig,
}

impl SEModel {
    pub fn bayes(prior: PriorSpec, delta: f64) -> Self {
        SEModel {
            prior0: prior.clone(),
            prior,
            noise: NoiseParams::bayes(delta),
            mode: SEMode::BayesOptimal,
            integration: IntegrationConfig::default(),
        }
    }

    pub fn general(prior: PriorSpec, prior0: PriorSpec, noise: NoiseParams) -> Self {
        SEModel { prior, prior0, noise, mode: SEMode::General, integration: IntegrationConfig::default() }
    }

    pub fn quenched(prior: PriorSpec, noise: NoiseParams) -> Self {
        SEModel {
            prior0: prior.clone(),
            prior,
            noise: NoiseParams { delta_hat: f64::INFINITY, ..noise },
            mode: SEMode::QuenchedConventional,
            integration: IntegrationConfig::default(),
        }
    }

    pub fn with_integration(mut self, integration: IntegrationConfig) -> Self {
        self.integration = integration;
        self
    }

    pub fn rank(&self) -> usize {
        self.prior.rank()
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.prior0.validate()?;
        if self.mode == SEMode::BayesOptimal {
            if !self.noise.is_bayes() {
                return Err(Error::Config(
                    "Bayes-optimal state evolution needs matched noise parameters".into(),
                ));
            }
            if self.prior != self.prior0 {
                return Err(Error::Config(
                    "Bayes-optimal state evolution needs the planted prior".into(),
                ));
            }
        }
        if self.prior.rank() != self.prior0.rank() {
            return Err(Error::RankUnsupported(self.prior0.rank()));
        }
        Ok(())
    }

    /// `<x0 x0^T>` of the planted prior.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.prior0.moments().1
    }

    /// Informative start `M = Q = <x0 x0^T>`, `Sigma = 0`.
    pub fn informative_init(&self) -> SEOrderParams {
        let s = self.second_moment();
        let r = s.nrows();
        SEOrderParams { m: s.clone(), q: s, sigma: DMatrix::zeros(r, r) }
    }

    /// Uninformative start `M = Q = eps I`; `Sigma` is taken on the
    /// Bayes-optimal manifold.
    pub fn uninformative_init(&self, eps: f64) -> SEOrderParams {
        let r = self.rank();
        let m = DMatrix::identity(r, r) * eps;
        SEOrderParams::bayes(m, &self.second_moment())
    }
}
