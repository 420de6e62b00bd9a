//! Low-RAMP: low-rank approximate message passing.
//!
//! Each node keeps a mean `x_i` and covariance `sigma_i` computed by the
//! prior's input function from two fields, a vector `B_i` and a matrix `A_i`.
//! The fields are sums over the score matrix with an Onsager correction that
//! uses the previous iterate of the node's own mean.

mod bethe;
mod bipartite;
mod kernels;
mod mean_field;
mod symmetric;

pub use bethe::{bethe_free_energy, bethe_free_energy_bipartite, bethe_site_gradient, BetheMode};
pub use bipartite::{bipartite_step, run_bipartite, BipartiteOutcome, BipartiteState};
pub use mean_field::{mean_field_run, mean_field_step};
pub use symmetric::{run_symmetric, symmetric_step, AmpOutcome};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::Symmetry;
use crate::priors::PriorSpec;
use crate::{Error, Result};

/// Estimates larger than this in norm count as a diverged run.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// `scale * N(0, I_r)` per node.
    Random { scale: f64 },
    /// Start from the planted configuration.
    Planted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Per-node `A_i` and Onsager sums with the actual `S^2` and `R`.
    Full,
    /// Shared `A` and Onsager coefficient from the empirical `Delta_tilde`, `R_bar`.
    SelfAveraged,
    /// Shared `A = sum x x^T / (N Delta)` with the channel's Fisher `Delta`.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub init: Init,
    pub variant: Variant,
    pub adaptive_damping: bool,
    /// Evaluate the Bethe free energy after every iteration.
    pub track_free_energy: bool,
    /// Seed of the random initialization.
    pub seed: u64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            damping: 1.0,
            tol: 1e-8,
            max_iters: 1000,
            init: Init::Random { scale: 1e-3 },
            variant: Variant::SelfAveraged,
            adaptive_damping: false,
            track_free_energy: true,
            seed: 0,
        }
    }
}

impl AmpConfig {
    /// Default variant for a problem of size `n`.
    pub fn default_variant(n: usize) -> Variant {
        if n >= 500 {
            Variant::SelfAveraged
        } else {
            Variant::Full
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        if let Init::Random { scale } = self.init {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(
                    "random init scale must be positive; an all-zero start can be a fixed point".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub conv: f64,
    pub mse: Option<f64>,
    pub free_energy: Option<f64>,
}

/// Per-node estimates and fields, stored row-major: vectors as `n x r`,
/// matrices as `n` consecutive `r x r` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub n: usize,
    pub rank: usize,
    pub x_hat: Vec<f64>,
    pub x_hat_old: Vec<f64>,
    pub sigma: Vec<f64>,
    pub log_z: Vec<f64>,
    pub b: Vec<f64>,
    pub b_old: Vec<f64>,
    pub a: Vec<f64>,
    pub a_old: Vec<f64>,
    pub t: usize,
    pub conv: f64,
    pub free_energy_trace: Vec<f64>,
}

impl AmpState {
    /// Fresh state with the given starting means and everything else zero.
    pub fn new(x_init: &DMatrix<f64>) -> Self {
        let (n, r) = x_init.shape();
        let mut x_hat = Vec::with_capacity(n * r);
        for i in 0..n {
            for k in 0..r {
                x_hat.push(x_init[(i, k)]);
            }
        }
        AmpState {
            n,
            rank: r,
            x_hat,
            x_hat_old: vec![0.0; n * r],
            sigma: vec![0.0; n * r * r],
            log_z: vec![0.0; n],
            b: vec![0.0; n * r],
            b_old: vec![0.0; n * r],
            a: vec![0.0; n * r * r],
            a_old: vec![0.0; n * r * r],
            t: 0,
            conv: f64::INFINITY,
            free_energy_trace: Vec::new(),
        }
    }

    pub fn x_hat_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.rank, &self.x_hat)
    }

    pub fn sigma_of(&self, i: usize) -> DMatrix<f64> {
        let rr = self.rank * self.rank;
        DMatrix::from_row_slice(self.rank, self.rank, &self.sigma[i * rr..(i + 1) * rr])
    }

    pub fn a_of(&self, i: usize) -> DMatrix<f64> {
        let rr = self.rank * self.rank;
        DMatrix::from_row_slice(self.rank, self.rank, &self.a[i * rr..(i + 1) * rr])
    }

    pub fn b_of(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.b[i * self.rank..(i + 1) * self.rank])
    }

    /// Recomputes means, covariances and `log Z` from the stored fields.
    pub fn refresh_estimates(&mut self, prior: &PriorSpec) -> Result<()> {
        update_sites(prior, self.rank, &self.a, &self.b, &mut self.x_hat, &mut self.sigma, &mut self.log_z)
    }
}

/// Initial means for `n` nodes of rank `r`.
pub fn initial_estimates(
    init: Init,
    n: usize,
    r: usize,
    planted: Option<&DMatrix<f64>>,
    seed: u64,
) -> Result<DMatrix<f64>> {
    match init {
        Init::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = DMatrix::zeros(n, r);
            for i in 0..n {
                for k in 0..r {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m[(i, k)] = scale * z;
                }
            }
            Ok(m)
        }
        Init::Planted => {
            let x0 = planted
                .ok_or_else(|| Error::Config("planted init needs an instance with a planted signal".into()))?;
            if x0.shape() != (n, r) {
                return Err(Error::ShapeMismatch(format!(
                    "planted signal is {:?}, the prior expects {:?}",
                    x0.shape(),
                    (n, r)
                )));
            }
            Ok(x0.clone())
        }
    }
}

/// Symmetry used to score estimates against the planted truth.
pub fn default_symmetry(prior: &PriorSpec) -> Symmetry {
    match prior {
        PriorSpec::Community { .. } => Symmetry::Permutation,
        _ => {
            let (mean, _) = prior.moments();
            if mean.iter().all(|m| m.abs() < 1e-14) {
                Symmetry::Sign
            } else {
                Symmetry::None
            }
        }
    }
}

pub(crate) fn to_diverged(t: usize, err: Error) -> Error {
    match err {
        Error::NonConvergentIntegral(reason) => Error::DivergedEstimates { iteration: t, reason },
        other => other,
    }
}

/// Applies the input function at every node.
pub(crate) fn update_sites(
    prior: &PriorSpec,
    r: usize,
    a: &[f64],
    b: &[f64],
    x: &mut [f64],
    sigma: &mut [f64],
    log_z: &mut [f64],
) -> Result<()> {
    let rr = r * r;
    x.par_chunks_mut(r)
        .zip(sigma.par_chunks_mut(rr))
        .zip(log_z.par_iter_mut())
        .enumerate()
        .try_for_each(|(i, ((xi, si), lz))| -> Result<()> {
            if r == 1 {
                let out = prior.f_in_scalar(a[i], b[i])?;
                xi[0] = out.mean;
                si[0] = out.var;
                *lz = out.log_z;
            } else {
                let am = DMatrix::from_row_slice(r, r, &a[i * rr..(i + 1) * rr]);
                let bv = DVector::from_column_slice(&b[i * r..(i + 1) * r]);
                let out = prior.f_in(&am, &bv)?;
                for k in 0..r {
                    xi[k] = out.mean[k];
                    for l in 0..r {
                        si[k * r + l] = out.covariance[(k, l)];
                    }
                }
                *lz = out.log_z;
            }
            Ok(())
        })
}

/// `(1/N) sum_i ||x_i - x_old_i||` and the largest row norm.
pub(crate) fn change_and_max_norm(x: &[f64], old: &[f64], r: usize) -> (f64, f64) {
    let n = x.len() / r.max(1);
    let mut total = 0.0;
    let mut max_norm: f64 = 0.0;
    for i in 0..n {
        let mut d = 0.0;
        let mut nn = 0.0;
        for k in 0..r {
            let v = x[i * r + k];
            d += (v - old[i * r + k]).powi(2);
            nn += v * v;
        }
        total += d.sqrt();
        max_norm = max_norm.max(nn.sqrt());
    }
    (total / n.max(1) as f64, max_norm)
}

pub(crate) fn check_finite(t: usize, x: &[f64], max_norm: f64) -> Result<()> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::DivergedEstimates { iteration: t, reason: "non-finite estimate".into() });
    }
    if max_norm > DIVERGENCE_NORM {
        return Err(Error::DivergedEstimates {
            iteration: t,
            reason: format!("estimate norm {max_norm:e} exceeds {DIVERGENCE_NORM:e}"),
        });
    }
    Ok(())
}

/// Damping controller shared by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct Damping {
    initial: f64,
    pub current: f64,
    adaptive: bool,
    last_conv: f64,
    increases: usize,
}

impl Damping {
    pub fn new(initial: f64, adaptive: bool) -> Self {
        Damping { initial, current: initial, adaptive, last_conv: f64::INFINITY, increases: 0 }
    }

    /// Halves the damping after two consecutive increases of `conv`, grows
    /// it by 10% (up to the initial value) otherwise.
    pub fn observe(&mut self, conv: f64) {
        if !self.adaptive {
            return;
        }
        if conv > self.last_conv {
            self.increases += 1;
            if self.increases >= 2 {
                self.current *= 0.5;
                self.increases = 0;
            }
        } else {
            self.increases = 0;
            self.current = (self.current * 1.1).min(self.initial);
        }
        self.last_conv = conv;
    }
}

/// Damped update `new <- lambda new + (1 - lambda) old`, in place on `new`.
pub(crate) fn damp(new: &mut [f64], old: &[f64], lambda: f64) {
    if lambda == 1.0 {
        return;
    }
    for (n, o) in new.iter_mut().zip(old) {
        *n = lambda * *n + (1.0 - lambda) * o;
    }
}
