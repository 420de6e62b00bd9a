//! Matrix state evolution for general (possibly mismatched) inference, its
//! bipartite counterpart and the replica free energies.
//!
//! One step feeds the fields `A = Q / Dt - R (Q + Sigma)` and
//! `B = (M / Dh) x0 + sqrt(Q / Dt) W` into the prior's input function and
//! averages over the planted `x0` and Gaussian `W`.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SEMode, SEModel, SEOrderParams};
use crate::channels::NoiseParams;
use crate::instance::derive_seed;
use crate::linalg::{spd_inverse_logdet, sqrt_psd, symmetrize};
use crate::priors::{PriorSpec, PD_FLOOR};
use crate::quadrature::{expect_normal_vec, IntegrationConfig};
use crate::{Error, Result};

const MC_CHUNKS: usize = 64;
const TAG_MC: u64 = 0x5E_0001;

/// Fields of the effective scalar (or r-dimensional) denoising problem.
struct Fields {
    a: DMatrix<f64>,
    /// Coefficient of `x0` in `B`.
    signal: DMatrix<f64>,
    /// Square root of the covariance of the Gaussian part of `B`.
    noise: DMatrix<f64>,
}

impl Fields {
    fn new(
        m: &DMatrix<f64>,
        q: &DMatrix<f64>,
        sigma: &DMatrix<f64>,
        noise: &NoiseParams,
        scale: f64,
    ) -> Result<Self> {
        let inv_dt = 1.0 / noise.delta_tilde;
        let mut a = (q * inv_dt - (q + sigma) * noise.r_bar) * scale;
        symmetrize(&mut a);
        let signal = m * (scale * noise.inv_delta_hat());
        let mut cov = q * (scale * inv_dt);
        symmetrize(&mut cov);
        let noise = sqrt_psd(&cov)?;
        Ok(Fields { a, signal, noise })
    }
}

/// Averages of the input function over `(x0, W)`.
pub(crate) struct InputMoments {
    pub m: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub log_z: f64,
}

/// `E[f(x0)]` for a rank-one planted prior, `f` writing `dim` outputs.
pub(crate) fn expect_prior_scalar(
    prior0: &PriorSpec,
    cfg: &IntegrationConfig,
    dim: usize,
    mut f: impl FnMut(f64, &mut [f64]),
) -> Result<Vec<f64>> {
    if let Some(atoms) = prior0.scalar_atoms() {
        let mut acc = vec![0.0; dim];
        let mut buf = vec![0.0; dim];
        for (p, v) in atoms {
            if p == 0.0 {
                continue;
            }
            f(v, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += p * b;
            }
        }
        return Ok(acc);
    }
    match prior0 {
        PriorSpec::GaussBernoulliJoint { rho, rank: 1 }
        | PriorSpec::GaussBernoulliIndependent { rho, rank: 1 } => {
            let mut at_zero = vec![0.0; dim];
            f(0.0, &mut at_zero);
            let on = expect_normal_vec(cfg, dim, &mut f);
            Ok(at_zero.iter().zip(&on).map(|(z, o)| (1.0 - rho) * z + rho * o).collect())
        }
        PriorSpec::Spherical { rank: 1 } => Ok(expect_normal_vec(cfg, dim, f)),
        PriorSpec::Gaussian { mean, cov } if mean.len() == 1 => {
            let (mu, sd) = (mean[0], cov[0].sqrt());
            Ok(expect_normal_vec(cfg, dim, |z, out| f(mu + sd * z, out)))
        }
        other => Err(Error::RankUnsupported(other.rank())),
    }
}

fn is_scalar(prior: &PriorSpec) -> bool {
    prior.rank() == 1 && !matches!(prior, PriorSpec::Community { .. })
}

fn input_moments(
    prior: &PriorSpec,
    prior0: &PriorSpec,
    fields: &Fields,
    cfg: &IntegrationConfig,
) -> Result<InputMoments> {
    if is_scalar(prior) && is_scalar(prior0) {
        scalar_moments(prior, prior0, fields, cfg)
    } else if let (Some(p), Some(p0)) = (gaussian_parts(prior), gaussian_parts(prior0)) {
        gaussian_moments(p, p0, fields)
    } else {
        mc_moments(prior, prior0, fields, cfg)
    }
}

fn scalar_moments(
    prior: &PriorSpec,
    prior0: &PriorSpec,
    fields: &Fields,
    cfg: &IntegrationConfig,
) -> Result<InputMoments> {
    let a = fields.a[(0, 0)];
    let s = fields.signal[(0, 0)];
    let n = fields.noise[(0, 0)];
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let out = expect_prior_scalar(prior0, cfg, 4, |x0, out| {
        let inner = expect_normal_vec(cfg, 4, |w, o| match prior.f_in_scalar(a, s * x0 + n * w) {
            Ok(v) => {
                o[0] = v.mean;
                o[1] = v.mean * v.mean;
                o[2] = v.var;
                o[3] = v.log_z;
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                o.fill(0.0);
            }
        });
        out[0] = inner[0] * x0;
        out[1] = inner[1];
        out[2] = inner[2];
        out[3] = inner[3];
    })?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    Ok(InputMoments { m: one(out[0]), q: one(out[1]), sigma: one(out[2]), log_z: out[3] })
}

/// Mean and covariance of a Gaussian (or spherical) prior.
fn gaussian_parts(prior: &PriorSpec) -> Option<(DVector<f64>, DMatrix<f64>)> {
    match prior {
        PriorSpec::Gaussian { mean, cov } => {
            let r = mean.len();
            Some((DVector::from_column_slice(mean), DMatrix::from_row_slice(r, r, cov)))
        }
        PriorSpec::Spherical { rank } => Some((DVector::zeros(*rank), DMatrix::identity(*rank, *rank))),
        _ => None,
    }
}

/// Closed-form moments when both priors are Gaussian: the posterior mean
/// `K h` is linear in `h = Sigma^-1 mu + B`, so everything follows from
/// `P = E[h h^T]`.
fn gaussian_moments(
    (mu, cov): (DVector<f64>, DMatrix<f64>),
    (mu0, cov0): (DVector<f64>, DMatrix<f64>),
    fields: &Fields,
) -> Result<InputMoments> {
    let (r, r0) = (mu.len(), mu0.len());
    if fields.signal.shape() != (r, r0) || fields.a.nrows() != r {
        return Err(Error::ShapeMismatch(format!(
            "order parameters are {}x{}, priors have ranks {r} and {r0}",
            fields.signal.nrows(),
            fields.signal.ncols()
        )));
    }
    let (cov_inv, logdet_cov) = spd_inverse_logdet(&cov, PD_FLOOR)
        .ok_or_else(|| Error::InvalidPrior("gaussian covariance must be positive definite".into()))?;
    let (k, logdet_prec) = spd_inverse_logdet(&(&cov_inv + &fields.a), PD_FLOOR).ok_or_else(|| {
        Error::NonConvergentIntegral("inverse covariance plus A is not positive definite".into())
    })?;
    let second0 = &cov0 + &mu0 * mu0.transpose();
    let c = &cov_inv * &mu;
    let s = &fields.signal;
    let cross = &c * (s * &mu0).transpose();
    let mut p = &c * c.transpose() + &cross + cross.transpose() + s * &second0 * s.transpose()
        + &fields.noise * fields.noise.transpose();
    symmetrize(&mut p);
    let m = &k * (&c * mu0.transpose() + s * &second0);
    let mut q = &k * &p * &k;
    symmetrize(&mut q);
    let log_z = -0.5 * logdet_cov - 0.5 * logdet_prec + 0.5 * (&k * &p).trace() - 0.5 * mu.dot(&c);
    Ok(InputMoments { m, q, sigma: k, log_z })
}

fn mc_moments(
    prior: &PriorSpec,
    prior0: &PriorSpec,
    fields: &Fields,
    cfg: &IntegrationConfig,
) -> Result<InputMoments> {
    let r = prior.rank();
    let r0 = prior0.rank();
    if fields.signal.ncols() != r0 || fields.a.nrows() != r {
        return Err(Error::ShapeMismatch(format!(
            "order parameters are {}x{}, priors have ranks {r} and {r0}",
            fields.signal.nrows(),
            fields.signal.ncols()
        )));
    }
    let total = cfg.mc_samples.max(1);
    let per_chunk = total.div_ceil(MC_CHUNKS);
    let base = derive_seed(cfg.mc_seed, TAG_MC);
    let parts: Vec<Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64, usize)>> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * per_chunk;
            let count = per_chunk.min(total.saturating_sub(start));
            let mut m = DMatrix::zeros(r, r0);
            let mut q = DMatrix::zeros(r, r);
            let mut sigma = DMatrix::zeros(r, r);
            let mut log_z = 0.0;
            if count == 0 {
                return Ok((m, q, sigma, log_z, 0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(chunk as u64);
            let x0s = prior0.sample_with(count, &mut rng);
            for k in 0..count {
                let x0 = DVector::from_iterator(r0, x0s.row(k).iter().cloned());
                let w = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
                let b = &fields.signal * &x0 + &fields.noise * w;
                let out = prior.f_in(&fields.a, &b)?;
                m += &out.mean * x0.transpose();
                q += &out.mean * out.mean.transpose();
                sigma += &out.covariance;
                log_z += out.log_z;
            }
            Ok((m, q, sigma, log_z, count))
        })
        .collect();
    let mut m = DMatrix::zeros(r, r0);
    let mut q = DMatrix::zeros(r, r);
    let mut sigma = DMatrix::zeros(r, r);
    let mut log_z = 0.0;
    let mut count = 0usize;
    for part in parts {
        let (pm, pq, ps, pl, c) = part?;
        m += pm;
        q += pq;
        sigma += ps;
        log_z += pl;
        count += c;
    }
    let inv = 1.0 / count as f64;
    let mut q = q * inv;
    let mut sigma = sigma * inv;
    symmetrize(&mut q);
    symmetrize(&mut sigma);
    Ok(InputMoments { m: m * inv, q, sigma, log_z: log_z * inv })
}

fn symmetric_fields(model: &SEModel, p: &SEOrderParams) -> Result<Fields> {
    let mut f = Fields::new(&p.m, &p.q, &p.sigma, &model.noise, 1.0)?;
    if model.mode == SEMode::QuenchedConventional {
        f.signal.fill(0.0);
    }
    Ok(f)
}

/// One step of the general state evolution.
pub fn se_step_general(model: &SEModel, params: &SEOrderParams) -> Result<SEOrderParams> {
    model.validate()?;
    check_shapes(params, model.rank(), model.prior0.rank())?;
    let fields = symmetric_fields(model, params)?;
    let out = input_moments(&model.prior, &model.prior0, &fields, &model.integration)?;
    let m = if model.mode == SEMode::QuenchedConventional { out.m * 0.0 } else { out.m };
    Ok(SEOrderParams { m, q: out.q, sigma: out.sigma })
}

/// One Bayes-optimal step from `M` (with `Q = M`, `Sigma = <x0 x0^T> - M`).
///
/// The returned `Q` and `Sigma` are computed independently of `M`, so
/// `Q - M` measures how well the Nishimori identities hold numerically.
pub fn se_step_bayes(model: &SEModel, m: &DMatrix<f64>) -> Result<SEOrderParams> {
    let params = SEOrderParams::bayes(m.clone(), &model.second_moment());
    se_step_general(model, &params)
}

fn check_shapes(p: &SEOrderParams, r: usize, r0: usize) -> Result<()> {
    let ok = p.m.shape() == (r, r0) && p.q.shape() == (r, r) && p.sigma.shape() == (r, r);
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "order parameters {:?}/{:?}/{:?} for ranks {r} and {r0}",
            p.m.shape(),
            p.q.shape(),
            p.sigma.shape()
        )))
    }
}

/// Replica-symmetric free energy
/// `Tr(Q Q^T)/(4 Dt) - Tr(M M^T)/(2 Dh) - R/2 Tr((Q + Sigma)^2) + E log Z(A, B)`.
pub fn replica_free_energy(model: &SEModel, params: &SEOrderParams) -> Result<f64> {
    model.validate()?;
    check_shapes(params, model.rank(), model.prior0.rank())?;
    let fields = symmetric_fields(model, params)?;
    let out = input_moments(&model.prior, &model.prior0, &fields, &model.integration)?;
    let n = &model.noise;
    let qs = &params.q + &params.sigma;
    let m_term = if model.mode == SEMode::QuenchedConventional {
        0.0
    } else {
        (&params.m * params.m.transpose()).trace() * n.inv_delta_hat() / 2.0
    };
    Ok((&params.q * params.q.transpose()).trace() / (4.0 * n.delta_tilde) - m_term
        - 0.5 * n.r_bar * (&qs * &qs).trace()
        + out.log_z)
}

/// Bayes-optimal free energy `E log Z(M/D, (M/D) x0 + sqrt(M/D) W) - Tr(M M^T)/(4 D)`.
pub fn replica_free_energy_bayes(model: &SEModel, m: &DMatrix<f64>) -> Result<f64> {
    let delta = model.noise.delta_tilde;
    let params = SEOrderParams::bayes(m.clone(), &model.second_moment());
    let fields = Fields::new(&params.m, &params.q, &params.sigma, &NoiseParams::bayes(delta), 1.0)?;
    let out = input_moments(&model.prior, &model.prior0, &fields, &model.integration)?;
    Ok(out.log_z - (m * m.transpose()).trace() / (4.0 * delta))
}

/// Options of the damped fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { damping: 0.5, tol: 1e-12, max_iters: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint<P> {
    pub params: P,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates state evolution to a fixed point. In Bayes-optimal mode the
/// iteration stays on the Nishimori manifold and only `M` is propagated.
pub fn iterate_se(
    model: &SEModel,
    init: &SEOrderParams,
    opts: &FixedPointOptions,
) -> Result<FixedPoint<SEOrderParams>> {
    let second = model.second_moment();
    let bayes = model.mode == SEMode::BayesOptimal;
    let mut cur = if bayes { SEOrderParams::bayes(init.m.clone(), &second) } else { init.clone() };
    for t in 1..=opts.max_iters {
        let mut next = se_step_general(model, &cur)?;
        if bayes {
            let mut m = next.m;
            symmetrize(&mut m);
            next = SEOrderParams::bayes(m, &second);
        }
        let next = cur.damped(&next, opts.damping);
        let change = cur.max_change(&next);
        cur = next;
        if change < opts.tol {
            return Ok(FixedPoint { params: cur, iterations: t, converged: true });
        }
    }
    Ok(FixedPoint { params: cur, iterations: opts.max_iters, converged: false })
}

/// State evolution of the bipartite problem `U V^T` with `alpha = M / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteSEModel {
    pub prior_u: PriorSpec,
    pub prior_v: PriorSpec,
    pub prior_u0: PriorSpec,
    pub prior_v0: PriorSpec,
    pub noise: NoiseParams,
    pub alpha: f64,
    pub mode: SEMode,
    pub integration: IntegrationConfig,
}

impl BipartiteSEModel {
    pub fn bayes(prior_u: PriorSpec, prior_v: PriorSpec, delta: f64, alpha: f64) -> Self {
        BipartiteSEModel {
            prior_u0: prior_u.clone(),
            prior_v0: prior_v.clone(),
            prior_u,
            prior_v,
            noise: NoiseParams::bayes(delta),
            alpha,
            mode: SEMode::BayesOptimal,
            integration: IntegrationConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        for p in [&self.prior_u, &self.prior_v, &self.prior_u0, &self.prior_v0] {
            p.validate()?;
        }
        if self.mode == SEMode::BayesOptimal
            && (!self.noise.is_bayes() || self.prior_u != self.prior_u0 || self.prior_v != self.prior_v0)
        {
            return Err(Error::Config("Bayes-optimal state evolution needs matched models".into()));
        }
        Ok(())
    }

    fn fields(&self, other: &SEOrderParams, scale: f64) -> Result<Fields> {
        let mut f = Fields::new(&other.m, &other.q, &other.sigma, &self.noise, scale)?;
        if self.mode == SEMode::QuenchedConventional {
            f.signal.fill(0.0);
        }
        Ok(f)
    }

    fn u_moments(&self, v: &SEOrderParams) -> Result<InputMoments> {
        let f = self.fields(v, self.alpha)?;
        input_moments(&self.prior_u, &self.prior_u0, &f, &self.integration)
    }

    fn v_moments(&self, u: &SEOrderParams) -> Result<InputMoments> {
        let f = self.fields(u, 1.0)?;
        input_moments(&self.prior_v, &self.prior_v0, &f, &self.integration)
    }

    fn project(&self, m: InputMoments, second: &DMatrix<f64>) -> SEOrderParams {
        if self.mode == SEMode::BayesOptimal {
            let mut mm = m.m;
            symmetrize(&mut mm);
            SEOrderParams::bayes(mm, second)
        } else {
            SEOrderParams { m: m.m, q: m.q, sigma: m.sigma }
        }
    }
}

/// One bipartite step: `U` from the current `V`, then `V` from the new `U`.
/// In Bayes-optimal mode both sides stay on the Nishimori manifold.
pub fn se_bipartite_step(
    model: &BipartiteSEModel,
    _u: &SEOrderParams,
    v: &SEOrderParams,
) -> Result<(SEOrderParams, SEOrderParams)> {
    model.validate()?;
    let nu = model.project(model.u_moments(v)?, &model.prior_u0.moments().1);
    let nv = model.project(model.v_moments(&nu)?, &model.prior_v0.moments().1);
    Ok((nu, nv))
}

/// Bipartite replica free energy (per row of `U`).
pub fn bipartite_free_energy(
    model: &BipartiteSEModel,
    u: &SEOrderParams,
    v: &SEOrderParams,
) -> Result<f64> {
    model.validate()?;
    let n = &model.noise;
    let al = model.alpha;
    let lu = model.u_moments(v)?.log_z;
    let lv = model.v_moments(u)?.log_z;
    let qsu = &u.q + &u.sigma;
    let qsv = &v.q + &v.sigma;
    let m_term = if model.mode == SEMode::QuenchedConventional {
        0.0
    } else {
        al * (&v.m * u.m.transpose()).trace() * n.inv_delta_hat()
    };
    Ok(al * (&v.q * &u.q).trace() / (2.0 * n.delta_tilde) - m_term
        - al * n.r_bar * (&qsv * &qsu).trace()
        + lu
        + al * lv)
}

/// Bayes-optimal bipartite free energy
/// `E log Z_u(alpha M_v/D, ..) + alpha E log Z_v(M_u/D, ..) - alpha Tr(M_v M_u^T)/(2 D)`.
pub fn bipartite_free_energy_bayes(
    model: &BipartiteSEModel,
    m_u: &DMatrix<f64>,
    m_v: &DMatrix<f64>,
) -> Result<f64> {
    let u = SEOrderParams::bayes(m_u.clone(), &model.prior_u0.moments().1);
    let v = SEOrderParams::bayes(m_v.clone(), &model.prior_v0.moments().1);
    let lu = model.u_moments(&v)?.log_z;
    let lv = model.v_moments(&u)?.log_z;
    Ok(lu + model.alpha * lv
        - model.alpha * (m_v * m_u.transpose()).trace() / (2.0 * model.noise.delta_tilde))
}

/// Damped bipartite iteration to a fixed point.
pub fn iterate_bipartite(
    model: &BipartiteSEModel,
    u0: &SEOrderParams,
    v0: &SEOrderParams,
    opts: &FixedPointOptions,
) -> Result<FixedPoint<(SEOrderParams, SEOrderParams)>> {
    let (mut u, mut v) = (u0.clone(), v0.clone());
    for t in 1..=opts.max_iters {
        let (nu, nv) = se_bipartite_step(model, &u, &v)?;
        let nu = u.damped(&nu, opts.damping);
        let nv = v.damped(&nv, opts.damping);
        let change = u.max_change(&nu).max(v.max_change(&nv));
        u = nu;
        v = nv;
        if change < opts.tol {
            return Ok(FixedPoint { params: (u, v), iterations: t, converged: true });
        }
    }
    Ok(FixedPoint { params: (u, v), iterations: opts.max_iters, converged: false })
}
