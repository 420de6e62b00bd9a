//! Prior families, their moments and input functions.
//!
//! The input function of a prior `P` at fields `(A, B)` is the mean of the
//! tilted density `P(x) exp(B.x - x.A.x / 2) / Z(A, B)`; its derivative with
//! respect to `B` is the covariance of the same density. Every family below
//! has a closed form, so no numerical integration happens here.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{log_sum_exp, spd_inverse_logdet, symmetrize};
use crate::{Error, Result};

/// Smallest admissible eigenvalue of the quadratic form of Gaussian factors.
pub const PD_FLOOR: f64 = 1e-12;

/// Largest rank for which the independent Gauss-Bernoulli prior is summed
/// exactly over its `2^r` support patterns.
pub const MAX_INDEPENDENT_RANK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `rho` on `+1`, `1 - rho` on `-1`.
    Ising { rho: f64 },
    /// `rho` on `1`, `1 - rho` on `0`.
    Bernoulli { rho: f64 },
    /// `rho / 2` on each of `+1` and `-1`, `1 - rho` on `0`.
    RademacherBernoulli { rho: f64 },
    /// Whole vector is zero with probability `1 - rho`, standard normal otherwise.
    GaussBernoulliJoint { rho: f64, rank: usize },
    /// Each coordinate independently zero or standard normal.
    #[serde(rename = "gauss_bernoulli_indep")]
    GaussBernoulliIndependent { rho: f64, rank: usize },
    /// Normal with mean `mean` and row-major covariance `cov`.
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    /// Uniform over the `rank` canonical basis vectors.
    Community { rank: usize },
    /// Two atoms with zero mean and unit variance; the positive one has weight `rho`.
    TwoBalanced { rho: f64 },
    /// Standard normal in `rank` dimensions.
    Spherical { rank: usize },
}

/// Output of the input function.
#[derive(Debug, Clone, PartialEq)]
pub struct InputResult {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub log_z: f64,
}

/// Rank-one output of the input function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarInput {
    pub mean: f64,
    pub var: f64,
    pub log_z: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPrior(format!("rho must lie in (0, 1], got {rho}")))
    }
}

fn check_rank(rank: usize) -> Result<()> {
    if rank >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidPrior("rank must be at least 1".into()))
    }
}

/// `ln(1 - rho)`, equal to `-inf` at `rho = 1`.
fn ln_complement(rho: f64) -> f64 {
    (-rho).ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl PriorSpec {
    pub fn gaussian_isotropic(rank: usize, variance: f64) -> Self {
        let mut cov = vec![0.0; rank * rank];
        for k in 0..rank {
            cov[k * rank + k] = variance;
        }
        PriorSpec::Gaussian { mean: vec![0.0; rank], cov }
    }

    pub fn rank(&self) -> usize {
        match self {
            PriorSpec::Ising { .. }
            | PriorSpec::Bernoulli { .. }
            | PriorSpec::RademacherBernoulli { .. }
            | PriorSpec::TwoBalanced { .. } => 1,
            PriorSpec::GaussBernoulliJoint { rank, .. }
            | PriorSpec::GaussBernoulliIndependent { rank, .. }
            | PriorSpec::Community { rank }
            | PriorSpec::Spherical { rank } => *rank,
            PriorSpec::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Configuration tag of the family.
    pub fn tag(&self) -> &'static str {
        match self {
            PriorSpec::Ising { .. } => "ising",
            PriorSpec::Bernoulli { .. } => "bernoulli",
            PriorSpec::RademacherBernoulli { .. } => "rademacher_bernoulli",
            PriorSpec::GaussBernoulliJoint { .. } => "gauss_bernoulli_joint",
            PriorSpec::GaussBernoulliIndependent { .. } => "gauss_bernoulli_indep",
            PriorSpec::Gaussian { .. } => "gaussian",
            PriorSpec::Community { .. } => "community",
            PriorSpec::TwoBalanced { .. } => "two_balanced",
            PriorSpec::Spherical { .. } => "spherical",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Ising { rho } | PriorSpec::Bernoulli { rho } => check_rho(*rho),
            PriorSpec::RademacherBernoulli { rho } => check_rho(*rho),
            PriorSpec::TwoBalanced { rho } => {
                if *rho > 0.0 && *rho < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidPrior(format!(
                        "two_balanced needs rho in (0, 1), got {rho}"
                    )))
                }
            }
            PriorSpec::GaussBernoulliJoint { rho, rank } => {
                check_rho(*rho)?;
                check_rank(*rank)
            }
            PriorSpec::GaussBernoulliIndependent { rho, rank } => {
                check_rho(*rho)?;
                check_rank(*rank)?;
                if *rank > MAX_INDEPENDENT_RANK {
                    return Err(Error::InvalidPrior(format!(
                        "gauss_bernoulli_indep supports rank up to {MAX_INDEPENDENT_RANK}"
                    )));
                }
                Ok(())
            }
            PriorSpec::Community { rank } => {
                if *rank >= 2 {
                    Ok(())
                } else {
                    Err(Error::InvalidPrior("community needs at least 2 groups".into()))
                }
            }
            PriorSpec::Spherical { rank } => check_rank(*rank),
            PriorSpec::Gaussian { mean, cov } => {
                let r = mean.len();
                check_rank(r)?;
                if cov.len() != r * r {
                    return Err(Error::InvalidPrior(format!(
                        "gaussian covariance needs {} entries, got {}",
                        r * r,
                        cov.len()
                    )));
                }
                let c = DMatrix::from_row_slice(r, r, cov);
                if (&c - c.transpose()).abs().max() > 1e-12 {
                    return Err(Error::InvalidPrior("gaussian covariance is not symmetric".into()));
                }
                if spd_inverse_logdet(&c, PD_FLOOR).is_none() {
                    return Err(Error::InvalidPrior(
                        "gaussian covariance must be positive definite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Mean vector and second-moment matrix `<x x^T>`.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let r = self.rank();
        match self {
            PriorSpec::Ising { rho } => (
                DVector::from_element(1, 2.0 * rho - 1.0),
                DMatrix::from_element(1, 1, 1.0),
            ),
            PriorSpec::Bernoulli { rho } => {
                (DVector::from_element(1, *rho), DMatrix::from_element(1, 1, *rho))
            }
            PriorSpec::RademacherBernoulli { rho } => {
                (DVector::zeros(1), DMatrix::from_element(1, 1, *rho))
            }
            PriorSpec::TwoBalanced { .. } => (DVector::zeros(1), DMatrix::from_element(1, 1, 1.0)),
            PriorSpec::GaussBernoulliJoint { rho, .. }
            | PriorSpec::GaussBernoulliIndependent { rho, .. } => {
                (DVector::zeros(r), DMatrix::identity(r, r) * *rho)
            }
            PriorSpec::Spherical { .. } => (DVector::zeros(r), DMatrix::identity(r, r)),
            PriorSpec::Community { rank } => {
                let p = 1.0 / *rank as f64;
                (DVector::from_element(r, p), DMatrix::identity(r, r) * p)
            }
            PriorSpec::Gaussian { mean, cov } => {
                let m = DVector::from_column_slice(mean);
                let c = DMatrix::from_row_slice(r, r, cov);
                let second = &c + &m * m.transpose();
                (m, second)
            }
        }
    }

    /// Covariance `<x x^T> - <x><x>^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let (m, s) = self.moments();
        s - &m * m.transpose()
    }

    /// `<x^3>` for rank-one priors.
    pub fn third_moment_scalar(&self) -> Result<f64> {
        match self {
            PriorSpec::Ising { rho } => Ok(2.0 * rho - 1.0),
            PriorSpec::Bernoulli { rho } => Ok(*rho),
            PriorSpec::RademacherBernoulli { .. } => Ok(0.0),
            PriorSpec::TwoBalanced { rho } => Ok((1.0 - 2.0 * rho) / (rho * (1.0 - rho)).sqrt()),
            PriorSpec::GaussBernoulliJoint { rank: 1, .. }
            | PriorSpec::GaussBernoulliIndependent { rank: 1, .. }
            | PriorSpec::Spherical { rank: 1 } => Ok(0.0),
            PriorSpec::Gaussian { mean, cov } if mean.len() == 1 => {
                let (m, v) = (mean[0], cov[0]);
                Ok(m * m * m + 3.0 * m * v)
            }
            other => Err(Error::RankUnsupported(other.rank())),
        }
    }

    /// Atoms `(probability, value)` for rank-one priors with finite support.
    pub fn scalar_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            PriorSpec::Ising { rho } => Some(vec![(*rho, 1.0), (1.0 - rho, -1.0)]),
            PriorSpec::Bernoulli { rho } => Some(vec![(*rho, 1.0), (1.0 - rho, 0.0)]),
            PriorSpec::RademacherBernoulli { rho } => {
                Some(vec![(0.5 * rho, 1.0), (0.5 * rho, -1.0), (1.0 - rho, 0.0)])
            }
            PriorSpec::TwoBalanced { rho } => {
                let (a, b) = two_balanced_atoms(*rho);
                Some(vec![(*rho, a), (1.0 - rho, b)])
            }
            _ => None,
        }
    }

    /// Draws `n` i.i.d. rows; the result is an `n x r` matrix.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let r = self.rank();
        let mut out = DMatrix::zeros(n, r);
        match self {
            PriorSpec::Gaussian { mean, cov } => {
                let c = DMatrix::from_row_slice(r, r, cov);
                let l = c.cholesky().expect("validated covariance").l();
                for i in 0..n {
                    let z = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let x = &l * z;
                    for k in 0..r {
                        out[(i, k)] = mean[k] + x[k];
                    }
                }
            }
            _ => {
                for i in 0..n {
                    let row = self.sample_one(rng);
                    for k in 0..r {
                        out[(i, k)] = row[k];
                    }
                }
            }
        }
        out
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let r = self.rank();
        match self {
            PriorSpec::Ising { rho } => vec![if rng.random::<f64>() < *rho { 1.0 } else { -1.0 }],
            PriorSpec::Bernoulli { rho } => vec![if rng.random::<f64>() < *rho { 1.0 } else { 0.0 }],
            PriorSpec::RademacherBernoulli { rho } => {
                let u: f64 = rng.random();
                vec![if u < 0.5 * rho {
                    1.0
                } else if u < *rho {
                    -1.0
                } else {
                    0.0
                }]
            }
            PriorSpec::TwoBalanced { rho } => {
                let (a, b) = two_balanced_atoms(*rho);
                vec![if rng.random::<f64>() < *rho { a } else { b }]
            }
            PriorSpec::GaussBernoulliJoint { rho, .. } => {
                let on = rng.random::<f64>() < *rho;
                (0..r)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        if on {
                            z
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            PriorSpec::GaussBernoulliIndependent { rho, .. } => (0..r)
                .map(|_| {
                    let on = rng.random::<f64>() < *rho;
                    let z: f64 = rng.sample(StandardNormal);
                    if on {
                        z
                    } else {
                        0.0
                    }
                })
                .collect(),
            PriorSpec::Spherical { .. } => (0..r).map(|_| rng.sample(StandardNormal)).collect(),
            PriorSpec::Community { rank } => {
                let k = rng.random_range(0..*rank);
                (0..r).map(|j| if j == k { 1.0 } else { 0.0 }).collect()
            }
            PriorSpec::Gaussian { .. } => unreachable!("handled by sample_with"),
        }
    }

    /// Input function of a rank-one prior with scalar fields.
    pub fn f_in_scalar(&self, a: f64, b: f64) -> Result<ScalarInput> {
        match self {
            PriorSpec::Ising { rho } => {
                let lp = [rho.ln() + b, ln_complement(*rho) - b];
                let log_z = log_sum_exp(&lp) - 0.5 * a;
                let mean = if *rho == 1.0 {
                    1.0
                } else {
                    (b + 0.5 * (rho.ln() - ln_complement(*rho))).tanh()
                };
                Ok(ScalarInput { mean, var: (1.0 - mean * mean).max(0.0), log_z })
            }
            PriorSpec::Bernoulli { rho } => {
                let on = rho.ln() + b - 0.5 * a;
                let off = ln_complement(*rho);
                let log_z = log_sum_exp(&[on, off]);
                let p = if *rho == 1.0 { 1.0 } else { sigmoid(on - off) };
                Ok(ScalarInput { mean: p, var: p * (1.0 - p), log_z })
            }
            PriorSpec::RademacherBernoulli { rho } => {
                let half = rho.ln() - std::f64::consts::LN_2 - 0.5 * a;
                let terms = [half + b, half - b, ln_complement(*rho)];
                let log_z = log_sum_exp(&terms);
                let pp = (terms[0] - log_z).exp();
                let pm = (terms[1] - log_z).exp();
                let mean = pp - pm;
                let second = pp + pm;
                Ok(ScalarInput { mean, var: (second - mean * mean).max(0.0), log_z })
            }
            PriorSpec::TwoBalanced { rho } => {
                let (xa, xb) = two_balanced_atoms(*rho);
                let la = rho.ln() + b * xa - 0.5 * a * xa * xa;
                let lb = ln_complement(*rho) + b * xb - 0.5 * a * xb * xb;
                let log_z = log_sum_exp(&[la, lb]);
                let p = sigmoid(la - lb);
                let mean = p * xa + (1.0 - p) * xb;
                Ok(ScalarInput { mean, var: p * (1.0 - p) * (xa - xb).powi(2), log_z })
            }
            PriorSpec::GaussBernoulliJoint { rho, rank: 1 }
            | PriorSpec::GaussBernoulliIndependent { rho, rank: 1 } => {
                let q = 1.0 + a;
                if !(q > PD_FLOOR) {
                    return Err(Error::NonConvergentIntegral(format!("1 + A = {q} is not positive")));
                }
                let lg = rho.ln() - 0.5 * q.ln() + 0.5 * b * b / q;
                let off = ln_complement(*rho);
                let log_z = log_sum_exp(&[lg, off]);
                let pi = if *rho == 1.0 { 1.0 } else { sigmoid(lg - off) };
                let m = b / q;
                Ok(ScalarInput {
                    mean: pi * m,
                    var: pi / q + pi * (1.0 - pi) * m * m,
                    log_z,
                })
            }
            PriorSpec::Spherical { rank: 1 } => gaussian_scalar(0.0, 1.0, a, b),
            PriorSpec::Gaussian { mean, cov } if mean.len() == 1 => gaussian_scalar(mean[0], cov[0], a, b),
            other => Err(Error::RankUnsupported(other.rank())),
        }
    }

    /// Input function for general rank. `a` must be symmetric.
    pub fn f_in(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<InputResult> {
        let r = self.rank();
        if a.nrows() != r || a.ncols() != r || b.len() != r {
            return Err(Error::ShapeMismatch(format!(
                "prior has rank {r}, fields are {}x{} and {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if r == 1 && !matches!(self, PriorSpec::Community { .. }) {
            let s = self.f_in_scalar(a[(0, 0)], b[0])?;
            return Ok(InputResult {
                mean: DVector::from_element(1, s.mean),
                covariance: DMatrix::from_element(1, 1, s.var),
                log_z: s.log_z,
            });
        }
        match self {
            PriorSpec::Community { rank } => {
                let logits: Vec<f64> = (0..r).map(|k| b[k] - 0.5 * a[(k, k)]).collect();
                let lse = log_sum_exp(&logits);
                let p = DVector::from_iterator(r, logits.iter().map(|l| (l - lse).exp()));
                let cov = DMatrix::from_diagonal(&p) - &p * p.transpose();
                Ok(InputResult { mean: p, covariance: cov, log_z: lse - (*rank as f64).ln() })
            }
            PriorSpec::GaussBernoulliJoint { rho, .. } => {
                let q = DMatrix::identity(r, r) + a;
                let (c, logdet) = spd_inverse_logdet(&q, PD_FLOOR).ok_or_else(|| {
                    Error::NonConvergentIntegral("I + A is not positive definite".into())
                })?;
                let cb = &c * b;
                let lg = rho.ln() - 0.5 * logdet + 0.5 * b.dot(&cb);
                let off = ln_complement(*rho);
                let log_z = log_sum_exp(&[lg, off]);
                let pi = if *rho == 1.0 { 1.0 } else { sigmoid(lg - off) };
                let mut cov = &c * pi + (&cb * cb.transpose()) * (pi * (1.0 - pi));
                symmetrize(&mut cov);
                Ok(InputResult { mean: cb * pi, covariance: cov, log_z })
            }
            PriorSpec::GaussBernoulliIndependent { rho, .. } => independent_gb(*rho, a, b),
            PriorSpec::Spherical { .. } => gaussian_general(&DVector::zeros(r), &DMatrix::identity(r, r), a, b),
            PriorSpec::Gaussian { mean, cov } => gaussian_general(
                &DVector::from_column_slice(mean),
                &DMatrix::from_row_slice(r, r, cov),
                a,
                b,
            ),
            _ => unreachable!("rank-one families are handled above"),
        }
    }
}

/// Atoms `(positive, negative)` of the two balanced groups prior.
pub fn two_balanced_atoms(rho: f64) -> (f64, f64) {
    (((1.0 - rho) / rho).sqrt(), -(rho / (1.0 - rho)).sqrt())
}

fn gaussian_scalar(mu: f64, v: f64, a: f64, b: f64) -> Result<ScalarInput> {
    let prec = 1.0 / v + a;
    if !(prec > PD_FLOOR) {
        return Err(Error::NonConvergentIntegral(format!(
            "precision 1/var + A = {prec} is not positive"
        )));
    }
    let h = mu / v + b;
    let mean = h / prec;
    let log_z = -0.5 * v.ln() - 0.5 * prec.ln() + 0.5 * h * h / prec - 0.5 * mu * mu / v;
    Ok(ScalarInput { mean, var: 1.0 / prec, log_z })
}

fn gaussian_general(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<InputResult> {
    let (sigma_inv, logdet_sigma) = spd_inverse_logdet(sigma, PD_FLOOR)
        .ok_or_else(|| Error::InvalidPrior("gaussian covariance must be positive definite".into()))?;
    let prec = &sigma_inv + a;
    let (cov, logdet_prec) = spd_inverse_logdet(&prec, PD_FLOOR).ok_or_else(|| {
        Error::NonConvergentIntegral("inverse covariance plus A is not positive definite".into())
    })?;
    let h = &sigma_inv * mu + b;
    let mean = &cov * &h;
    let log_z = -0.5 * logdet_sigma - 0.5 * logdet_prec + 0.5 * h.dot(&mean)
        - 0.5 * mu.dot(&(&sigma_inv * mu));
    Ok(InputResult { mean, covariance: cov, log_z })
}

/// Exact sum over the `2^r` zero patterns of the independent prior.
fn independent_gb(rho: f64, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<InputResult> {
    let r = b.len();
    let mut log_w = Vec::with_capacity(1 << r);
    let mut parts: Vec<(Vec<usize>, DVector<f64>, DMatrix<f64>)> = Vec::with_capacity(1 << r);
    for mask in 0u32..(1u32 << r) {
        let idx: Vec<usize> = (0..r).filter(|k| mask & (1 << k) != 0).collect();
        let s = idx.len();
        let base = s as f64 * rho.ln() + (r - s) as f64 * ln_complement(rho);
        if s == 0 {
            log_w.push(base);
            parts.push((idx, DVector::zeros(0), DMatrix::zeros(0, 0)));
            continue;
        }
        let q = DMatrix::from_fn(s, s, |i, j| {
            a[(idx[i], idx[j])] + if i == j { 1.0 } else { 0.0 }
        });
        let bs = DVector::from_fn(s, |i, _| b[idx[i]]);
        let (c, logdet) = spd_inverse_logdet(&q, PD_FLOOR).ok_or_else(|| {
            Error::NonConvergentIntegral("I + A restricted to a support pattern is not positive definite".into())
        })?;
        let m = &c * &bs;
        log_w.push(base - 0.5 * logdet + 0.5 * bs.dot(&m));
        parts.push((idx, m, c));
    }
    let log_z = log_sum_exp(&log_w);
    let mut mean = DVector::zeros(r);
    let mut second = DMatrix::zeros(r, r);
    for (lw, (idx, m, c)) in log_w.iter().zip(&parts) {
        let w = (lw - log_z).exp();
        if w == 0.0 {
            continue;
        }
        for (i, &ki) in idx.iter().enumerate() {
            mean[ki] += w * m[i];
            for (j, &kj) in idx.iter().enumerate() {
                second[(ki, kj)] += w * (c[(i, j)] + m[i] * m[j]);
            }
        }
    }
    let mut cov = second - &mean * mean.transpose();
    symmetrize(&mut cov);
    Ok(InputResult { mean, covariance: cov, log_z })
}
