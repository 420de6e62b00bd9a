//! Scalar Bayes-optimal state evolution `m^{t+1} = f(m^t / Delta)`.
//!
//! Every model here reduces the Bayes-optimal matrix recursion to one number
//! by symmetry; `f(x)` is the overlap reached by the scalar denoising problem
//! at signal-to-noise ratio `x`.

use serde::{Deserialize, Serialize};

use super::community::community_m_refined;
use super::general::{expect_prior_scalar, FixedPointOptions};
use super::jointly_sparse::se_jointly_sparse;
use crate::priors::PriorSpec;
use crate::quadrature::{expect_normal, log_grid, IntegrationConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ScalarModel {
    Bernoulli { rho: f64 },
    RademacherBernoulli { rho: f64 },
    GaussBernoulli { rho: f64 },
    TwoBalanced { rho: f64 },
    /// Standard normal prior.
    Gaussian,
    JointlySparse { rho: f64, rank: usize },
    Community { rank: usize },
    /// Any rank-one prior, evaluated by nested quadrature.
    Prior { prior: PriorSpec },
}

impl ScalarModel {
    /// Builds a model from its command-line tag.
    pub fn from_tag(tag: &str, rho: Option<f64>, rank: Option<usize>) -> Result<Self> {
        let need_rho =
            || rho.ok_or_else(|| Error::Config(format!("model `{tag}` needs the field `rho`")));
        let need_rank =
            || rank.ok_or_else(|| Error::Config(format!("model `{tag}` needs the field `rank`")));
        let m = match tag {
            "bernoulli" => ScalarModel::Bernoulli { rho: need_rho()? },
            "rademacher_bernoulli" => ScalarModel::RademacherBernoulli { rho: need_rho()? },
            "gauss_bernoulli" => ScalarModel::GaussBernoulli { rho: need_rho()? },
            "two_balanced" => ScalarModel::TwoBalanced { rho: need_rho()? },
            "gaussian" => ScalarModel::Gaussian,
            "jointly_sparse" => ScalarModel::JointlySparse { rho: need_rho()?, rank: need_rank()? },
            "community" => ScalarModel::Community { rank: need_rank()? },
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    /// The scalar model of a prior, when it has one.
    pub fn from_prior(prior: &PriorSpec) -> Result<Self> {
        let m = match prior {
            PriorSpec::Bernoulli { rho } => ScalarModel::Bernoulli { rho: *rho },
            PriorSpec::RademacherBernoulli { rho } => ScalarModel::RademacherBernoulli { rho: *rho },
            PriorSpec::TwoBalanced { rho } => ScalarModel::TwoBalanced { rho: *rho },
            PriorSpec::GaussBernoulliJoint { rho, rank: 1 }
            | PriorSpec::GaussBernoulliIndependent { rho, rank: 1 } => {
                ScalarModel::GaussBernoulli { rho: *rho }
            }
            PriorSpec::GaussBernoulliJoint { rho, rank } => {
                ScalarModel::JointlySparse { rho: *rho, rank: *rank }
            }
            PriorSpec::Community { rank } => ScalarModel::Community { rank: *rank },
            PriorSpec::Spherical { rank: 1 } => ScalarModel::Gaussian,
            p if p.rank() == 1 => ScalarModel::Prior { prior: p.clone() },
            p => return Err(Error::RankUnsupported(p.rank())),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ScalarModel::Bernoulli { .. } => "bernoulli",
            ScalarModel::RademacherBernoulli { .. } => "rademacher_bernoulli",
            ScalarModel::GaussBernoulli { .. } => "gauss_bernoulli",
            ScalarModel::TwoBalanced { .. } => "two_balanced",
            ScalarModel::Gaussian => "gaussian",
            ScalarModel::JointlySparse { .. } => "jointly_sparse",
            ScalarModel::Community { .. } => "community",
            ScalarModel::Prior { .. } => "prior",
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self {
            ScalarModel::Bernoulli { rho }
            | ScalarModel::RademacherBernoulli { rho }
            | ScalarModel::GaussBernoulli { rho }
            | ScalarModel::TwoBalanced { rho }
            | ScalarModel::JointlySparse { rho, .. } => Some(*rho),
            _ => None,
        }
    }

    /// Same family with a different sparsity.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        let m = match self {
            ScalarModel::Bernoulli { .. } => ScalarModel::Bernoulli { rho },
            ScalarModel::RademacherBernoulli { .. } => ScalarModel::RademacherBernoulli { rho },
            ScalarModel::GaussBernoulli { .. } => ScalarModel::GaussBernoulli { rho },
            ScalarModel::TwoBalanced { .. } => ScalarModel::TwoBalanced { rho },
            ScalarModel::JointlySparse { rank, .. } => ScalarModel::JointlySparse { rho, rank: *rank },
            other => {
                return Err(Error::Config(format!("model `{}` has no parameter rho", other.tag())))
            }
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            ScalarModel::TwoBalanced { rho } if !(*rho > 0.0 && *rho < 1.0) => {
                bad(format!("rho must lie in (0, 1), got {rho}"))
            }
            ScalarModel::Bernoulli { rho }
            | ScalarModel::RademacherBernoulli { rho }
            | ScalarModel::GaussBernoulli { rho }
            | ScalarModel::JointlySparse { rho, .. }
                if !(*rho > 0.0 && *rho <= 1.0) =>
            {
                bad(format!("rho must lie in (0, 1], got {rho}"))
            }
            ScalarModel::JointlySparse { rank: 0, .. } => bad("rank must be at least 1".into()),
            ScalarModel::Community { rank } if *rank < 2 => {
                bad(format!("community detection needs at least 2 groups, got {rank}"))
            }
            ScalarModel::Prior { prior } => {
                prior.validate()?;
                if prior.rank() != 1 || matches!(prior, PriorSpec::Community { .. }) {
                    return Err(Error::RankUnsupported(prior.rank()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `f(x)`, the next overlap at signal-to-noise ratio `x = m / Delta`.
    pub fn f(&self, x: f64, cfg: &IntegrationConfig) -> f64 {
        let x = x.max(0.0);
        match self {
            ScalarModel::Bernoulli { rho } => {
                let l = logit(*rho);
                let sx = x.sqrt();
                rho * expect_normal(cfg, |w| sigmoid(l + 0.5 * x + sx * w))
            }
            ScalarModel::RademacherBernoulli { rho } => {
                let l = logit(*rho);
                let sx = x.sqrt();
                rho * expect_normal(cfg, |w| {
                    let b = x + sx * w;
                    b.tanh() * sigmoid(l - 0.5 * x + ln_cosh(b))
                })
            }
            ScalarModel::GaussBernoulli { rho } => {
                if x == 0.0 {
                    return 0.0;
                }
                let l = logit(*rho) - 0.5 * x.ln_1p();
                rho * x / (1.0 + x) * expect_normal(cfg, |w| w * w * sigmoid(l + 0.5 * x * w * w))
            }
            ScalarModel::TwoBalanced { rho } => {
                let k = 2.0 * rho * (1.0 - rho);
                let (c0, c1) = (x / k, (2.0 * x / k).sqrt());
                expect_normal(cfg, |u| k * balanced_ratio(c0 + c1 * u, k))
            }
            ScalarModel::Gaussian => x / (1.0 + x),
            ScalarModel::JointlySparse { rho, rank } => se_jointly_sparse(*rho, *rank, x),
            ScalarModel::Community { rank } => community_m_refined(*rank, x, cfg.trapezoid_refine),
            ScalarModel::Prior { prior } => generic_f(prior, x, cfg).unwrap_or(f64::NAN),
        }
    }

    /// `f(0)`, equal to `<x0>^2` for rank-one priors.
    pub fn f0(&self) -> f64 {
        match self {
            ScalarModel::Bernoulli { rho } => rho * rho,
            ScalarModel::Prior { prior } => prior.moments().0[0].powi(2),
            _ => 0.0,
        }
    }

    /// Whether the uninformative point `m = 0` is a fixed point.
    pub fn zero_mean(&self) -> bool {
        self.f0() == 0.0
    }

    /// Largest value of the order parameter (perfect recovery).
    pub fn m_max(&self) -> f64 {
        match self {
            ScalarModel::Bernoulli { rho }
            | ScalarModel::RademacherBernoulli { rho }
            | ScalarModel::GaussBernoulli { rho }
            | ScalarModel::JointlySparse { rho, .. } => *rho,
            ScalarModel::TwoBalanced { .. } | ScalarModel::Gaussian | ScalarModel::Community { .. } => 1.0,
            ScalarModel::Prior { prior } => prior.moments().1[(0, 0)],
        }
    }

    /// Mean-squared error `Tr[<x0 x0^T> - M]` at overlap `m`.
    pub fn mse(&self, m: f64) -> f64 {
        match self {
            ScalarModel::JointlySparse { rank, .. } => *rank as f64 * (self.m_max() - m),
            ScalarModel::Community { rank } => (1.0 - 1.0 / *rank as f64) * (1.0 - m),
            _ => self.m_max() - m,
        }
    }

    /// Slope of `f` at the origin, i.e. the instability point of the
    /// uniform fixed point; absent for priors with a non-zero mean.
    pub fn delta_c(&self) -> Option<f64> {
        if !self.zero_mean() {
            return None;
        }
        match self {
            ScalarModel::Community { rank } => Some(1.0 / (*rank as f64).powi(2)),
            ScalarModel::Prior { prior } => Some(prior.covariance()[(0, 0)].powi(2)),
            _ => Some(self.m_max().powi(2)),
        }
    }

    /// Corresponding prior, for the models that have one.
    pub fn to_prior(&self) -> Option<PriorSpec> {
        Some(match self {
            ScalarModel::Bernoulli { rho } => PriorSpec::Bernoulli { rho: *rho },
            ScalarModel::RademacherBernoulli { rho } => PriorSpec::RademacherBernoulli { rho: *rho },
            ScalarModel::GaussBernoulli { rho } => PriorSpec::GaussBernoulliJoint { rho: *rho, rank: 1 },
            ScalarModel::TwoBalanced { rho } => PriorSpec::TwoBalanced { rho: *rho },
            ScalarModel::Gaussian => PriorSpec::gaussian_isotropic(1, 1.0),
            ScalarModel::JointlySparse { rho, rank } => {
                PriorSpec::GaussBernoulliJoint { rho: *rho, rank: *rank }
            }
            ScalarModel::Community { rank } => PriorSpec::Community { rank: *rank },
            ScalarModel::Prior { prior } => prior.clone(),
        })
    }

    /// Logarithmic grid suited to the model's threshold search.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            ScalarModel::Community { rank } => {
                let r = *rank as f64;
                log_grid(1e-4, (20.0 * r * r.ln()).max(200.0), 1200)
            }
            _ => {
                // The informative branch must reach Delta ~ rho^2, i.e. x ~ 1 / rho.
                let hi = self.rho().map_or(1e4, |rho| (10.0 / rho).max(1e4));
                let decades = (hi / 1e-6).log10();
                log_grid(1e-6, hi, (200.0 * decades).ceil() as usize)
            }
        }
    }
}

/// `f^SE(x)` of a scalar model.
pub fn se_scalar_bayes(model: &ScalarModel, x: f64, cfg: &IntegrationConfig) -> f64 {
    model.f(x, cfg)
}

fn generic_f(prior: &PriorSpec, x: f64, cfg: &IntegrationConfig) -> Result<f64> {
    let sx = x.sqrt();
    let out = expect_prior_scalar(prior, cfg, 1, |x0, out| {
        out[0] = x0
            * expect_normal(cfg, |w| {
                prior.f_in_scalar(x, x * x0 + sx * w).map(|v| v.mean).unwrap_or(f64::NAN)
            });
    })?;
    Ok(out[0])
}

fn logit(rho: f64) -> f64 {
    if rho >= 1.0 {
        f64::INFINITY
    } else {
        (rho / (1.0 - rho)).ln()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn ln_cosh(b: f64) -> f64 {
    let a = b.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `sinh(z) / (1 + k (cosh(z) - 1))` without overflow.
fn balanced_ratio(z: f64, k: f64) -> f64 {
    let a = z.abs();
    let e1 = (-a).exp();
    let e2 = e1 * e1;
    z.signum() * (1.0 - e2) / (2.0 * e1 * (1.0 - k) + k * (1.0 + e2))
}

/// Free-energy gain `phi(m) - phi(0) = (int_0^x f - x f(x) / 2) / 2` of the
/// point `m = f(x)` on the fixed-point curve, `x = m / Delta`.
pub fn free_energy_gap(model: &ScalarModel, x: f64, cfg: &IntegrationConfig) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    // Simpson in ln u over [x 1e-12, x], plus a trapezoid below.
    let n = 2000;
    let (a, b) = ((x * 1e-12).ln(), x.ln());
    let h = (b - a) / n as f64;
    let g = |s: f64| {
        let u = s.exp();
        model.f(u, cfg) * u
    };
    let mut acc = g(a) + g(b);
    for k in 1..n {
        acc += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let lo = x * 1e-12;
    let integral = acc * h / 3.0 + 0.5 * lo * (model.f0() + model.f(lo, cfg));
    0.5 * (integral - 0.5 * x * model.f(x, cfg))
}

/// Result of iterating a scalar map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarFixedPoint {
    pub m: f64,
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped iteration of `m <- f(m / delta)` from `m0`.
pub fn iterate_scalar(
    model: &ScalarModel,
    delta: f64,
    m0: f64,
    opts: &FixedPointOptions,
    cfg: &IntegrationConfig,
) -> ScalarFixedPoint {
    let mut m = m0;
    for t in 1..=opts.max_iters {
        let next = opts.damping * model.f(m / delta, cfg) + (1.0 - opts.damping) * m;
        let change = (next - m).abs();
        m = next;
        if change < opts.tol {
            return ScalarFixedPoint { m, mse: model.mse(m), iterations: t, converged: true };
        }
    }
    ScalarFixedPoint { m, mse: model.mse(m), iterations: opts.max_iters, converged: false }
}
