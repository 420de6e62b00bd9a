//! Output channels: sampling, score functions and effective noise parameters.
//!
//! A channel is described by its log-likelihood `g(Y, w) = log P_out(Y | w)`.
//! The score `S = dg/dw` and `R = S^2 + d2g/dw2`, both at `w = 0`, are all
//! the low-rank algorithms ever see of `Y`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::quadrature::{expect_normal, gauss_laguerre, IntegrationConfig};
use crate::{Error, Result};

/// A single channel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ChannelFamily {
    /// `Y = w + sqrt(delta) Z`.
    Gaussian { delta: f64 },
    /// Assumed-only likelihood `g = beta Y w`; it does not generate data.
    Conventional { beta: f64 },
    /// Binary `Y` with `P(Y = 1 | w) = p_out + mu w`.
    Sbm { p_out: f64, mu: f64 },
    /// `Y = w + Laplace(1)`.
    Exponential,
}

/// A generating channel plus an optional mismatched likelihood used by the
/// algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(flatten)]
    pub generating: ChannelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed: Option<ChannelFamily>,
}

/// Effective noise parameters of a (generating, assumed) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// `1 / E[S^2]` over the generating law at `w = 0`.
    pub delta_tilde: f64,
    /// `1 / E[S dlogP_gen/dw]`; infinite for quenched disorder.
    pub delta_hat: f64,
    /// `E[R]`.
    pub r_bar: f64,
    /// Inverse Fisher information of the generating channel.
    pub delta_fisher: f64,
}

impl NoiseParams {
    pub fn bayes(delta: f64) -> Self {
        NoiseParams { delta_tilde: delta, delta_hat: delta, r_bar: 0.0, delta_fisher: delta }
    }

    pub fn inv_delta_hat(&self) -> f64 {
        if self.delta_hat.is_infinite() {
            0.0
        } else {
            1.0 / self.delta_hat
        }
    }

    /// True when the triple satisfies the Bayes-optimal identities.
    pub fn is_bayes(&self) -> bool {
        let tol = 1e-12 * self.delta_tilde.abs().max(1.0);
        (self.delta_tilde - self.delta_hat).abs() <= tol && self.r_bar.abs() <= 1e-12
    }
}

/// Randomly quenched disorder: `Y` drawn independently of any planted signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Disorder {
    /// `Y ~ N(0, j^2)`.
    Gaussian { j: f64 },
    /// `Y = +1` or `-1` with equal probability.
    PlusMinusOne,
}

impl Disorder {
    pub fn validate(&self) -> Result<()> {
        match self {
            Disorder::Gaussian { j } if !(*j > 0.0 && j.is_finite()) => {
                Err(Error::Config(format!("disorder scale must be positive, got {j}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Disorder::Gaussian { j } => j * rng.sample::<f64, _>(StandardNormal),
            Disorder::PlusMinusOne => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    fn expect(&self, cfg: &IntegrationConfig, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            Disorder::Gaussian { j } => expect_normal(cfg, |w| f(j * w)),
            Disorder::PlusMinusOne => 0.5 * (f(1.0) + f(-1.0)),
        }
    }
}

/// Elementwise map from `Y` to `(S, R)`; avoids materializing dense copies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreMap {
    /// `S = s Y`, `R = s^2 Y^2 - c`.
    Linear { s: f64, c: f64 },
    /// Binary `Y`: `S = s1` if `Y = 1`, `s0` otherwise; `R = r1` / `r0`.
    Binary { s1: f64, s0: f64, r1: f64, r0: f64 },
    /// `S = sign(Y)` with `S(0) = 0`, `R = 1`.
    Sign,
}

impl ScoreMap {
    #[inline]
    pub fn s(&self, y: f64) -> f64 {
        match *self {
            ScoreMap::Linear { s, .. } => s * y,
            ScoreMap::Binary { s1, s0, .. } => {
                if y > 0.5 {
                    s1
                } else {
                    s0
                }
            }
            ScoreMap::Sign => {
                if y > 0.0 {
                    1.0
                } else if y < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn r(&self, y: f64) -> f64 {
        match *self {
            ScoreMap::Linear { s, c } => s * s * y * y - c,
            ScoreMap::Binary { r1, r0, .. } => {
                if y > 0.5 {
                    r1
                } else {
                    r0
                }
            }
            ScoreMap::Sign => 1.0,
        }
    }

    #[inline]
    pub fn s_and_r(&self, y: f64) -> (f64, f64) {
        (self.s(y), self.r(y))
    }
}

impl ChannelFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            ChannelFamily::Gaussian { .. } => "gaussian",
            ChannelFamily::Conventional { .. } => "conventional",
            ChannelFamily::Sbm { .. } => "sbm",
            ChannelFamily::Exponential => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelFamily::Gaussian { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(Error::Config(format!("gaussian channel needs delta > 0, got {delta}")))
            }
            ChannelFamily::Conventional { beta } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::Config(format!("conventional channel needs beta > 0, got {beta}")))
            }
            ChannelFamily::Sbm { p_out, mu } if !(p_out > 0.0 && p_out < 1.0 && mu.is_finite()) => {
                Err(Error::Config(format!("sbm channel needs p_out in (0, 1), got {p_out}")))
            }
            _ => Ok(()),
        }
    }

    pub fn score_map(&self) -> ScoreMap {
        match *self {
            ChannelFamily::Gaussian { delta } => ScoreMap::Linear { s: 1.0 / delta, c: 1.0 / delta },
            ChannelFamily::Conventional { beta } => ScoreMap::Linear { s: beta, c: 0.0 },
            ChannelFamily::Sbm { p_out, mu } => {
                let s1 = mu / p_out;
                let s0 = -mu / (1.0 - p_out);
                ScoreMap::Binary { s1, s0, r1: 0.0, r0: 0.0 }
            }
            ChannelFamily::Exponential => ScoreMap::Sign,
        }
    }

    /// Log-likelihood `g(Y, w)` up to a `w`-independent constant.
    pub fn log_likelihood(&self, y: f64, w: f64) -> Result<f64> {
        self.check_support(y)?;
        Ok(match *self {
            ChannelFamily::Gaussian { delta } => -(y - w).powi(2) / (2.0 * delta),
            ChannelFamily::Conventional { beta } => beta * y * w,
            ChannelFamily::Sbm { p_out, mu } => {
                let p = p_out + mu * w;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange(p));
                }
                if y > 0.5 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            ChannelFamily::Exponential => -(y - w).abs(),
        })
    }

    fn check_support(&self, y: f64) -> Result<()> {
        let ok = match self {
            ChannelFamily::Sbm { .. } => y == 0.0 || y == 1.0,
            _ => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedValue { channel: self.tag(), value: y })
        }
    }

    /// `(S, R)` for a single observation.
    pub fn score(&self, y: f64) -> Result<(f64, f64)> {
        self.check_support(y)?;
        Ok(self.score_map().s_and_r(y))
    }

    /// Draws `Y ~ P_out(. | w)`.
    pub fn sample<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> Result<f64> {
        match *self {
            ChannelFamily::Gaussian { delta } => {
                Ok(w + delta.sqrt() * rng.sample::<f64, _>(StandardNormal))
            }
            ChannelFamily::Sbm { p_out, mu } => {
                let p = p_out + mu * w;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange(p));
                }
                Ok(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            }
            ChannelFamily::Exponential => {
                let e: f64 = Exp1.sample(rng);
                Ok(if rng.random::<bool>() { w + e } else { w - e })
            }
            ChannelFamily::Conventional { .. } => Err(Error::NonIntegrableChannel(
                "the conventional channel is a likelihood, not a generative model".into(),
            )),
        }
    }

    /// `E[f(Y)]` under `P_out(Y | 0)`.
    fn expect_at_zero(&self, cfg: &IntegrationConfig, f: impl Fn(f64) -> f64) -> Result<f64> {
        match *self {
            ChannelFamily::Gaussian { delta } => {
                let sd = delta.sqrt();
                Ok(expect_normal(cfg, |w| f(sd * w)))
            }
            ChannelFamily::Sbm { p_out, .. } => Ok(p_out * f(1.0) + (1.0 - p_out) * f(0.0)),
            ChannelFamily::Exponential => {
                let rule = gauss_laguerre(101);
                Ok(rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(y, wt)| 0.5 * wt * (f(*y) + f(-*y)))
                    .sum())
            }
            ChannelFamily::Conventional { .. } => Err(Error::NonIntegrableChannel(
                "the conventional channel cannot generate data".into(),
            )),
        }
    }

    /// Inverse Fisher information `1 / E[S^2]` of a generating channel.
    pub fn fisher_delta(&self) -> Result<f64> {
        match *self {
            ChannelFamily::Gaussian { delta } => Ok(delta),
            ChannelFamily::Sbm { p_out, mu } => Ok(p_out * (1.0 - p_out) / (mu * mu)),
            ChannelFamily::Exponential => Ok(1.0),
            ChannelFamily::Conventional { .. } => Err(Error::NonIntegrableChannel(
                "the conventional channel has no Fisher information".into(),
            )),
        }
    }
}

impl ChannelSpec {
    pub fn bayes(family: ChannelFamily) -> Self {
        ChannelSpec { generating: family, assumed: None }
    }

    pub fn gaussian(delta: f64) -> Self {
        ChannelSpec::bayes(ChannelFamily::Gaussian { delta })
    }

    pub fn mismatched(generating: ChannelFamily, assumed: ChannelFamily) -> Self {
        ChannelSpec { generating, assumed: Some(assumed) }
    }

    /// The likelihood used by the algorithm.
    pub fn assumed_family(&self) -> ChannelFamily {
        self.assumed.unwrap_or(self.generating)
    }

    pub fn is_bayes(&self) -> bool {
        self.assumed.is_none_or(|a| a == self.generating)
    }

    pub fn validate(&self) -> Result<()> {
        self.generating.validate()?;
        if let Some(a) = &self.assumed {
            a.validate()?;
        }
        if matches!(self.generating, ChannelFamily::Conventional { .. }) {
            return Err(Error::Config(
                "the conventional channel can only appear as the assumed likelihood".into(),
            ));
        }
        Ok(())
    }

    pub fn score_map(&self) -> ScoreMap {
        self.assumed_family().score_map()
    }

    /// `(S, R)` of one observation under the assumed likelihood.
    pub fn score(&self, y: f64) -> Result<(f64, f64)> {
        self.assumed_family().score(y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> Result<f64> {
        self.generating.sample(w, rng)
    }

    /// Effective noise parameters of the pair.
    pub fn noise_params(&self, cfg: &IntegrationConfig) -> Result<NoiseParams> {
        noise_params(&self.generating, &self.assumed_family(), cfg)
    }
}

/// Dense `(S, R)` of an observation matrix under the assumed likelihood.
pub fn score_matrices(channel: &ChannelSpec, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let assumed = channel.assumed_family();
    let mut s = DMatrix::zeros(y.nrows(), y.ncols());
    let mut r = DMatrix::zeros(y.nrows(), y.ncols());
    for (k, v) in y.iter().enumerate() {
        let (sv, rv) = assumed.score(*v)?;
        s[k] = sv;
        r[k] = rv;
    }
    Ok((s, r))
}

/// Noise parameters for data from `generating` analysed with `assumed`.
pub fn noise_params(
    generating: &ChannelFamily,
    assumed: &ChannelFamily,
    cfg: &IntegrationConfig,
) -> Result<NoiseParams> {
    let delta = generating.fisher_delta()?;
    if generating == assumed {
        return Ok(NoiseParams::bayes(delta));
    }
    let map_a = assumed.score_map();
    let map_g = generating.score_map();
    let mean_s = generating.expect_at_zero(cfg, |y| map_a.s(y))?;
    if mean_s.abs() > 1e-9 {
        return Err(Error::NonIntegrableChannel(format!(
            "assumed score has nonzero mean {mean_s} under the generating channel"
        )));
    }
    let s2 = generating.expect_at_zero(cfg, |y| map_a.s(y).powi(2))?;
    let cross = generating.expect_at_zero(cfg, |y| map_a.s(y) * map_g.s(y))?;
    let r_bar = generating.expect_at_zero(cfg, |y| map_a.r(y))?;
    if !(s2 > 0.0) {
        return Err(Error::NonIntegrableChannel("assumed score vanishes identically".into()));
    }
    Ok(NoiseParams {
        delta_tilde: 1.0 / s2,
        delta_hat: if cross == 0.0 { f64::INFINITY } else { 1.0 / cross },
        r_bar,
        delta_fisher: delta,
    })
}

/// Noise parameters for quenched disorder analysed with `assumed`.
pub fn noise_params_quenched(
    disorder: &Disorder,
    assumed: &ChannelFamily,
    cfg: &IntegrationConfig,
) -> Result<NoiseParams> {
    let map = assumed.score_map();
    let s2 = disorder.expect(cfg, |y| map.s(y).powi(2));
    let r_bar = disorder.expect(cfg, |y| map.r(y));
    if !(s2 > 0.0) {
        return Err(Error::NonIntegrableChannel("assumed score vanishes identically".into()));
    }
    Ok(NoiseParams {
        delta_tilde: 1.0 / s2,
        delta_hat: f64::INFINITY,
        r_bar,
        delta_fisher: f64::INFINITY,
    })
}
