//! Phase transitions of scalar Bayes-optimal state evolution.
//!
//! Fixed points of `m = f(m / Delta)` are parametrised by `x = m / Delta` as
//! `(Delta(x), m(x)) = (f(x) / x, f(x))`. A branch is stable where `Delta(x)`
//! decreases. Local maxima of `Delta(x)` are spinodals of the informative
//! branch, local minima spinodals of the uninformative one, and
//! `G(x) = (int_0^x f - x f(x) / 2) / 2` is the free-energy gain of the fixed
//! point at `x` over `m = 0` at the same `Delta`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::scalar::ScalarModel;
use crate::linalg::max_eigenvalue;
use crate::priors::PriorSpec;
use crate::quadrature::IntegrationConfig;
use crate::{Error, Result};

/// Slopes of `ln Delta` below this are treated as flat.
const SLOPE_TOL: f64 = 1e-7;
/// A first-order window is reported when `d ln Delta / d ln x` exceeds this
/// somewhere on the grid.
pub const FIRST_ORDER_SLOPE: f64 = 1e-6;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Instability point of the uniform fixed point (zero-mean priors).
    pub delta_c: Option<f64>,
    pub delta_alg: Option<f64>,
    pub delta_it: Option<f64>,
    pub delta_dyn: Option<f64>,
    /// The first-order window has (numerically) zero width.
    pub tri_critical: bool,
}

impl Thresholds {
    pub fn has_first_order(&self) -> bool {
        self.delta_dyn.is_some()
    }
}

/// One point of the parametric fixed-point curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub delta: f64,
    pub m: f64,
    pub stable: bool,
    pub free_energy_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionOrder {
    SecondOrder,
    FirstOrder,
    Inconclusive,
}

/// Location where a first-order window opens or closes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriCritical {
    pub rho: f64,
    pub delta: f64,
    pub x: f64,
}

struct Curve<'a> {
    model: &'a ScalarModel,
    cfg: &'a IntegrationConfig,
    xs: Vec<f64>,
    fs: Vec<f64>,
    /// `int_0^{xs[k]} f`.
    cum: Vec<f64>,
}

impl<'a> Curve<'a> {
    fn new(model: &'a ScalarModel, grid: &[f64], cfg: &'a IntegrationConfig) -> Result<Self> {
        model.validate()?;
        if grid.len() < 16 {
            return Err(Error::Config(format!("grid needs at least 16 points, got {}", grid.len())));
        }
        if !(grid[0] > 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) || !grid.iter().all(|x| x.is_finite()) {
            return Err(Error::Config("grid must be positive and strictly increasing".into()));
        }
        let xs = grid.to_vec();
        let fs: Vec<f64> = evaluate_all(model, &xs, cfg);
        if let Some(k) = fs.iter().position(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::NonConvergentIntegral(format!(
                "f({}) = {} is not positive",
                xs[k], fs[k]
            )));
        }
        let mut cum = Vec::with_capacity(xs.len());
        let mut acc = 0.5 * xs[0] * (model.f0() + fs[0]);
        cum.push(acc);
        for k in 1..xs.len() {
            acc += 0.5 * (xs[k] - xs[k - 1]) * (fs[k] + fs[k - 1]);
            cum.push(acc);
        }
        Ok(Curve { model, cfg, xs, fs, cum })
    }

    fn f(&self, x: f64) -> f64 {
        self.model.f(x, self.cfg)
    }

    fn delta(&self, x: f64) -> f64 {
        self.f(x) / x
    }

    fn delta_at(&self, k: usize) -> f64 {
        self.fs[k] / self.xs[k]
    }

    /// `int_0^x f` given `f(x)`.
    fn integral(&self, x: f64, fx: f64) -> f64 {
        let k = self.xs.partition_point(|v| *v <= x);
        if k == 0 {
            return 0.5 * x * (self.model.f0() + fx);
        }
        let k = k - 1;
        self.cum[k] + 0.5 * (x - self.xs[k]) * (self.fs[k] + fx)
    }

    fn gap(&self, x: f64) -> f64 {
        let fx = self.f(x);
        0.5 * (self.integral(x, fx) - 0.5 * x * fx)
    }

    fn gap_at(&self, k: usize) -> f64 {
        0.5 * (self.cum[k] - 0.5 * self.xs[k] * self.fs[k])
    }

    /// `d ln Delta / d ln x` by central differences in `ln x`.
    fn log_slope(&self, x: f64) -> f64 {
        let e = 1e-3f64;
        ((self.f(x * e.exp()).ln() - self.f(x * (-e).exp()).ln()) / (2.0 * e)) - 1.0
    }

    /// Discrete `d ln Delta / d ln x` at interior grid points.
    fn grid_slopes(&self) -> Vec<f64> {
        let n = self.xs.len();
        let mut h = vec![0.0; n];
        for k in 1..n - 1 {
            h[k] = (self.fs[k + 1].ln() - self.fs[k - 1].ln()) / (self.xs[k + 1].ln() - self.xs[k - 1].ln()) - 1.0;
        }
        h[0] = h[1];
        h[n - 1] = h[n - 2];
        h
    }

    /// Golden-section search for an extremum of `g` in `[a, b]` (log scale).
    fn golden(&self, mut a: f64, mut b: f64, maximize: bool, g: impl Fn(f64) -> f64) -> (f64, f64) {
        let sign = if maximize { 1.0 } else { -1.0 };
        let (mut la, mut lb) = (a.ln(), b.ln());
        let mut c = lb - GOLDEN * (lb - la);
        let mut d = la + GOLDEN * (lb - la);
        let mut gc = sign * g(c.exp());
        let mut gd = sign * g(d.exp());
        while lb - la > 1e-8 {
            if gc > gd {
                lb = d;
                d = c;
                gd = gc;
                c = lb - GOLDEN * (lb - la);
                gc = sign * g(c.exp());
            } else {
                la = c;
                c = d;
                gc = gd;
                d = la + GOLDEN * (lb - la);
                gd = sign * g(d.exp());
            }
        }
        a = la.exp();
        b = lb.exp();
        let x = (a * b).sqrt();
        (x, g(x))
    }

    /// Solves `Delta(x) = target` for `x` in `[a, b]` where `Delta` is monotone.
    fn solve_delta(&self, a: f64, b: f64, target: f64) -> f64 {
        let g = |x: f64| (self.delta(x) / target).ln();
        illinois(a.ln(), b.ln(), |s| g(s.exp()), 1e-12).exp()
    }
}

fn evaluate_all(model: &ScalarModel, xs: &[f64], cfg: &IntegrationConfig) -> Vec<f64> {
    use rayon::prelude::*;
    xs.par_iter().map(|x| model.f(*x, cfg)).collect()
}

/// Regula falsi with the Illinois modification on a bracketing interval.
fn illinois(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64, abs_tol: f64) -> f64 {
    let (mut ga, mut gb) = (g(a), g(b));
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 || ga.signum() == gb.signum() {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c);
        if gc == 0.0 || (b - a).abs() < abs_tol {
            return c;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < abs_tol {
            break;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    x: f64,
    delta: f64,
    maximum: bool,
}

fn extrema(curve: &Curve) -> (Vec<Extremum>, i32, i32) {
    let n = curve.xs.len();
    let h = curve.grid_slopes();
    let sign = |v: f64| if v > SLOPE_TOL { 1 } else if v < -SLOPE_TOL { -1 } else { 0 };
    let mut out = Vec::new();
    let mut first = 0;
    let mut prev = 0;
    let mut prev_k = 0usize;
    for (k, hk) in h.iter().enumerate().take(n - 1).skip(1) {
        let s = sign(*hk);
        if s == 0 {
            continue;
        }
        if first == 0 {
            first = s;
        }
        if prev != 0 && s != prev {
            let maximum = prev > 0;
            let lo = curve.xs[prev_k.saturating_sub(1)];
            let hi = curve.xs[(k + 1).min(n - 1)];
            let (x, delta) = curve.golden(lo, hi, maximum, |x| curve.delta(x));
            out.push(Extremum { x, delta, maximum });
        }
        prev = s;
        prev_k = k;
    }
    (out, first, prev)
}

/// Locates `Delta_c`, `Delta_Alg`, `Delta_IT` and `Delta_Dyn` on `grid`.
pub fn thresholds(model: &ScalarModel, grid: &[f64], cfg: &IntegrationConfig) -> Result<Thresholds> {
    let curve = Curve::new(model, grid, cfg)?;
    let delta_c = model.delta_c();
    let (ext, first, last) = extrema(&curve);
    let none = Thresholds { delta_c, delta_alg: None, delta_it: None, delta_dyn: None, tri_critical: false };
    if last > 0 {
        return Err(Error::GridTooCoarse(format!(
            "Delta(x) still increases at the end of the grid (x = {})",
            curve.xs[curve.xs.len() - 1]
        )));
    }
    let Some(dyn_pt) = ext.iter().filter(|e| e.maximum).max_by(|a, b| a.delta.total_cmp(&b.delta)).copied()
    else {
        if first > 0 {
            return Err(Error::GridTooCoarse("Delta(x) increases without a maximum".into()));
        }
        return Ok(none);
    };
    // Low branch: the part of the curve below x_dyn that the uninformative
    // start reaches; it ends at the smallest local minimum before x_dyn.
    let rises_from_zero = first > 0 && model.zero_mean();
    let low_min = ext
        .iter()
        .filter(|e| !e.maximum && e.x < dyn_pt.x)
        .min_by(|a, b| a.delta.total_cmp(&b.delta))
        .copied();
    let (delta_alg, x_alg) = match (rises_from_zero, low_min) {
        (true, _) => (delta_c.unwrap_or(curve.delta_at(0)), 0.0),
        (false, Some(e)) => (e.delta, e.x),
        (false, None) => {
            return Err(Error::GridTooCoarse("no spinodal of the low branch on the grid".into()))
        }
    };
    // Right end of the informative branch.
    let x_end = ext
        .iter()
        .find(|e| !e.maximum && e.x > dyn_pt.x)
        .map(|e| e.x)
        .unwrap_or(curve.xs[curve.xs.len() - 1]);
    let delta_dyn = dyn_pt.delta;
    let x_left = curve.xs[0];
    let low_gap = |delta: f64| -> f64 {
        if x_alg == 0.0 || delta >= curve.delta_at(0) {
            if model.zero_mean() {
                0.0
            } else {
                curve.gap(x_left)
            }
        } else if delta <= delta_alg {
            curve.gap(x_alg)
        } else {
            curve.gap(curve.solve_delta(x_left, x_alg, delta))
        }
    };
    let high_gap = |delta: f64| -> f64 {
        if delta >= delta_dyn {
            curve.gap(dyn_pt.x)
        } else {
            curve.gap(curve.solve_delta(dyn_pt.x, x_end, delta))
        }
    };
    // When the informative branch runs off the grid before reaching
    // Delta_Alg, the search for Delta_IT is restricted to the covered part.
    let delta_floor = if x_end == curve.xs[curve.xs.len() - 1] {
        curve.delta(x_end).max(delta_alg)
    } else {
        delta_alg
    };
    let diff = |delta: f64| high_gap(delta) - low_gap(delta);
    let (d_lo, d_hi) = (diff(delta_floor), diff(delta_dyn));
    let delta_it = if d_hi >= 0.0 {
        delta_dyn
    } else if d_lo < 0.0 && delta_floor > delta_alg {
        return Err(Error::GridTooCoarse("informative branch leaves the grid".into()));
    } else if d_lo <= 0.0 {
        delta_alg
    } else {
        illinois(delta_floor, delta_dyn, diff, 1e-10 * delta_dyn)
    };
    let tri_critical = delta_dyn - delta_alg <= 1e-6 * delta_dyn;
    Ok(Thresholds {
        delta_c,
        delta_alg: Some(delta_alg),
        delta_it: Some(delta_it),
        delta_dyn: Some(delta_dyn),
        tri_critical,
    })
}

/// The parametric curve on `grid` with stability and free-energy gap.
pub fn fixed_point_curve(
    model: &ScalarModel,
    grid: &[f64],
    cfg: &IntegrationConfig,
) -> Result<Vec<CurvePoint>> {
    let curve = Curve::new(model, grid, cfg)?;
    let h = curve.grid_slopes();
    Ok((0..curve.xs.len())
        .map(|k| CurvePoint {
            x: curve.xs[k],
            delta: curve.delta_at(k),
            m: curve.fs[k],
            stable: h[k] < 0.0,
            free_energy_gap: curve.gap_at(k),
        })
        .collect())
}

/// Largest interior local maximum of `d ln Delta / d ln x`, with its
/// location. Positive values mean `Delta(x)` is not monotone, i.e. a
/// first-order window exists.
pub fn max_log_slope(
    model: &ScalarModel,
    grid: &[f64],
    cfg: &IntegrationConfig,
) -> Result<Option<(f64, f64)>> {
    let curve = Curve::new(model, grid, cfg)?;
    let h = curve.grid_slopes();
    let n = h.len();
    let mut best: Option<(f64, f64)> = None;
    for k in 2..n - 2 {
        if h[k] > h[k - 1] && h[k] >= h[k + 1] {
            let (x, v) = curve.golden(curve.xs[k - 1], curve.xs[k + 1], true, |x| curve.log_slope(x));
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((x, v));
            }
        }
    }
    Ok(best)
}

/// Bisection in `rho` for the point where the first-order window closes.
///
/// `family(rho)` must have a first-order window at `rho_lo` and none at
/// `rho_hi` (or the other way round).
pub fn transition_boundary(
    family: impl Fn(f64) -> Result<ScalarModel>,
    rho_lo: f64,
    rho_hi: f64,
    grid: &[f64],
    cfg: &IntegrationConfig,
    tol: f64,
) -> Result<TriCritical> {
    let probe = |rho: f64| -> Result<(bool, f64)> {
        let model = family(rho)?;
        let best = max_log_slope(&model, grid, cfg)?;
        Ok(match best {
            Some((x, v)) => (v > FIRST_ORDER_SLOPE, x),
            None => (false, f64::NAN),
        })
    };
    let (mut a, mut b) = (rho_lo, rho_hi);
    let (fa, _) = probe(a)?;
    let (fb, _) = probe(b)?;
    if fa == fb {
        return Err(Error::Config(format!(
            "interval [{rho_lo}, {rho_hi}] does not bracket a change of transition order"
        )));
    }
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        let (fm, _) = probe(mid)?;
        if fm == fa {
            a = mid;
        } else {
            b = mid;
        }
    }
    let rho = 0.5 * (a + b);
    let model = family(rho)?;
    let (x, delta) = match max_log_slope(&model, grid, cfg)? {
        Some((x, _)) => (x, model.f(x, cfg) / x),
        None => (0.0, model.delta_c().unwrap_or(f64::NAN)),
    };
    Ok(TriCritical { rho, delta, x })
}

/// Instability point of the uniform fixed point of a symmetric problem,
/// `lambda_max(cov)^2`; `1/r^2` for community detection. Absent for priors
/// with a non-zero mean.
pub fn uniform_stability(prior: &PriorSpec) -> Option<f64> {
    match prior {
        PriorSpec::Community { rank } => Some(1.0 / (*rank as f64).powi(2)),
        p => {
            let (mean, _) = p.moments();
            if mean.iter().any(|m| *m != 0.0) {
                return None;
            }
            Some(max_eigenvalue(&p.covariance()).powi(2))
        }
    }
}

/// Bipartite counterpart: `sqrt(alpha) lambda_max(Sigma_u Sigma_v)`.
pub fn uniform_stability_bipartite(prior_u: &PriorSpec, prior_v: &PriorSpec, alpha: f64) -> Option<f64> {
    let zero = |p: &PriorSpec| p.moments().0.iter().all(|m| *m == 0.0);
    if !zero(prior_u) || !zero(prior_v) || prior_u.rank() != prior_v.rank() {
        return None;
    }
    let prod: DMatrix<f64> = prior_u.covariance() * prior_v.covariance();
    let ev = prod.complex_eigenvalues();
    let lmax = ev.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    Some(alpha.sqrt() * lmax)
}

/// Order of the transition at `Delta_c` from the expansion of `f` to second
/// order: first order when `<x^3>^2 > 2 <x^2>^3`.
pub fn first_order_criterion(prior: &PriorSpec) -> Result<TransitionOrder> {
    if prior.rank() != 1 || matches!(prior, PriorSpec::Community { .. }) {
        return Err(Error::RankUnsupported(prior.rank()));
    }
    let (mean, second) = prior.moments();
    if mean[0].abs() > 1e-12 {
        return Err(Error::InvalidPrior("the criterion needs a zero-mean prior".into()));
    }
    let m2 = second[(0, 0)];
    let m3 = prior.third_moment_scalar()?;
    let lhs = m3 * m3;
    let rhs = 2.0 * m2 * m2 * m2;
    let tol = 1e-12 * rhs.abs().max(lhs.abs()).max(1e-300);
    Ok(if (lhs - rhs).abs() <= tol {
        TransitionOrder::Inconclusive
    } else if lhs > rhs {
        TransitionOrder::FirstOrder
    } else {
        TransitionOrder::SecondOrder
    })
}
