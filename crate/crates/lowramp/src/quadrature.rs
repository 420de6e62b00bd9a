//! Numerical integration: Gauss-Hermite and Gauss-Laguerre rules, Gaussian
//! expectations with adaptive node doubling, trapezoid helpers and a
//! scrambled Halton sequence for multi-dimensional expectations.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Controls how Gaussian expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    /// Initial number of Gauss-Hermite nodes (odd).
    pub gh_nodes: usize,
    /// Largest rule tried by the doubling loop.
    pub gh_max_nodes: usize,
    /// Successive rules must agree to `abs_tol + rel_tol * |value|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Sample count for expectations in two or more dimensions.
    pub mc_samples: usize,
    pub mc_seed: u64,
    /// Divides the step of the fixed trapezoid rules (community map).
    #[serde(default = "one")]
    pub trapezoid_refine: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            gh_nodes: 201,
            gh_max_nodes: 3201,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            mc_samples: 200_000,
            mc_seed: 0x5eed,
            trapezoid_refine: 1.0,
        }
    }
}

/// Quadrature rule for `E[f(W)]` with `W ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

fn gh_cache() -> &'static Mutex<HashMap<usize, Arc<NormalRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<NormalRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Hermite rule with `n` nodes rescaled to the standard normal weight.
/// Rules are computed once and cached.
pub fn gauss_hermite(n: usize) -> Arc<NormalRule> {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    if let Some(rule) = gh_cache().lock().unwrap().get(&n) {
        return rule.clone();
    }
    let (z, w) = hermite_physicists(n);
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let rule = Arc::new(NormalRule {
        nodes: z.iter().map(|z| z * sqrt2).collect(),
        weights: w.iter().map(|w| w * inv_sqrt_pi).collect(),
    });
    gh_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

/// Nodes and weights for the weight `exp(-z^2)`.
///
/// The positive roots of `H_n` are bracketed on a grid finer than the
/// smallest root spacing and polished by safeguarded Newton steps. The
/// orthonormal recurrence is rescaled on the fly and weights are assembled
/// in log space, so large rules neither overflow nor lose their tails to
/// cancellation; weights that underflow are returned as zero.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut roots = Vec::with_capacity(n.div_ceil(2));
    if n % 2 == 1 {
        roots.push(0.0);
    }
    let top = (2.0 * nf + 1.0).sqrt() + 1.0;
    let h = 0.25 * std::f64::consts::PI / (2.0 * nf + 1.0).sqrt();
    let mut a = if n % 2 == 1 { 0.5 * h } else { 0.0 };
    let mut pa = hermite_orthonormal(n, a).0;
    while a < top && roots.len() < n.div_ceil(2) {
        let b = a + h;
        let pb = hermite_orthonormal(n, b).0;
        if pa == 0.0 {
            roots.push(a);
        } else if pa.signum() != pb.signum() {
            roots.push(polish_root(n, a, b));
        }
        a = b;
        pa = pb;
    }
    assert_eq!(roots.len(), n.div_ceil(2), "Hermite root bracketing failed for n = {n}");
    let ln_norm = -nf.ln();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &z in roots.iter().rev() {
        let (_, p_prev, log_scale) = hermite_orthonormal(n, z);
        let w = (ln_norm - 2.0 * (p_prev.abs().ln() + log_scale)).exp();
        nodes.push(-z);
        weights.push(w);
    }
    let start = if n % 2 == 1 { 1 } else { 0 };
    for &z in roots.iter().skip(start) {
        let (_, p_prev, log_scale) = hermite_orthonormal(n, z);
        nodes.push(z);
        weights.push((ln_norm - 2.0 * (p_prev.abs().ln() + log_scale)).exp());
    }
    (nodes, weights)
}

/// Orthonormal Hermite polynomials `(p_n(z), p_{n-1}(z))` sharing the scale
/// factor `exp(log_scale)`.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    const BIG: f64 = 1e150;
    let mut p1 = PIM4;
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        if p1.abs() > BIG {
            p1 /= BIG;
            p2 /= BIG;
            log_scale += BIG.ln();
        }
    }
    (p1, p2, log_scale)
}

/// Root of `p_n` in `[a, b]`, where it changes sign.
fn polish_root(n: usize, mut a: f64, mut b: f64) -> f64 {
    let nf = n as f64;
    let sa = hermite_orthonormal(n, a).0.signum();
    let mut z = 0.5 * (a + b);
    for _ in 0..100 {
        let (p, p_prev, _) = hermite_orthonormal(n, z);
        if p == 0.0 {
            return z;
        }
        if p.signum() == sa {
            a = z;
        } else {
            b = z;
        }
        // p_n' = sqrt(2n) p_{n-1} for the orthonormal family.
        let step = p / ((2.0 * nf).sqrt() * p_prev);
        let mut next = z - step;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// Gauss-Laguerre rule for `int_0^inf exp(-y) f(y) dy`.
pub fn gauss_laguerre(n: usize) -> Arc<NormalRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<NormalRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 1..=n {
        z = match i {
            1 => 3.0 / (1.0 + 2.4 * nf),
            2 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 2) as f64;
                z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - x[i - 3])
            }
        };
        let mut pp = 1.0;
        let mut p2 = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i - 1] = z;
        w[i - 1] = -1.0 / (pp * nf * p2);
    }
    let rule = Arc::new(NormalRule { nodes: x, weights: w });
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// `E[f(W)]` for a standard normal `W`, doubling the Gauss-Hermite rule
/// until two successive estimates agree.
pub fn expect_normal(cfg: &IntegrationConfig, f: impl Fn(f64) -> f64) -> f64 {
    let mut n = cfg.gh_nodes.max(1) | 1;
    let mut prev = gauss_hermite(n).expect(&f);
    while n < cfg.gh_max_nodes {
        n = 2 * n - 1;
        let next = gauss_hermite(n).expect(&f);
        if (next - prev).abs() <= cfg.abs_tol + cfg.rel_tol * next.abs() {
            return next;
        }
        prev = next;
    }
    prev
}

/// Vector-valued version of [`expect_normal`]; `f(w, out)` accumulates
/// nothing and must overwrite `out`.
pub fn expect_normal_vec(
    cfg: &IntegrationConfig,
    dim: usize,
    mut f: impl FnMut(f64, &mut [f64]),
) -> Vec<f64> {
    let mut eval = |n: usize| {
        let rule = gauss_hermite(n);
        let mut acc = vec![0.0; dim];
        let mut buf = vec![0.0; dim];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            if *w == 0.0 {
                continue;
            }
            f(*x, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += w * b;
            }
        }
        acc
    };
    let mut n = cfg.gh_nodes.max(1) | 1;
    let mut prev = eval(n);
    while n < cfg.gh_max_nodes {
        n = 2 * n - 1;
        let next = eval(n);
        let done = next
            .iter()
            .zip(&prev)
            .all(|(a, b)| (a - b).abs() <= cfg.abs_tol + cfg.rel_tol * a.abs());
        prev = next;
        if done {
            break;
        }
    }
    prev
}

/// Composite trapezoid integral of samples `ys` over abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral; element `k` integrates from `xs[0]` to `xs[k]`.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..xs.len() {
        acc += 0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]);
        out.push(acc);
    }
    out
}

/// Logarithmically spaced grid with `n` points between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Halton sequence with random digit permutations, one permutation per
/// dimension and digit position.
pub struct ScrambledHalton {
    bases: Vec<u64>,
    perms: Vec<Vec<Vec<u32>>>,
}

impl ScrambledHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let bases = first_primes(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = bases
            .iter()
            .map(|&p| {
                let depth = (53.0 / (p as f64).log2()).ceil() as usize;
                (0..depth)
                    .map(|_| {
                        let mut perm: Vec<u32> = (0..p as u32).collect();
                        perm.shuffle(&mut rng);
                        perm
                    })
                    .collect()
            })
            .collect();
        Self { bases, perms }
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }

    /// Point `index` of the sequence, coordinates in the open unit interval.
    pub fn point(&self, index: u64, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            let p = self.bases[d];
            let inv = 1.0 / p as f64;
            let mut f = inv;
            let mut idx = index;
            let mut x = 0.0;
            for perm in &self.perms[d] {
                let digit = (idx % p) as usize;
                idx /= p;
                x += perm[digit] as f64 * f;
                f *= inv;
            }
            *o = x.clamp(1e-16, 1.0 - 1e-16);
        }
    }

    /// Point `index` mapped to a standard normal vector.
    pub fn normal_point(&self, index: u64, out: &mut [f64]) {
        self.point(index, out);
        let n = standard_normal();
        for o in out.iter_mut() {
            *o = n.inverse_cdf(*o);
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut c = 2u64;
    while primes.len() < k {
        if primes.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}
