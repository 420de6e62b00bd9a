//! Bethe free energy of the Low-RAMP fixed points.
//!
//! For the symmetric problem, with `P_i = x_i x_i^T + sigma_i`,
//!
//! ```text
//! F = sum_i [ log Z(A_i, B_i) - B_i.x_i + Tr(A_i P_i) / 2 ]
//!   + sum_{i<j} [ S_ij x_i.x_j / sqrt(N) + R_ij Tr(P_i P_j) / (2N)
//!                 - S_ij^2 ( (x_i.x_j)^2 + x_i.sigma_j.x_i + x_j.sigma_i.x_j ) / (2N) ]
//! ```
//!
//! where `x_i` and `sigma_i` are the input function and its derivative at
//! `(A_i, B_i)`. Its stationary points in the fields are exactly the fixed
//! points of the full Low-RAMP iteration. The bipartite form is analogous
//! with the pair sum running over all `(i, l)`.

use nalgebra::{DMatrix, DVector};

use crate::channels::ScoreMap;
use crate::instance::ProblemInstance;
use crate::priors::PriorSpec;
use crate::{Error, Result};

use super::kernels::{dispatch, second_moments, symmetric_sums, Sums};
use super::{AmpState, BipartiteState};

/// How the pair sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetheMode {
    /// Exact sums with the per-entry `S^2` and `R`.
    Exact,
    /// `S^2` and `R` replaced by their means `1/Delta_tilde` and `R_bar`.
    SelfAveraged { inv_delta: f64, r_bar: f64 },
}

fn block(v: &[f64], i: usize, len: usize) -> &[f64] {
    &v[i * len..(i + 1) * len]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x^T m x` for a row-major `r x r` matrix `m`.
fn quad(x: &[f64], m: &[f64], r: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..r {
        for b in 0..r {
            s += x[a] * m[a * r + b] * x[b];
        }
    }
    s
}

/// `Tr(m1 m2)` for symmetric row-major matrices.
fn trace_prod(m1: &[f64], m2: &[f64]) -> f64 {
    dot(m1, m2)
}

/// Site term `log Z - B.x + Tr(A P) / 2`.
fn site_term(r: usize, log_z: f64, b: &[f64], a: &[f64], x: &[f64], sigma: &[f64]) -> f64 {
    let mut tr = 0.0;
    for p in 0..r {
        for q in 0..r {
            tr += a[p * r + q] * (x[q] * x[p] + sigma[q * r + p]);
        }
    }
    log_z - dot(b, x) + 0.5 * tr
}

/// Pair term between two nodes.
#[inline]
#[allow(clippy::too_many_arguments)]
fn pair_term(r: usize, s: f64, rv: f64, inv_sqrt_n: f64, inv_n: f64, xi: &[f64], si: &[f64], xj: &[f64], sj: &[f64]) -> f64 {
    let xx = dot(xi, xj);
    let cross = xx * xx + quad(xi, sj, r) + quad(xj, si, r);
    let pp = cross + trace_prod(si, sj);
    s * xx * inv_sqrt_n + 0.5 * inv_n * (rv * pp - s * s * cross)
}

fn sum_sites(r: usize, n: usize, log_z: &[f64], b: &[f64], a: &[f64], x: &[f64], sigma: &[f64]) -> f64 {
    let rr = r * r;
    (0..n)
        .map(|i| site_term(r, log_z[i], block(b, i, r), block(a, i, rr), block(x, i, r), block(sigma, i, rr)))
        .sum()
}

/// Bethe free energy of a symmetric state.
pub fn bethe_free_energy(instance: &ProblemInstance, state: &AmpState, mode: BetheMode) -> Result<f64> {
    let y = instance.symmetric_y()?;
    let (n, r) = (state.n, state.rank);
    if y.n() != n {
        return Err(Error::ShapeMismatch(format!("state has {n} nodes, instance has {}", y.n())));
    }
    let rr = r * r;
    let nf = n as f64;
    let (inv_sqrt_n, inv_n) = (1.0 / nf.sqrt(), 1.0 / nf);
    let sites = sum_sites(r, n, &state.log_z, &state.b, &state.a, &state.x_hat, &state.sigma);
    let (x, sg) = (&state.x_hat, &state.sigma);
    let pairs = match mode {
        BetheMode::Exact => {
            let acc = dispatch!(instance.score_map(), f => y.pair_accumulate(1, |i, j, v, ai, _| {
                let (s, rv) = f(v);
                ai[0] += pair_term(r, s, rv, inv_sqrt_n, inv_n, block(x, i, r), block(sg, i, rr), block(x, j, r), block(sg, j, rr));
            }));
            acc.iter().sum()
        }
        BetheMode::SelfAveraged { inv_delta, r_bar } => {
            let sx = symmetric_sums(y, instance.score_map(), Sums::Matvec, r, x, sg);
            let linear = 0.5 * dot(x, &sx) * inv_sqrt_n;
            let (xbar, sbar) = second_moments(r, x, sg);
            // sum_{i<j} of (x_i.x_j)^2, the two sigma cross terms, and Tr(sigma_i sigma_j)
            let mut diag_xx = 0.0;
            let mut diag_xs = 0.0;
            let mut diag_ss = 0.0;
            for i in 0..n {
                let xi = block(x, i, r);
                let si = block(sg, i, rr);
                diag_xx += dot(xi, xi).powi(2);
                diag_xs += quad(xi, si, r);
                diag_ss += trace_prod(si, si);
            }
            let xx_pairs = 0.5 * (trace_prod(&xbar, &xbar) - diag_xx);
            let xs_pairs = trace_prod(&xbar, &sbar) - diag_xs;
            let ss_pairs = 0.5 * (trace_prod(&sbar, &sbar) - diag_ss);
            let cross = xx_pairs + xs_pairs;
            linear + 0.5 * inv_n * (r_bar * (cross + ss_pairs) - inv_delta * cross)
        }
    };
    Ok(sites + pairs)
}

/// Local part of the free energy that depends on node `i`, with the node's
/// estimates recomputed from the given fields.
fn local_energy(
    instance: &ProblemInstance,
    prior: &PriorSpec,
    state: &AmpState,
    i: usize,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<f64> {
    let y = instance.symmetric_y()?;
    let map: ScoreMap = instance.score_map();
    let (n, r) = (state.n, state.rank);
    let rr = r * r;
    let out = prior.f_in(a, b)?;
    let xi: Vec<f64> = out.mean.iter().copied().collect();
    let mut si = vec![0.0; rr];
    let mut av = vec![0.0; rr];
    for p in 0..r {
        for q in 0..r {
            si[p * r + q] = out.covariance[(p, q)];
            av[p * r + q] = a[(p, q)];
        }
    }
    let bv: Vec<f64> = b.iter().copied().collect();
    let nf = n as f64;
    let mut total = site_term(r, out.log_z, &bv, &av, &xi, &si);
    for j in 0..n {
        if j == i {
            continue;
        }
        let (s, rv) = map.s_and_r(y.get(i, j));
        total += pair_term(
            r,
            s,
            rv,
            1.0 / nf.sqrt(),
            1.0 / nf,
            &xi,
            &si,
            block(&state.x_hat, j, r),
            block(&state.sigma, j, rr),
        );
    }
    Ok(total)
}

/// Central finite-difference gradient of the exact Bethe free energy with
/// respect to `B_i` and the symmetric entries `A_i[p, q]`, `p <= q`.
pub fn bethe_site_gradient(
    instance: &ProblemInstance,
    prior: &PriorSpec,
    state: &AmpState,
    i: usize,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = state.rank;
    let a0 = state.a_of(i);
    let b0 = state.b_of(i);
    let mut gb = Vec::with_capacity(r);
    for k in 0..r {
        let mut bp = b0.clone();
        let mut bm = b0.clone();
        bp[k] += h;
        bm[k] -= h;
        let fp = local_energy(instance, prior, state, i, &a0, &bp)?;
        let fm = local_energy(instance, prior, state, i, &a0, &bm)?;
        gb.push((fp - fm) / (2.0 * h));
    }
    let mut ga = Vec::with_capacity(r * (r + 1) / 2);
    for p in 0..r {
        for q in p..r {
            let mut ap = a0.clone();
            let mut am = a0.clone();
            ap[(p, q)] += h;
            am[(p, q)] -= h;
            if p != q {
                ap[(q, p)] += h;
                am[(q, p)] -= h;
            }
            let fp = local_energy(instance, prior, state, i, &ap, &b0)?;
            let fm = local_energy(instance, prior, state, i, &am, &b0)?;
            ga.push((fp - fm) / (2.0 * h));
        }
    }
    Ok((gb, ga))
}

/// Bethe free energy of a bipartite state (exact pair sums).
pub fn bethe_free_energy_bipartite(instance: &ProblemInstance, state: &BipartiteState) -> Result<f64> {
    let y = instance.bipartite_y()?;
    let (u, v) = (&state.u, &state.v);
    let r = u.rank;
    let rr = r * r;
    let nf = instance.n as f64;
    let (inv_sqrt_n, inv_n) = (1.0 / nf.sqrt(), 1.0 / nf);
    let sites = sum_sites(r, u.n, &u.log_z, &u.b, &u.a, &u.x_hat, &u.sigma)
        + sum_sites(r, v.n, &v.log_z, &v.b, &v.a, &v.x_hat, &v.sigma);
    let pairs: f64 = dispatch!(instance.score_map(), f => y.row_map(1, |i, row, out| {
        let xi = block(&u.x_hat, i, r);
        let si = block(&u.sigma, i, rr);
        for (l, &val) in row.iter().enumerate() {
            let (s, rv) = f(val);
            out[0] += pair_term(r, s, rv, inv_sqrt_n, inv_n, xi, si, block(&v.x_hat, l, r), block(&v.sigma, l, rr));
        }
    }))
    .iter()
    .sum();
    Ok(sites + pairs)
}
