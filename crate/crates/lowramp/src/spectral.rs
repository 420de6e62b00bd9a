//! Spectral estimators: leading eigenvectors of `S / sqrt(N)` (or of the raw
//! data `Y / sqrt(N)`) for symmetric instances and leading singular vectors
//! for bipartite ones.
//!
//! The matrices are never formed; products go through the packed
//! observations, so the cost per Lanczos step is one pass over `Y`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channels::ScoreMap;
use crate::instance::{derive_seed, DenseRect, Observations, PackedSymmetric, ProblemInstance};
use crate::{Error, Result};

const TAG_START: u64 = 0x5350;

/// Which matrix the spectral method diagonalises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectralSource {
    /// The Fisher score matrix `S` of the assumed channel.
    #[default]
    Score,
    /// The observations `Y` themselves.
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Relative residual `|beta_j s_j| / |theta_1|` accepted for every wanted pair.
    pub tol: f64,
    /// Largest Krylov dimension before giving up.
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, max_dim: 400, seed: 0x5eed }
    }
}

/// Leading spectral components of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Largest eigenvalues (symmetric) or singular values (bipartite) of the
    /// matrix divided by `sqrt(N)`, in decreasing order.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, or left singular vectors, as columns.
    pub vectors: DMatrix<f64>,
    /// Right singular vectors (bipartite only).
    pub right_vectors: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl SpectralResult {
    /// Squared norm of the projection of each leading vector onto the span
    /// of the planted columns; `cos^2` of the angle in the rank-one case.
    pub fn overlaps(&self, planted: &DMatrix<f64>) -> Result<Vec<f64>> {
        overlaps(&self.vectors, planted)
    }
}

/// Squared projections of the unit columns of `vectors` onto `span(planted)`.
pub fn overlaps(vectors: &DMatrix<f64>, planted: &DMatrix<f64>) -> Result<Vec<f64>> {
    if vectors.nrows() != planted.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "vectors have {} rows, planted has {}",
            vectors.nrows(),
            planted.nrows()
        )));
    }
    // Orthonormal basis of the planted span (drops degenerate directions).
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in planted.column_iter() {
        let mut v = c.into_owned();
        for b in &basis {
            let p = b.dot(&v);
            v.axpy(-p, b, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-12 * c.norm().max(1e-300) {
            basis.push(v / norm);
        }
    }
    Ok(vectors
        .column_iter()
        .map(|v| {
            let vn = v.norm_squared();
            if vn == 0.0 {
                return 0.0;
            }
            basis.iter().map(|b| b.dot(&v).powi(2)).sum::<f64>() / vn
        })
        .collect())
}

/// `k` leading eigenpairs (symmetric) or singular triplets (bipartite).
pub fn top_components(
    instance: &ProblemInstance,
    k: usize,
    source: SpectralSource,
    opts: &LanczosOptions,
) -> Result<SpectralResult> {
    let map = instance.score_map();
    let scale = 1.0 / (instance.n as f64).sqrt();
    let entry = move |y: f64| match source {
        SpectralSource::Score => map.s(y),
        SpectralSource::Data => y,
    };
    match &instance.y {
        Observations::Symmetric(p) => {
            let op = |v: &[f64]| symmetric_product(p, v, scale, entry);
            let (values, vectors, iterations, converged) = lanczos(p.n(), k, op, opts)?;
            Ok(SpectralResult { values, vectors, right_vectors: None, iterations, converged })
        }
        Observations::Bipartite(d) => {
            let (n, m) = d.shape();
            let op = |u: &[f64]| {
                let w = transpose_product(d, u, scale, entry);
                rect_product(d, &w, scale, entry)
            };
            let (values, left, iterations, converged) = lanczos(n, k, op, opts)?;
            let mut right = DMatrix::zeros(m, left.ncols());
            let mut sv = Vec::with_capacity(values.len());
            for (c, lambda) in values.iter().enumerate() {
                let s = lambda.max(0.0).sqrt();
                sv.push(s);
                let w = DVector::from_vec(transpose_product(d, left.column(c).as_slice(), scale, entry));
                let norm = w.norm();
                if norm > 0.0 {
                    right.set_column(c, &(w / norm));
                }
            }
            Ok(SpectralResult { values: sv, vectors: left, right_vectors: Some(right), iterations, converged })
        }
    }
}

/// Dense `S` (or `Y`) of a symmetric instance; for tests and small sizes.
pub fn dense_matrix(instance: &ProblemInstance, source: SpectralSource) -> DMatrix<f64> {
    let map: ScoreMap = instance.score_map();
    let f = |y: f64| match source {
        SpectralSource::Score => map.s(y),
        SpectralSource::Data => y,
    };
    match &instance.y {
        Observations::Symmetric(p) => p.to_dense(f),
        Observations::Bipartite(d) => d.to_dense(f),
    }
}

fn symmetric_product(p: &PackedSymmetric, v: &[f64], scale: f64, entry: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let mut out = p.pair_accumulate(1, |i, j, y, ai, aj| {
        let s = entry(y);
        ai[0] += s * v[j];
        aj[0] += s * v[i];
    });
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

fn rect_product(d: &DenseRect, v: &[f64], scale: f64, entry: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    d.row_map(1, |_, row, out| {
        out[0] = scale * row.iter().zip(v).map(|(y, x)| entry(*y) * x).sum::<f64>();
    })
}

fn transpose_product(d: &DenseRect, u: &[f64], scale: f64, entry: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let mut out = d.column_accumulate(1, |i, _, y, acc| acc[0] += entry(y) * u[i]);
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

/// Lanczos with full reorthogonalisation for the `k` largest eigenpairs of
/// the symmetric operator `op` on `R^n`.
pub fn lanczos(
    n: usize,
    k: usize,
    op: impl Fn(&[f64]) -> Vec<f64>,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, DMatrix<f64>, usize, bool)> {
    if k == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= {n} eigenpairs, got {k}")));
    }
    let max_dim = opts.max_dim.max(k + 1).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, TAG_START));
    let mut q: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    loop {
        let j = basis.len() - 1;
        let mut w = op(&basis[j]);
        if w.len() != n || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonConvergentIntegral("non-finite matrix-vector product".into()));
        }
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let dim = alphas.len();
        let check = dim >= k && (dim % 5 == 0 || dim == max_dim || beta < 1e-12 * alphas[0].abs().max(1.0));
        if check {
            let (vals, vecs) = tridiagonal_eigen(&alphas, &betas);
            let top = vals[0].abs().max(f64::MIN_POSITIVE);
            let converged = (0..k).all(|c| (beta * vecs[(dim - 1, c)]).abs() <= opts.tol * top);
            let exhausted = beta < 1e-12 * top || dim == max_dim;
            if converged || exhausted {
                let mut out = DMatrix::zeros(n, k);
                for c in 0..k {
                    let mut v = vec![0.0; n];
                    for (i, b) in basis.iter().enumerate() {
                        axpy(&mut v, vecs[(i, c)], b);
                    }
                    normalize(&mut v);
                    out.set_column(c, &DVector::from_vec(v));
                }
                // Residual-based convergence, or an invariant subspace reached.
                let ok = converged || beta < 1e-12 * top;
                return Ok((vals[..k].to_vec(), out, dim, ok));
            }
        }
        if beta < 1e-12 * alphas[0].abs().max(1.0) {
            // Invariant subspace found before k vectors: continue from a fresh
            // random direction, decoupled from the current block.
            w = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(&mut w, -c, b);
                }
            }
            normalize(&mut w);
            betas.push(0.0);
        } else {
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
        }
        basis.push(w);
    }
}

/// Eigenpairs of the tridiagonal matrix, eigenvalues in decreasing order.
fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let e = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| e.eigenvalues[*b].total_cmp(&e.eigenvalues[*a]));
    let vals = order.iter().map(|i| e.eigenvalues[*i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
