//! Pair sums over the score matrix, the `O(N^2)` part of every iteration.

use crate::channels::ScoreMap;
use crate::instance::{DenseRect, PackedSymmetric};

/// Binds `$f` to a monomorphic `Fn(y) -> (S, R)` for the given map.
macro_rules! dispatch {
    ($map:expr, $f:ident => $body:expr) => {
        match $map {
            ScoreMap::Linear { s, c } => {
                let $f = move |v: f64| (s * v, s * s * v * v - c);
                $body
            }
            ScoreMap::Binary { s1, s0, r1, r0 } => {
                let $f = move |v: f64| if v > 0.5 { (s1, r1) } else { (s0, r0) };
                $body
            }
            ScoreMap::Sign => {
                let $f = move |v: f64| {
                    let s = if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    (s, 1.0)
                };
                $body
            }
        }
    };
}
pub(crate) use dispatch;

/// What to accumulate per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sums {
    /// `sum_k S x_k` (width `r`).
    Matvec,
    /// `sum_k S x_k`, `sum_k S^2 sigma_k`, `sum_k [S^2 x x^T - R (x x^T + sigma)]`
    /// (width `r + 2 r^2`).
    Full,
    /// `sum_k S x_k`, `sum_k (S^2 - R)(x x^T + sigma)` (width `r + r^2`).
    MeanField,
}

impl Sums {
    pub fn width(self, r: usize) -> usize {
        match self {
            Sums::Matvec => r,
            Sums::Full => r + 2 * r * r,
            Sums::MeanField => r + r * r,
        }
    }
}

#[inline(always)]
fn add_contribution(kind: Sums, r: usize, s: f64, rv: f64, xk: &[f64], sk: &[f64], out: &mut [f64]) {
    for a in 0..r {
        out[a] += s * xk[a];
    }
    match kind {
        Sums::Matvec => {}
        Sums::Full => {
            let s2 = s * s;
            let rr = r * r;
            let (ons, acc) = out[r..].split_at_mut(rr);
            for a in 0..r {
                for b in 0..r {
                    let xx = xk[a] * xk[b];
                    let sig = sk[a * r + b];
                    ons[a * r + b] += s2 * sig;
                    acc[a * r + b] += s2 * xx - rv * (xx + sig);
                }
            }
        }
        Sums::MeanField => {
            let c = s * s - rv;
            for a in 0..r {
                for b in 0..r {
                    out[r + a * r + b] += c * (xk[a] * xk[b] + sk[a * r + b]);
                }
            }
        }
    }
}

/// Per-node sums over a symmetric instance, `n x width` row-major.
pub(crate) fn symmetric_sums(
    y: &PackedSymmetric,
    map: ScoreMap,
    kind: Sums,
    r: usize,
    x: &[f64],
    sigma: &[f64],
) -> Vec<f64> {
    let width = kind.width(r);
    let rr = r * r;
    if kind == Sums::Matvec && r == 1 {
        return dispatch!(map, f => y.pair_accumulate(1, |i, j, v, ai, aj| {
            let s = f(v).0;
            ai[0] += s * x[j];
            aj[0] += s * x[i];
        }));
    }
    dispatch!(map, f => y.pair_accumulate(width, |i, j, v, ai, aj| {
        let (s, rv) = f(v);
        add_contribution(kind, r, s, rv, &x[j * r..(j + 1) * r], &sigma[j * rr..(j + 1) * rr], ai);
        add_contribution(kind, r, s, rv, &x[i * r..(i + 1) * r], &sigma[i * rr..(i + 1) * rr], aj);
    }))
}

/// Row sums `sum_l f(S_il, R_il; v_l)` of a bipartite instance, `n x width`.
pub(crate) fn row_sums(
    y: &DenseRect,
    map: ScoreMap,
    kind: Sums,
    r: usize,
    v: &[f64],
    sigma_v: &[f64],
) -> Vec<f64> {
    let width = kind.width(r);
    let rr = r * r;
    dispatch!(map, f => y.row_map(width, |_, row, out| {
        for (l, &val) in row.iter().enumerate() {
            let (s, rv) = f(val);
            add_contribution(kind, r, s, rv, &v[l * r..(l + 1) * r], &sigma_v[l * rr..(l + 1) * rr], out);
        }
    }))
}

/// Column sums `sum_k f(S_kj, R_kj; u_k)` of a bipartite instance, `m x width`.
pub(crate) fn column_sums(
    y: &DenseRect,
    map: ScoreMap,
    kind: Sums,
    r: usize,
    u: &[f64],
    sigma_u: &[f64],
) -> Vec<f64> {
    let width = kind.width(r);
    let rr = r * r;
    dispatch!(map, f => y.column_accumulate(width, |k, _, val, out| {
        let (s, rv) = f(val);
        add_contribution(kind, r, s, rv, &u[k * r..(k + 1) * r], &sigma_u[k * rr..(k + 1) * rr], out);
    }))
}

/// Sum over `k` of `x_k x_k^T` and of `sigma_k`, both `r x r` row-major.
pub(crate) fn second_moments(r: usize, x: &[f64], sigma: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let rr = r * r;
    let n = x.len() / r;
    let mut xx = vec![0.0; rr];
    let mut ss = vec![0.0; rr];
    for k in 0..n {
        let xk = &x[k * r..(k + 1) * r];
        for a in 0..r {
            for b in 0..r {
                xx[a * r + b] += xk[a] * xk[b];
            }
        }
        for (s, v) in ss.iter_mut().zip(&sigma[k * rr..(k + 1) * rr]) {
            *s += v;
        }
    }
    (xx, ss)
}

/// `out_i += -c * M x_old_i` for an `r x r` row-major `M` shared by all nodes.
pub(crate) fn subtract_shared_onsager(out: &mut [f64], m: &[f64], x_old: &[f64], r: usize) {
    let n = out.len() / r;
    for i in 0..n {
        for a in 0..r {
            let mut acc = 0.0;
            for b in 0..r {
                acc += m[a * r + b] * x_old[i * r + b];
            }
            out[i * r + a] -= acc;
        }
    }
}
