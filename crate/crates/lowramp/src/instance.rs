//! Planted and quenched problem instances.
//!
//! Symmetric observations keep only the strict upper triangle, packed row by
//! row. Score matrices are never stored: `S` and `R` are recomputed from `Y`
//! on the fly through a [`ScoreMap`], which keeps an `N = 20000` instance at
//! a single 1.6 GB buffer.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelFamily, ChannelSpec, Disorder, ScoreMap};
use crate::priors::PriorSpec;
use crate::{Error, Result};

/// Number of work blocks in parallel kernels; fixed so that reductions do not
/// depend on the thread count.
pub const KERNEL_BLOCKS: usize = 64;

const TAG_X: u64 = 0x58;
const TAG_U: u64 = 0x55;
const TAG_V: u64 = 0x56;
const TAG_Y: u64 = 0x59;

/// Derives an independent seed for a named stream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_Y));
    rng.set_stream(row as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Symmetric,
    Bipartite,
}

/// How `Y` was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Generator {
    Planted { channel: ChannelSpec },
    Quenched { disorder: Disorder, assumed: ChannelFamily },
}

impl Generator {
    pub fn score_map(&self) -> ScoreMap {
        match self {
            Generator::Planted { channel } => channel.score_map(),
            Generator::Quenched { assumed, .. } => assumed.score_map(),
        }
    }
}

/// Strict upper triangle of a symmetric `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl PackedSymmetric {
    pub fn len_for(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != Self::len_for(n) {
            return Err(Error::ShapeMismatch(format!(
                "packed triangle of size {n} needs {} entries, got {}",
                Self::len_for(n),
                data.len()
            )));
        }
        Ok(PackedSymmetric { n, data })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut data = Vec::with_capacity(Self::len_for(n));
        for i in 0..n {
            for j in i + 1..n {
                data.push(m[(i, j)]);
            }
        }
        PackedSymmetric { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn row_start(&self, i: usize) -> usize {
        i * self.n - i * (i + 1) / 2
    }

    /// Entry `(i, j)` for `i != j`; the diagonal is absent and reads as zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.data[self.row_start(i) + j - i - 1],
            std::cmp::Ordering::Greater => self.data[self.row_start(j) + i - j - 1],
        }
    }

    /// Entries `(i, i+1..n)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let s = self.row_start(i);
        &self.data[s..s + self.n - i - 1]
    }

    pub fn to_dense(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (k, y) in self.row(i).iter().enumerate() {
                let j = i + 1 + k;
                let v = f(*y);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Row ranges with roughly equal pair counts.
    fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let total = self.data.len().max(1);
        let nb = KERNEL_BLOCKS.min(n.max(1));
        let mut out = Vec::with_capacity(nb);
        let mut start = 0;
        let mut acc = 0usize;
        for b in 1..=nb {
            let target = total * b / nb;
            let mut end = start;
            while end < n && (acc < target || end == start) {
                acc += n - end - 1;
                end += 1;
            }
            if b == nb {
                end = n;
            }
            if end > start {
                out.push((start, end));
            }
            start = end;
            if start >= n {
                break;
            }
        }
        out
    }

    /// Visits every pair `i < j` once. `f(i, j, y, acc_i, acc_j)` may write
    /// into the `width`-sized accumulator slots of both endpoints. Returns the
    /// `n x width` row-major sum, reduced in a fixed block order.
    pub fn pair_accumulate<F>(&self, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, usize, f64, &mut [f64], &mut [f64]) + Sync,
    {
        let n = self.n;
        let blocks = self.blocks();
        let partials: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut buf = vec![0.0; n * width];
                for i in lo..hi {
                    let row = self.row(i);
                    let (head, tail) = buf.split_at_mut((i + 1) * width);
                    let acc_i = &mut head[i * width..];
                    for (k, &y) in row.iter().enumerate() {
                        let j = i + 1 + k;
                        let off = (j - i - 1) * width;
                        f(i, j, y, acc_i, &mut tail[off..off + width]);
                    }
                }
                buf
            })
            .collect();
        reduce_in_order(partials, n * width)
    }

    /// Sum of `f(y)` over pairs `i < j`.
    pub fn pair_sum(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let blocks = self.blocks();
        let sums: Vec<f64> = blocks
            .par_iter()
            .map(|&(lo, hi)| (lo..hi).map(|i| self.row(i).iter().map(|y| f(*y)).sum::<f64>()).sum())
            .collect();
        sums.iter().sum()
    }
}

fn reduce_in_order(partials: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Dense row-major `n x m` observations of a bipartite model.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRect {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl DenseRect {
    pub fn from_vec(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::ShapeMismatch(format!(
                "{n}x{m} matrix needs {} entries, got {}",
                n * m,
                data.len()
            )));
        }
        Ok(DenseRect { n, m, data })
    }

    pub fn from_dense(y: &DMatrix<f64>) -> Self {
        let (n, m) = y.shape();
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(y[(i, j)]);
            }
        }
        DenseRect { n, m, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn to_dense(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.m, |i, j| f(self.get(i, j)))
    }

    /// Row-wise map: `f(i, row, out_i)` fills `width` values per row.
    pub fn row_map<F>(&self, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &[f64], &mut [f64]) + Sync,
    {
        let mut out = vec![0.0; self.n * width];
        out.par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(i, o)| f(i, self.row(i), o));
        out
    }

    /// Column accumulation: `f(i, j, y, acc_j)` adds into the `width` slots
    /// of column `j`. Returns an `m x width` row-major sum.
    pub fn column_accumulate<F>(&self, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, usize, f64, &mut [f64]) + Sync,
    {
        let m = self.m;
        let nb = KERNEL_BLOCKS.min(self.n.max(1));
        let partials: Vec<Vec<f64>> = (0..nb)
            .into_par_iter()
            .map(|b| {
                let lo = self.n * b / nb;
                let hi = self.n * (b + 1) / nb;
                let mut buf = vec![0.0; m * width];
                for i in lo..hi {
                    for (j, &y) in self.row(i).iter().enumerate() {
                        f(i, j, y, &mut buf[j * width..(j + 1) * width]);
                    }
                }
                buf
            })
            .collect();
        reduce_in_order(partials, m * width)
    }

    pub fn sum(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let nb = KERNEL_BLOCKS.min(self.n.max(1));
        let sums: Vec<f64> = (0..nb)
            .into_par_iter()
            .map(|b| {
                let lo = self.n * b / nb;
                let hi = self.n * (b + 1) / nb;
                self.data[lo * self.m..hi * self.m].iter().map(|y| f(*y)).sum()
            })
            .collect();
        sums.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Symmetric(PackedSymmetric),
    Bipartite(DenseRect),
}

/// Planted ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum Planted {
    Symmetric { x0: DMatrix<f64> },
    Bipartite { u0: DMatrix<f64>, v0: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub kind: InstanceKind,
    pub n: usize,
    pub m: usize,
    pub y: Observations,
    pub planted: Option<Planted>,
    pub generator: Generator,
    /// Planted priors: one entry for symmetric, `[P_U, P_V]` for bipartite.
    pub priors: Vec<PriorSpec>,
    pub seed: u64,
}

/// Symmetry group used to align an estimate with the planted truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    None,
    Sign,
    Permutation,
}

impl ProblemInstance {
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn score_map(&self) -> ScoreMap {
        self.generator.score_map()
    }

    pub fn symmetric_y(&self) -> Result<&PackedSymmetric> {
        match &self.y {
            Observations::Symmetric(p) => Ok(p),
            Observations::Bipartite(_) => {
                Err(Error::ShapeMismatch("expected a symmetric instance".into()))
            }
        }
    }

    pub fn bipartite_y(&self) -> Result<&DenseRect> {
        match &self.y {
            Observations::Bipartite(d) => Ok(d),
            Observations::Symmetric(_) => {
                Err(Error::ShapeMismatch("expected a bipartite instance".into()))
            }
        }
    }

    pub fn x0(&self) -> Option<&DMatrix<f64>> {
        match &self.planted {
            Some(Planted::Symmetric { x0 }) => Some(x0),
            _ => None,
        }
    }

    pub fn uv0(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        match &self.planted {
            Some(Planted::Bipartite { u0, v0 }) => Some((u0, v0)),
            _ => None,
        }
    }

    /// Dense `S` and `R` (diagonal zero for symmetric instances). Small sizes only.
    pub fn score_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let map = self.score_map();
        match &self.y {
            Observations::Symmetric(p) => (p.to_dense(|y| map.s(y)), p.to_dense(|y| map.r(y))),
            Observations::Bipartite(d) => (d.to_dense(|y| map.s(y)), d.to_dense(|y| map.r(y))),
        }
    }

    /// Empirical `(1 / Delta_tilde, R_bar)`, normalised as `2 / N^2` sums over
    /// pairs for symmetric instances and `1 / (N M)` for bipartite ones.
    pub fn empirical_noise(&self) -> (f64, f64) {
        let map = self.score_map();
        match &self.y {
            Observations::Symmetric(p) => {
                let norm = 2.0 / (self.n as f64).powi(2);
                (norm * p.pair_sum(|y| map.s(y).powi(2)), norm * p.pair_sum(|y| map.r(y)))
            }
            Observations::Bipartite(d) => {
                let norm = 1.0 / (self.n as f64 * self.m as f64);
                (norm * d.sum(|y| map.s(y).powi(2)), norm * d.sum(|y| map.r(y)))
            }
        }
    }

    /// Writes `meta.json` and the binary (or CSV) payloads into `dir`.
    pub fn save(&self, dir: &Path, format: FileFormat) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = InstanceMeta {
            kind: self.kind,
            n: self.n,
            m: self.m,
            alpha: self.alpha(),
            rank: self.priors.iter().map(|p| p.rank()).collect(),
            seed: self.seed,
            priors: self.priors.clone(),
            generator: self.generator.clone(),
            format,
            y_len: match &self.y {
                Observations::Symmetric(p) => p.data().len(),
                Observations::Bipartite(d) => d.data().len(),
            },
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        match format {
            FileFormat::Binary => {
                let y = match &self.y {
                    Observations::Symmetric(p) => p.data(),
                    Observations::Bipartite(d) => d.data(),
                };
                write_f64_bin(&dir.join("Y.bin"), y)?;
                match &self.planted {
                    Some(Planted::Symmetric { x0 }) => write_matrix_bin(&dir.join("X0.bin"), x0)?,
                    Some(Planted::Bipartite { u0, v0 }) => {
                        write_matrix_bin(&dir.join("U0.bin"), u0)?;
                        write_matrix_bin(&dir.join("V0.bin"), v0)?;
                    }
                    None => {}
                }
            }
            FileFormat::Csv => {
                let mut w = BufWriter::new(fs::File::create(dir.join("Y.csv"))?);
                writeln!(w, "i,j,y")?;
                match &self.y {
                    Observations::Symmetric(p) => {
                        for i in 0..p.n() {
                            for (k, y) in p.row(i).iter().enumerate() {
                                writeln!(w, "{},{},{}", i, i + 1 + k, fmt_f64(*y))?;
                            }
                        }
                    }
                    Observations::Bipartite(d) => {
                        for i in 0..d.n {
                            for (j, y) in d.row(i).iter().enumerate() {
                                writeln!(w, "{},{},{}", i, j, fmt_f64(*y))?;
                            }
                        }
                    }
                }
                w.flush()?;
                match &self.planted {
                    Some(Planted::Symmetric { x0 }) => write_matrix_csv(&dir.join("X0.csv"), x0)?,
                    Some(Planted::Bipartite { u0, v0 }) => {
                        write_matrix_csv(&dir.join("U0.csv"), u0)?;
                        write_matrix_csv(&dir.join("V0.csv"), v0)?;
                    }
                    None => {}
                }
            }
        }
        Ok(())
    }

    /// Reads an instance written by [`ProblemInstance::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: InstanceMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let (n, m) = (meta.n, meta.m);
        let r = |k: usize| meta.rank.get(k).copied().unwrap_or(1);
        let (y_raw, planted) = match meta.format {
            FileFormat::Binary => {
                let y = read_f64_bin(&dir.join("Y.bin"))?;
                let planted = match meta.kind {
                    InstanceKind::Symmetric if dir.join("X0.bin").exists() => Some(Planted::Symmetric {
                        x0: read_matrix_bin(&dir.join("X0.bin"), n, r(0))?,
                    }),
                    InstanceKind::Bipartite if dir.join("U0.bin").exists() => Some(Planted::Bipartite {
                        u0: read_matrix_bin(&dir.join("U0.bin"), n, r(0))?,
                        v0: read_matrix_bin(&dir.join("V0.bin"), m, r(1))?,
                    }),
                    _ => None,
                };
                (y, planted)
            }
            FileFormat::Csv => {
                let y = read_y_csv(&dir.join("Y.csv"), meta.y_len)?;
                let planted = match meta.kind {
                    InstanceKind::Symmetric if dir.join("X0.csv").exists() => Some(Planted::Symmetric {
                        x0: read_matrix_csv(&dir.join("X0.csv"), n, r(0))?,
                    }),
                    InstanceKind::Bipartite if dir.join("U0.csv").exists() => Some(Planted::Bipartite {
                        u0: read_matrix_csv(&dir.join("U0.csv"), n, r(0))?,
                        v0: read_matrix_csv(&dir.join("V0.csv"), m, r(1))?,
                    }),
                    _ => None,
                };
                (y, planted)
            }
        };
        let y = match meta.kind {
            InstanceKind::Symmetric => Observations::Symmetric(PackedSymmetric::from_vec(n, y_raw)?),
            InstanceKind::Bipartite => Observations::Bipartite(DenseRect::from_vec(n, m, y_raw)?),
        };
        Ok(ProblemInstance {
            kind: meta.kind,
            n,
            m,
            y,
            planted,
            generator: meta.generator,
            priors: meta.priors,
            seed: meta.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub kind: InstanceKind,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub rank: Vec<usize>,
    pub seed: u64,
    pub priors: Vec<PriorSpec>,
    pub generator: Generator,
    pub format: FileFormat,
    pub y_len: usize,
}

/// Formats with 12 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.11e}");
    // shortest round-trip of the rounded value
    let parsed: f64 = s.parse().unwrap_or(v);
    if (1e-4..1e15).contains(&parsed.abs()) {
        format!("{parsed}")
    } else {
        format!("{parsed:e}")
    }
}

pub fn write_f64_bin(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f64_bin(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::ShapeMismatch(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Row-major binary dump of a matrix.
pub fn write_matrix_bin(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut flat = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            flat.push(m[(i, j)]);
        }
    }
    write_f64_bin(path, &flat)
}

pub fn read_matrix_bin(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let v = read_f64_bin(path)?;
    if v.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "{} holds {} values, expected {rows}x{cols}",
            path.display(),
            v.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &v))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (0..m.ncols()).map(|k| format!("c{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|k| fmt_f64(m[(i, k)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(s: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad number {s:?} in {}", path.display())))
}

pub fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut vals = Vec::with_capacity(rows * cols);
    for line in reader.lines().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for f in line.split(',') {
            vals.push(parse_field(f, path)?);
        }
    }
    if vals.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!("{} has wrong size", path.display())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

fn read_y_csv(path: &Path, len: usize) -> Result<Vec<f64>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut vals = Vec::with_capacity(len);
    for line in reader.lines().skip(1) {
        let line = line?;
        if let Some(y) = line.split(',').nth(2) {
            vals.push(parse_field(y, path)?);
        }
    }
    if vals.len() != len {
        return Err(Error::ShapeMismatch(format!("{} has wrong size", path.display())));
    }
    Ok(vals)
}

fn row_dot(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|k| a[(i, k)] * b[(j, k)]).sum()
}

fn fill_packed<F>(n: usize, seed: u64, entry: F) -> Result<PackedSymmetric>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let mut data = vec![0.0; PackedSymmetric::len_for(n)];
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(n);
    let mut rest: &mut [f64] = &mut data;
    for i in 0..n {
        let (head, tail) = rest.split_at_mut(n - i - 1);
        rows.push((i, head));
        rest = tail;
    }
    rows.into_par_iter().try_for_each(|(i, row)| -> Result<()> {
        let mut rng = row_rng(seed, i);
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = entry(i, i + 1 + k, &mut rng)?;
        }
        Ok(())
    })?;
    PackedSymmetric::from_vec(n, data)
}

fn fill_dense<F>(n: usize, m: usize, seed: u64, entry: F) -> Result<DenseRect>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let mut data = vec![0.0; n * m];
    data.par_chunks_mut(m.max(1)).enumerate().try_for_each(|(i, row)| -> Result<()> {
        let mut rng = row_rng(seed, i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = entry(i, j, &mut rng)?;
        }
        Ok(())
    })?;
    DenseRect::from_vec(n, m, data)
}

/// Planted symmetric instance: `Y_ij ~ P_out(. | x0_i . x0_j / sqrt(N))` for `i < j`.
pub fn generate_symmetric(
    prior0: &PriorSpec,
    channel: &ChannelSpec,
    n: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::Config(format!("symmetric instances need N >= 2, got {n}")));
    }
    prior0.validate()?;
    channel.validate()?;
    let x0 = prior0.sample(n, derive_seed(seed, TAG_X));
    generate_symmetric_from(prior0, x0, channel, seed)
}

/// Symmetric instance around a given planted matrix.
pub fn generate_symmetric_from(
    prior0: &PriorSpec,
    x0: DMatrix<f64>,
    channel: &ChannelSpec,
    seed: u64,
) -> Result<ProblemInstance> {
    let n = x0.nrows();
    let scale = 1.0 / (n as f64).sqrt();
    let gen = channel.generating;
    let y = fill_packed(n, seed, |i, j, rng| gen.sample(row_dot(&x0, i, &x0, j) * scale, rng))?;
    Ok(ProblemInstance {
        kind: InstanceKind::Symmetric,
        n,
        m: n,
        y: Observations::Symmetric(y),
        planted: Some(Planted::Symmetric { x0 }),
        generator: Generator::Planted { channel: *channel },
        priors: vec![prior0.clone()],
        seed,
    })
}

/// Planted bipartite instance: `Y_ij ~ P_out(. | u0_i . v0_j / sqrt(N))`.
pub fn generate_bipartite(
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    channel: &ChannelSpec,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    if n < 1 || m < 1 {
        return Err(Error::Config("bipartite instances need N, M >= 1".into()));
    }
    prior_u.validate()?;
    prior_v.validate()?;
    channel.validate()?;
    let u0 = prior_u.sample(n, derive_seed(seed, TAG_U));
    let v0 = prior_v.sample(m, derive_seed(seed, TAG_V));
    generate_bipartite_from(prior_u, prior_v, u0, v0, channel, seed)
}

pub fn generate_bipartite_from(
    prior_u: &PriorSpec,
    prior_v: &PriorSpec,
    u0: DMatrix<f64>,
    v0: DMatrix<f64>,
    channel: &ChannelSpec,
    seed: u64,
) -> Result<ProblemInstance> {
    if u0.ncols() != v0.ncols() {
        return Err(Error::ShapeMismatch("U0 and V0 must have equal rank".into()));
    }
    let (n, m) = (u0.nrows(), v0.nrows());
    let scale = 1.0 / (n as f64).sqrt();
    let gen = channel.generating;
    let y = fill_dense(n, m, seed, |i, j, rng| gen.sample(row_dot(&u0, i, &v0, j) * scale, rng))?;
    Ok(ProblemInstance {
        kind: InstanceKind::Bipartite,
        n,
        m,
        y: Observations::Bipartite(y),
        planted: Some(Planted::Bipartite { u0, v0 }),
        generator: Generator::Planted { channel: *channel },
        priors: vec![prior_u.clone(), prior_v.clone()],
        seed,
    })
}

/// Quenched instance with i.i.d. `Y`. `m = None` gives a symmetric `N x N` matrix.
pub fn generate_quenched(
    disorder: &Disorder,
    assumed: &ChannelFamily,
    n: usize,
    m: Option<usize>,
    seed: u64,
) -> Result<ProblemInstance> {
    disorder.validate()?;
    assumed.validate()?;
    let generator = Generator::Quenched { disorder: *disorder, assumed: *assumed };
    let d = *disorder;
    match m {
        None => {
            if n < 2 {
                return Err(Error::Config(format!("symmetric instances need N >= 2, got {n}")));
            }
            let y = fill_packed(n, seed, |_, _, rng| Ok(d.sample(rng)))?;
            Ok(ProblemInstance {
                kind: InstanceKind::Symmetric,
                n,
                m: n,
                y: Observations::Symmetric(y),
                planted: None,
                generator,
                priors: Vec::new(),
                seed,
            })
        }
        Some(m) => {
            let y = fill_dense(n, m, seed, |_, _, rng| Ok(d.sample(rng)))?;
            Ok(ProblemInstance {
                kind: InstanceKind::Bipartite,
                n,
                m,
                y: Observations::Bipartite(y),
                planted: None,
                generator,
                priors: Vec::new(),
                seed,
            })
        }
    }
}

/// `(1/N) sum_i ||x_i - x0_i||^2`, minimised over the given symmetry group.
pub fn empirical_mse(estimate: &DMatrix<f64>, planted: &DMatrix<f64>, symmetry: Symmetry) -> Result<f64> {
    if estimate.shape() != planted.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, planted is {:?}",
            estimate.shape(),
            planted.shape()
        )));
    }
    let (n, r) = estimate.shape();
    let col_cost = |a: usize, b: usize, sign: f64| -> f64 {
        (0..n).map(|i| (sign * estimate[(i, a)] - planted[(i, b)]).powi(2)).sum()
    };
    let total = match symmetry {
        Symmetry::None => (0..r).map(|k| col_cost(k, k, 1.0)).sum(),
        Symmetry::Sign => (0..r).map(|k| col_cost(k, k, 1.0).min(col_cost(k, k, -1.0))).sum(),
        Symmetry::Permutation => {
            let cost = DMatrix::from_fn(r, r, |a, b| col_cost(a, b, 1.0));
            best_assignment(&cost)
        }
    };
    Ok(total / n as f64)
}

/// Minimum-cost assignment of estimate columns (rows of `cost`) to planted
/// columns: exhaustive for `r <= 8`, greedy above.
fn best_assignment(cost: &DMatrix<f64>) -> f64 {
    let r = cost.nrows();
    if r <= 8 {
        let mut perm: Vec<usize> = (0..r).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, cost, &mut best);
        best
    } else {
        let mut used = vec![false; r];
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(r * r);
        for a in 0..r {
            for b in 0..r {
                pairs.push((cost[(a, b)], a, b));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut assigned = vec![false; r];
        let mut total = 0.0;
        for (c, a, b) in pairs {
            if !assigned[a] && !used[b] {
                assigned[a] = true;
                used[b] = true;
                total += c;
            }
        }
        total
    }
}

fn permute(perm: &mut Vec<usize>, k: usize, cost: &DMatrix<f64>, best: &mut f64) {
    if k == perm.len() {
        let c: f64 = perm.iter().enumerate().map(|(a, &b)| cost[(a, b)]).sum();
        if c < *best {
            *best = c;
        }
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, cost, best);
        perm.swap(k, i);
    }
}
