//! Small dense linear algebra kernel.
//!
//! Everything here works on row-major `f64` storage. The matrices that show up
//! in this crate are banded with a handful of dense constraint rows, so the
//! products and the LU factorization skip structural zeros; the storage itself
//! stays dense.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`eigenvalues`].
pub const EIGEN_MAX_DIM: usize = 128;

/// Pivots smaller than this fraction of the largest entry mark a matrix singular.
pub const PIVOT_REL_TOL: f64 = 1e-14;

/// Relative threshold used to classify eigenvalues as zero.
pub const ZERO_EIGEN_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    /// `b − self·x` with each row accumulated in twice the working precision
    /// (error-free products and sums).
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        check_len(self.rows, b.len())?;
        Ok((0..self.rows)
            .map(|i| {
                let (mut s, mut c) = (b[i], 0.0);
                for (&a, &xj) in self.row(i).iter().zip(x) {
                    if a == 0.0 {
                        continue;
                    }
                    let p = -a * xj;
                    let pe = (-a).mul_add(xj, -p);
                    let t = s + p;
                    let z = t - s;
                    c += (s - (t - z)) + (p - z) + pe;
                    s = t;
                }
                s + c
            })
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · diag(weights) · self`, accumulated row by row over nonzeros.
    pub fn weighted_gram(&self, weights: &[f64]) -> Result<DenseMatrix> {
        check_len(self.rows, weights.len())?;
        let mut out = DenseMatrix::zeros(self.cols, self.cols);
        let mut nz = Vec::new();
        for (k, &w) in weights.iter().enumerate() {
            nz.clear();
            nz.extend(
                self.row(k)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (j, v)),
            );
            for &(i, a) in &nz {
                for &(j, b) in &nz {
                    out[(i, j)] += w * a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.rows * self.cols, other.rows * other.cols)?;
        check_len(self.rows, other.rows)?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.add(&other.scaled(-1.0))
    }

    /// Copies `block` into `self` with its upper-left corner at `(r0, c0)`,
    /// scaled by `factor` and added to the existing entries.
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix, factor: f64) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                let v = block[(i, j)];
                if v != 0.0 {
                    self[(r0 + i, c0 + j)] += factor * v;
                }
            }
        }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(r0 + i)[c0..c0 + cols]);
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// LU with partial pivoting

/// LU factorization `P·A = L·U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Lu> {
        Self::factor_owned(a.clone())
    }

    pub fn factor_owned(mut a: DenseMatrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let threshold = PIVOT_REL_TOL * a.max_abs();
        let mut perm: Vec<usize> = (0..n).collect();
        // Rightmost structurally nonzero column of each row.
        let mut reach: Vec<usize> = (0..n)
            .map(|i| a.row(i).iter().rposition(|v| *v != 0.0).unwrap_or(0))
            .collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0_f64;

        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmag > threshold) || pmag == 0.0 {
                return Err(Error::SingularMatrix { step: k, pivot: pmag });
            }
            if p != k {
                swap_rows(&mut a, p, k);
                perm.swap(p, k);
                reach.swap(p, k);
            }
            min_pivot = min_pivot.min(pmag);
            max_pivot = max_pivot.max(pmag);

            let end = reach[k].max(k) + 1;
            let cols = a.cols;
            let (head, tail) = a.data.split_at_mut((k + 1) * cols);
            let pivot_row = &head[k * cols..k * cols + cols];
            let pivot = pivot_row[k];
            for (off, row) in tail.chunks_exact_mut(cols).enumerate() {
                let lik = row[k];
                if lik == 0.0 {
                    continue;
                }
                let l = lik / pivot;
                row[k] = l;
                for (dst, &src) in row[k + 1..end].iter_mut().zip(&pivot_row[k + 1..end]) {
                    *dst -= l * src;
                }
                let i = k + 1 + off;
                reach[i] = reach[i].max(end - 1);
            }
        }

        Ok(Lu {
            n,
            lu: a,
            perm,
            min_pivot,
            max_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest over largest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        if self.n == 0 {
            1.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

fn swap_rows(a: &mut DenseMatrix, p: usize, k: usize) {
    let cols = a.cols;
    let (lo, hi) = if p < k { (p, k) } else { (k, p) };
    let (head, tail) = a.data.split_at_mut(hi * cols);
    head[lo * cols..lo * cols + cols].swap_with_slice(&mut tail[..cols]);
}

/// Solves `a·x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.rows, b.len())?;
    Lu::factor(a)?.solve(b)
}

// ---------------------------------------------------------------------------
// Householder QR with column pivoting

/// `A·P = Q·R` with `Q` orthogonal and `|R₀₀| ≥ |R₁₁| ≥ …`.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    pub perm: Vec<usize>,
}

impl PivotedQr {
    pub fn factor(a: &DenseMatrix) -> PivotedQr {
        let m = a.rows;
        let n = a.cols;
        let mut r = a.clone();
        let mut q = DenseMatrix::identity(m);
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut v = vec![0.0; m];

        for k in 0..steps {
            // Norms are recomputed each step; sizes here are small.
            let (jmax, _) = (k..n)
                .map(|j| (j, (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if jmax != k {
                for i in 0..m {
                    let tmp = r[(i, k)];
                    r[(i, k)] = r[(i, jmax)];
                    r[(i, jmax)] = tmp;
                }
                perm.swap(k, jmax);
            }

            let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
            for i in 0..m {
                v[i] = if i < k { 0.0 } else { r[(i, k)] };
            }
            v[k] -= alpha;
            let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            // R ← (I − 2vvᵀ/vᵀv) R
            for j in k..n {
                let s: f64 = (k..m).map(|i| v[i] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
                for i in k..m {
                    r[(i, j)] -= s * v[i];
                }
            }
            // Q ← Q (I − 2vvᵀ/vᵀv)
            for i in 0..m {
                let s: f64 = (k..m).map(|j| q[(i, j)] * v[j]).sum::<f64>() * 2.0 / vnorm2;
                for j in k..m {
                    q[(i, j)] -= s * v[j];
                }
            }
            for i in k + 1..m {
                r[(i, k)] = 0.0;
            }
        }
        PivotedQr { q, r, perm }
    }

    /// Number of diagonal entries of `R` whose magnitude exceeds `abs_tol`.
    pub fn rank(&self, abs_tol: f64) -> usize {
        let steps = self.r.rows.min(self.r.cols);
        (0..steps)
            .take_while(|&k| self.r[(k, k)].abs() > abs_tol)
            .count()
    }
}

/// Numerical rank: number of pivoted-QR diagonal entries above `abs_tol`.
pub fn numerical_rank(a: &DenseMatrix, abs_tol: f64) -> usize {
    PivotedQr::factor(a).rank(abs_tol)
}

/// Orthonormal basis of the numerical right null space of `a`, one vector per column.
pub fn null_space(a: &DenseMatrix, abs_tol: f64) -> DenseMatrix {
    let (basis, rank) = row_space_split(a, abs_tol);
    let n = a.cols;
    basis.submatrix(0, rank, n, n - rank)
}

// Orthogonal Q whose first `rank` columns span the row space of `a` and whose
// remaining columns span its null space.
fn row_space_split(a: &DenseMatrix, abs_tol: f64) -> (DenseMatrix, usize) {
    let qr = PivotedQr::factor(&a.transpose());
    let rank = qr.rank(abs_tol);
    (qr.q, rank)
}

// ---------------------------------------------------------------------------
// Eigenvalues

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn distance_to(&self, re: f64, im: f64) -> f64 {
        (self.re - re).hypot(self.im - im)
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Moduli at or below this value count as zero.
    pub zero_tol: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(Eigenvalue::modulus).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(Eigenvalue::modulus)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn count_zero(&self) -> usize {
        self.eigenvalues
            .iter()
            .filter(|e| e.modulus() <= self.zero_tol)
            .count()
    }

    pub fn count_below(&self, modulus: f64) -> usize {
        self.eigenvalues
            .iter()
            .filter(|e| e.modulus() < modulus)
            .count()
    }

    pub fn count_near(&self, re: f64, im: f64, tol: f64) -> usize {
        self.eigenvalues
            .iter()
            .filter(|e| e.distance_to(re, im) <= tol)
            .count()
    }

    pub fn sum(&self) -> (f64, f64) {
        self.eigenvalues
            .iter()
            .fold((0.0, 0.0), |(r, i), e| (r + e.re, i + e.im))
    }

    /// Eigenvalues ordered by real part, then imaginary part.
    pub fn sorted(&self) -> Vec<Eigenvalue> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

/// Eigenvalues of a real square matrix.
///
/// Zero eigenvalues are split off first by a staircase deflation: the numerical
/// null space is found with a pivoted QR, rotated out by an orthogonal
/// similarity, and the process repeats on the remaining block. This recovers
/// defective zero eigenvalues exactly instead of as an `O(√ε)` cluster. The
/// remaining block goes through Hessenberg reduction and Francis double-shift
/// QR iteration.
pub fn eigenvalues(a: &DenseMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n > EIGEN_MAX_DIM {
        return Err(Error::TooLarge(n));
    }
    let scale = a.norm_frobenius();
    let deflate_tol = ZERO_EIGEN_REL_TOL * scale;

    let mut values = Vec::with_capacity(n);
    let mut work = a.clone();
    while work.rows > 0 && scale > 0.0 {
        let (q, rank) = row_space_split(&work, deflate_tol);
        if rank == work.rows {
            break;
        }
        values.extend(std::iter::repeat(Eigenvalue { re: 0.0, im: 0.0 }).take(work.rows - rank));
        let range = q.submatrix(0, 0, work.rows, rank);
        work = range.transpose().matmul(&work)?.matmul(&range)?;
    }
    if scale == 0.0 {
        values.extend(std::iter::repeat(Eigenvalue { re: 0.0, im: 0.0 }).take(n));
    } else if work.rows > 0 {
        let mut h = work;
        hessenberg_in_place(&mut h);
        values.extend(hessenberg_qr(&mut h)?);
    }

    let radius = values.iter().map(Eigenvalue::modulus).fold(0.0, f64::max);
    Ok(Spectrum {
        eigenvalues: values,
        zero_tol: ZERO_EIGEN_REL_TOL * radius,
    })
}

fn hessenberg_in_place(h: &mut DenseMatrix) {
    let n = h.rows;
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0; n];
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let f: f64 = (m..=high).map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f: f64 = (m..=high).map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in m + 1..=high {
            h[(i, m - 1)] = 0.0;
        }
    }
}

// Eigenvalues of an upper Hessenberg matrix (EISPACK `hqr` structure).
fn hessenberg_qr(h: &mut DenseMatrix) -> Result<Vec<Eigenvalue>> {
    let nn = h.rows as isize;
    let mut out = vec![Eigenvalue { re: 0.0, im: 0.0 }; h.rows];
    let eps = f64::EPSILON;
    let budget = 40 * h.rows.max(1);
    let mut total_iters = 0usize;

    let mut norm = 0.0;
    for i in 0..h.rows {
        for j in i.saturating_sub(1)..h.rows {
            norm += h[(i, j)].abs();
        }
    }

    let at = |h: &DenseMatrix, i: isize, j: isize| h[(i as usize, j as usize)];

    let mut n = nn - 1;
    let mut exshift = 0.0;
    let mut iter = 0;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > 0 {
            s = at(h, l - 1, l - 1).abs() + at(h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at(h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            out[n as usize] = Eigenvalue {
                re: at(h, n, n) + exshift,
                im: 0.0,
            };
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = at(h, n, n - 1) * at(h, n - 1, n);
            p = (at(h, n - 1, n - 1) - at(h, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = at(h, n, n) + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let first = x + z;
                let second = if z != 0.0 { x - w / z } else { first };
                out[(n - 1) as usize] = Eigenvalue { re: first, im: 0.0 };
                out[n as usize] = Eigenvalue { re: second, im: 0.0 };
            } else {
                out[(n - 1) as usize] = Eigenvalue { re: x + p, im: z };
                out[n as usize] = Eigenvalue { re: x + p, im: -z };
            }
            n -= 2;
            iter = 0;
        } else {
            x = at(h, n, n);
            y = at(h, n - 1, n - 1);
            w = at(h, n, n - 1) * at(h, n - 1, n);

            if iter == 10 {
                exshift += x;
                for i in 0..=n {
                    h[(i as usize, i as usize)] -= x;
                }
                s = at(h, n, n - 1).abs() + at(h, n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        h[(i as usize, i as usize)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iters += 1;
            if total_iters > budget {
                return Err(Error::EigenNoConvergence {
                    iterations: total_iters,
                });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            loop {
                z = at(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(h, m + 1, m) + at(h, m, m + 1);
                q = at(h, m + 1, m + 1) - z - r - s;
                r = at(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = at(h, m, m - 1).abs() * (q.abs() + r.abs());
                let rhs = eps
                    * (p.abs() * (at(h, m - 1, m - 1).abs() + z.abs() + at(h, m + 1, m + 1).abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            let mut k = m;
            while k <= n - 1 {
                let notlast = k != n - 1;
                if k != m {
                    p = at(h, k, k - 1);
                    q = at(h, k + 1, k - 1);
                    r = if notlast { at(h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        h[(k as usize, (k - 1) as usize)] = -at(h, k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        let (ku, ju) = (k as usize, j as usize);
                        p = h[(ku, ju)] + q * h[(ku + 1, ju)];
                        if notlast {
                            p += r * h[(ku + 2, ju)];
                            h[(ku + 2, ju)] -= p * z;
                        }
                        h[(ku, ju)] -= p * x;
                        h[(ku + 1, ju)] -= p * y;
                    }
                    let top = n.min(k + 3);
                    for i in 0..=top {
                        let (iu, ku) = (i as usize, k as usize);
                        p = x * h[(iu, ku)] + y * h[(iu, ku + 1)];
                        if notlast {
                            p += z * h[(iu, ku + 2)];
                            h[(iu, ku + 2)] -= p * r;
                        }
                        h[(iu, ku)] -= p;
                        h[(iu, ku + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Least squares

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the summed squared residuals.
    pub residual: f64,
}

/// Ordinary least-squares line through `(xs, ys)`.
pub fn lstsq_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    check_len(xs.len(), ys.len())?;
    let n = xs.len();
    if n == 0 {
        return Err(Error::DegenerateAbscissa);
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}
