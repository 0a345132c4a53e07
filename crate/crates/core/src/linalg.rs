//! Dense real linear algebra for the small matrices that appear in model
//! evaluation, LMI blocks and the interior-point solver.
//!
//! Everything here is written for desk-scale sizes (tens to a few hundred rows)
//! and favours accuracy and determinism over raw throughput.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Threshold for strict definiteness checks.
pub const TOL_PSD: f64 = 1e-9;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Integer power by repeated squaring.
pub fn powi(mut base: f64, mut exp: u32) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has the wrong length");
        Self { rows, cols, data: data.to_vec() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = i * other.cols;
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out.data[orow..orow + other.cols].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without forming the transpose.
    pub fn tr_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "tr_matmul dimension mismatch");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, a) in arow.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_scaled_assign(&mut self, s: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn inner(&self, other: &Mat) -> f64 {
        dot(&self.data, &other.data)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Spectral norm via the singular values.
    pub fn spectral_norm(&self) -> f64 {
        svd(self).sigma.first().copied().unwrap_or(0.0)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix stored once as a row-wise packed lower triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    dim: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, packed: vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.set(i, i, 1.0);
        }
        s
    }

    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Self {
        assert_eq!(packed.len(), dim * (dim + 1) / 2, "packed length mismatch");
        Self { dim, packed }
    }

    /// Symmetrizes by averaging `A[i][j]` and `A[j][i]`.
    pub fn from_full(a: &Mat) -> Self {
        assert!(a.is_square(), "SymMat::from_full needs a square matrix");
        let mut s = Self::zeros(a.rows());
        for i in 0..a.rows() {
            for j in 0..=i {
                s.set(i, j, 0.5 * (a[(i, j)] + a[(j, i)]));
            }
        }
        s
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[packed_index(i, j)] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.packed[packed_index(i, j)] += v;
    }

    pub fn to_full(&self) -> Mat {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn add_scaled_assign(&mut self, s: f64, other: &SymMat) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.packed.iter_mut().zip(&other.packed) {
            *a += s * b;
        }
    }

    pub fn scaled(&self, s: f64) -> SymMat {
        SymMat { dim: self.dim, packed: self.packed.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    /// `vᵀ S v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn is_zero(&self) -> bool {
        self.packed.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.packed)
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }
}

/// Lower Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    /// Factorizes the symmetric part of `a`.
    pub fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = 0.5 * (a[(j, j)] + a[(j, j)]);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = 0.5 * (a[(i, j)] + a[(j, i)]);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    /// Cholesky factorization that never fails on a symmetric positive
    /// semidefinite input: pivots below `pivot_tol` times the largest diagonal
    /// entry are replaced by a huge value, which removes the corresponding
    /// direction from subsequent solves. Returns the factor and the number of
    /// replaced pivots.
    pub fn new_dynamic(a: &Mat, pivot_tol: f64) -> Result<(Self, usize)> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let n = a.rows();
        let maxd = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
        let thresh = pivot_tol * maxd.max(f64::MIN_POSITIVE);
        let mut l = Mat::zeros(n, n);
        let mut replaced = 0;
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = if d <= thresh {
                replaced += 1;
                1e64
            } else {
                sqrt(d)
            };
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = 0.5 * (a[(i, j)] + a[(j, i)]);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok((Self { l }, replaced))
    }

    pub fn from_sym(a: &SymMat) -> Result<Self> {
        Self::new(&a.to_full())
    }

    pub fn factor(&self) -> &Mat {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim(), "rhs length mismatch");
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn inverse(&self) -> Mat {
        let n = self.dim();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| 2.0 * libm::log(self.l[(i, i)])).sum()
    }
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut p, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if !(best > 1e-14 * scale) || !best.is_finite() {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solves a general square system.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Lu::new(a)?.solve(b))
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Only the symmetric part of `a` is used.
pub fn sym_eig(a: &Mat) -> (Vec<f64>, Mat) {
    assert!(a.is_square(), "sym_eig needs a square matrix");
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Mat::identity(n);
    for sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    let t = 1.0 / (theta.abs() + sqrt(theta * theta + 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                } else {
                    0.0
                };
                if t == 0.0 {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[(r, p)];
                    let arq = m[(r, q)];
                    let np = c * arp - s * arq;
                    let nq = s * arp + c * arq;
                    m[(r, p)] = np;
                    m[(p, r)] = np;
                    m[(r, q)] = nq;
                    m[(q, r)] = nq;
                }
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

pub fn sym_eigvals(a: &Mat) -> Vec<f64> {
    sym_eig(a).0
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(s: &SymMat) -> f64 {
    if s.dim() == 0 {
        return f64::INFINITY;
    }
    sym_eigvals(&s.to_full())[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(s: &SymMat) -> f64 {
    if s.dim() == 0 {
        return f64::NEG_INFINITY;
    }
    *sym_eigvals(&s.to_full()).last().unwrap()
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`, σ descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

/// Householder reduction of a least-squares problem: returns `R` (upper
/// triangular, `k × cols` with `k = min(rows, cols)`), the first `k` entries of
/// `Q′b` and the norm of the rest, so that
/// `‖Ax − b‖² = ‖Rx − (Q′b)₁‖² + rest²` for every `x`.
pub fn qr_least_squares(a: &Mat, b: &[f64]) -> (Mat, Vec<f64>, f64) {
    let (rows, cols) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut rhs = b.to_vec();
    let k = rows.min(cols);
    for j in 0..k {
        let norm = sqrt((j..rows).map(|i| w[(i, j)] * w[(i, j)]).sum());
        if norm == 0.0 {
            continue;
        }
        let alpha = if w[(j, j)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|i| w[(i, j)]).collect();
        v[0] -= alpha;
        let vn2 = dot(&v, &v);
        if vn2 == 0.0 {
            continue;
        }
        for c in j..cols {
            let s = 2.0 * (j..rows).map(|i| v[i - j] * w[(i, c)]).sum::<f64>() / vn2;
            for i in j..rows {
                w[(i, c)] -= s * v[i - j];
            }
        }
        let s = 2.0 * (j..rows).map(|i| v[i - j] * rhs[i]).sum::<f64>() / vn2;
        for i in j..rows {
            rhs[i] -= s * v[i - j];
        }
    }
    let r = Mat::from_fn(k, cols, |i, c| if c >= i { w[(i, c)] } else { 0.0 });
    let rest = sqrt(rhs[k..].iter().map(|v| v * v).sum());
    rhs.truncate(k);
    (r, rhs, rest)
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Mat) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let (m, n) = (a.rows(), a.cols());
    // Work on columns: store the transpose so columns are contiguous rows.
    let mut w = a.transpose();
    let mut v = Mat::identity(n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q);
                    (dot(wp, wp), dot(wq, wq), dot(wp, wq))
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = {
                    let t = 1.0 / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                    if zeta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..m {
                    let xp = w[(p, k)];
                    let xq = w[(q, k)];
                    w[(p, k)] = c * xp - s * xq;
                    w[(q, k)] = s * xp + c * xq;
                }
                for k in 0..n {
                    let xp = v[(k, p)];
                    let xq = v[(k, q)];
                    v[(k, p)] = c * xp - s * xq;
                    v[(k, q)] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| norm2(w.row(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Mat::from_fn(m, n, |r, c| {
        let j = order[c];
        if norms[j] > 0.0 {
            w[(j, r)] / norms[j]
        } else {
            0.0
        }
    });
    let vv = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Svd { u, sigma, v: vv }
}

/// Convex upper bound on the concave function `-cᵀP⁻¹c`:
/// returns `bᵀPb − 2bᵀc`, which is never below `-cᵀP⁻¹c` and equals it when
/// `c = Pb`.
pub fn concave_quad_bound(b: &[f64], c: &[f64], p: &SymMat) -> Result<f64> {
    if b.len() != p.dim() || c.len() != p.dim() {
        return Err(Error::DimensionMismatch("concave_quad_bound operands".into()));
    }
    Cholesky::from_sym(p)?;
    Ok(p.quad_form(b) - 2.0 * dot(b, c))
}

/// Closed-form supremum of `ΔᵀQΔ + 2bᵀΔ + c` over `Δ` for `Q ≺ 0`.
///
/// Returns `(c − bᵀQ⁻¹b, −Q⁻¹b)`.
pub fn sup_concave_quadratic(q: &SymMat, b: &[f64], c: f64) -> Result<(f64, Vec<f64>)> {
    if b.len() != q.dim() {
        return Err(Error::DimensionMismatch("sup_concave_quadratic operands".into()));
    }
    let lmax = max_eig(q);
    if lmax > -TOL_PSD || !lmax.is_finite() {
        return Err(Error::NotConcave { max_eig: lmax });
    }
    let neg = q.scaled(-1.0);
    let chol = Cholesky::from_sym(&neg).map_err(|_| Error::NotConcave { max_eig: lmax })?;
    let argmax = chol.solve(b);
    Ok((c + dot(b, &argmax), argmax))
}

/// Symmetric block-tridiagonal matrix with square blocks of equal size.
///
/// `offdiag[t]` is the sub-diagonal block at block position `(t + 1, t)`; the
/// super-diagonal blocks are its transposes.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    pub block_dim: usize,
    pub diag: Vec<Mat>,
    pub offdiag: Vec<Mat>,
}

impl BlockTridiagonal {
    pub fn new(block_dim: usize, diag: Vec<Mat>, offdiag: Vec<Mat>) -> Result<Self> {
        let ok = !diag.is_empty()
            && offdiag.len() + 1 == diag.len()
            && diag.iter().chain(&offdiag).all(|b| b.rows() == block_dim && b.cols() == block_dim);
        if !ok {
            return Err(Error::DimensionMismatch("block tridiagonal layout".into()));
        }
        Ok(Self { block_dim, diag, offdiag })
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.diag.len()
    }

    pub fn assemble(&self) -> Mat {
        let n = self.block_dim;
        let mut a = Mat::zeros(self.dim(), self.dim());
        for (t, d) in self.diag.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    a[(t * n + i, t * n + j)] = 0.5 * (d[(i, j)] + d[(j, i)]);
                }
            }
        }
        for (t, b) in self.offdiag.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    a[((t + 1) * n + i, t * n + j)] = b[(i, j)];
                    a[(t * n + j, (t + 1) * n + i)] = b[(i, j)];
                }
            }
        }
        a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.block_dim;
        assert_eq!(x.len(), self.dim());
        let mut out = vec![0.0; x.len()];
        for (t, d) in self.diag.iter().enumerate() {
            let ds = d.symmetrized();
            let y = ds.matvec(&x[t * n..(t + 1) * n]);
            out[t * n..(t + 1) * n].iter_mut().zip(y).for_each(|(o, v)| *o += v);
        }
        for (t, b) in self.offdiag.iter().enumerate() {
            let lo = b.matvec(&x[t * n..(t + 1) * n]);
            out[(t + 1) * n..(t + 2) * n].iter_mut().zip(lo).for_each(|(o, v)| *o += v);
            let up = b.tr_matvec(&x[(t + 1) * n..(t + 2) * n]);
            out[t * n..(t + 1) * n].iter_mut().zip(up).for_each(|(o, v)| *o += v);
        }
        out
    }
}

/// Solves `A x = rhs` for a positive definite block-tridiagonal `A` by block
/// Cholesky factorization, in `O(T n³)`.
pub fn block_tridiag_solve(a: &BlockTridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.block_dim;
    let nb = a.num_blocks();
    if rhs.len() != n * nb {
        return Err(Error::DimensionMismatch("block tridiagonal rhs".into()));
    }
    let mut factors: Vec<Cholesky> = Vec::with_capacity(nb);
    // couplings[t] = B_{t-1} L_{t-1}^{-T}, the sub-diagonal of the block factor.
    let mut couplings: Vec<Mat> = Vec::with_capacity(nb.saturating_sub(1));
    factors.push(Cholesky::new(&a.diag[0].symmetrized())?);
    for t in 1..nb {
        let prev = &factors[t - 1];
        let b = &a.offdiag[t - 1];
        let mut c = Mat::zeros(n, n);
        for r in 0..n {
            let row = prev.solve_lower(b.row(r));
            c.row_mut(r).copy_from_slice(&row);
        }
        let cct = c.matmul(&c.transpose());
        let schur = a.diag[t].symmetrized().sub(&cct);
        factors.push(Cholesky::new(&schur)?);
        couplings.push(c);
    }
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(nb);
    for t in 0..nb {
        let mut r = rhs[t * n..(t + 1) * n].to_vec();
        if t > 0 {
            let cy = couplings[t - 1].matvec(&y[t - 1]);
            r.iter_mut().zip(cy).for_each(|(a, b)| *a -= b);
        }
        y.push(factors[t].solve_lower(&r));
    }
    let mut x = vec![0.0; n * nb];
    for t in (0..nb).rev() {
        let mut r = y[t].clone();
        if t + 1 < nb {
            let ct = couplings[t].tr_matvec(&x[(t + 1) * n..(t + 2) * n]);
            r.iter_mut().zip(ct).for_each(|(a, b)| *a -= b);
        }
        let xt = factors[t].solve_upper(&r);
        x[t * n..(t + 1) * n].copy_from_slice(&xt);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    #[test]
    fn qr_preserves_residual() {
        let a = super::Mat::from_fn(7, 3, |i, j| ((i * 5 + j * 3) % 7) as f64 - 2.5 + (i == j) as u8 as f64);
        let b: alloc::vec::Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let (r, qb, rest) = super::qr_least_squares(&a, &b);
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [0.3, 0.1, -4.0]] {
            let mut ra = a.matvec(&x);
            ra.iter_mut().zip(&b).for_each(|(p, q)| *p -= q);
            let mut rr = r.matvec(&x);
            rr.iter_mut().zip(&qb).for_each(|(p, q)| *p -= q);
            let lhs = super::dot(&ra, &ra);
            let rhs = super::dot(&rr, &rr) + rest * rest;
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs));
        }
    }

    use super::*;

    fn rng_mat(seed: u64, rows: usize, cols: usize) -> Mat {
        let mut state = seed;
        Mat::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn quad_bound_examples() {
        let p = SymMat::identity(1);
        assert_eq!(concave_quad_bound(&[1.0], &[1.0], &p).unwrap(), -1.0);
        let p2 = SymMat::identity(2);
        assert_eq!(concave_quad_bound(&[0.0, 0.0], &[1.0, 2.0], &p2).unwrap(), 0.0);
        let p3 = SymMat::from_packed(1, vec![3.0]);
        let v = concave_quad_bound(&[2.0], &[1.0], &p3).unwrap();
        assert_eq!(v, 8.0);
        assert!(v >= -1.0 / 3.0);
    }

    #[test]
    fn quad_bound_rejects_indefinite() {
        let p = SymMat::from_packed(2, vec![1.0, 2.0, 1.0]);
        assert_eq!(concave_quad_bound(&[1.0, 0.0], &[0.0, 1.0], &p), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn sup_concave_examples() {
        let (v, x) = sup_concave_quadratic(&SymMat::from_packed(1, vec![-1.0]), &[0.0], 5.0).unwrap();
        assert_eq!((v, x[0]), (5.0, 0.0));

        let (v, x) = sup_concave_quadratic(&SymMat::from_packed(1, vec![-2.0]), &[1.0], 0.0).unwrap();
        // Grid oracle over [-10, 10] with step 1e-4.
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0.0;
        for k in 0..=200_000 {
            let d = -10.0 + k as f64 * 1e-4;
            let val = -2.0 * d * d + 2.0 * d;
            if val > best {
                best = val;
                arg = d;
            }
        }
        assert!((v - best).abs() < 1e-6 && (v - 0.5).abs() < 1e-15);
        assert!((x[0] - arg).abs() < 1e-4);

        let q = SymMat::identity(2).scaled(-1.0);
        let (v, x) = sup_concave_quadratic(&q, &[1.0, 1.0], 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_concave_rejects_nonconcave() {
        let q = SymMat::from_packed(2, vec![-1.0, 0.0, 0.0]);
        assert!(matches!(sup_concave_quadratic(&q, &[1.0, 0.0], 0.0), Err(Error::NotConcave { .. })));
    }

    #[test]
    fn min_eig_examples() {
        assert!((min_eig(&SymMat::identity(3)) - 1.0).abs() < 1e-15);
        let s = SymMat::from_packed(2, vec![0.0, 1.0, 0.0]);
        assert!((min_eig(&s) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_reconstructs() {
        let a = rng_mat(7, 9, 9).symmetrized();
        let (vals, vecs) = sym_eig(&a);
        let recon = vecs.matmul(&Mat::diag(&vals)).matmul(&vecs.transpose());
        assert!(recon.sub(&a).max_abs() < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn svd_reconstructs() {
        for (r, c) in [(7, 4), (4, 7), (5, 5)] {
            let a = rng_mat(3, r, c);
            let d = svd(&a);
            let k = r.min(c);
            let recon = Mat::from_fn(r, c, |i, j| (0..k).map(|l| d.u[(i, l)] * d.sigma[l] * d.v[(j, l)]).sum());
            assert!(recon.sub(&a).max_abs() < 1e-12, "{r}x{c}");
        }
    }

    #[test]
    fn cholesky_and_lu_solve() {
        let b = rng_mat(11, 6, 6);
        let a = b.matmul(&b.transpose()).add(&Mat::identity(6));
        let rhs: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let x = Cholesky::new(&a).unwrap().solve(&rhs);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-12));
        let x2 = solve(&b, &rhs).unwrap();
        let r2 = b.matvec(&x2);
        assert!(r2.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn block_tridiag_small_cases() {
        let ident = BlockTridiagonal::new(2, vec![Mat::identity(2); 3], vec![Mat::zeros(2, 2); 2]).unwrap();
        let rhs = [1.0, -2.0, 3.0, 0.5, 7.0, 9.0];
        assert_eq!(block_tridiag_solve(&ident, &rhs).unwrap(), rhs.to_vec());

        let a = BlockTridiagonal::new(
            1,
            vec![Mat::from_row_slice(1, 1, &[2.0]), Mat::from_row_slice(1, 1, &[2.0])],
            vec![Mat::from_row_slice(1, 1, &[-1.0])],
        )
        .unwrap();
        let x = block_tridiag_solve(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_tridiag_not_pd() {
        let a = BlockTridiagonal::new(
            1,
            vec![Mat::from_row_slice(1, 1, &[1.0]), Mat::from_row_slice(1, 1, &[1.0])],
            vec![Mat::from_row_slice(1, 1, &[-2.0])],
        )
        .unwrap();
        assert_eq!(block_tridiag_solve(&a, &[1.0, 1.0]), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(powi(1.5, 0), 1.0);
        assert_eq!(powi(-2.0, 3), -8.0);
        assert_eq!(powi(3.0, 4), 81.0);
    }
}
