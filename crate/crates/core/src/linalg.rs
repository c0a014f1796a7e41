//! Dense linear-algebra kernels.
//!
//! [`Matrix`] is a plain row-major buffer. The heavy decompositions
//! (Cholesky, SVD, symmetric eigensolve, real Schur form) are delegated to
//! `nalgebra`; everything here validates its inputs and reports failures as
//! [`Error`] values instead of panicking.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            Dimension,
            "{} entries for a {rows}x{cols} matrix",
            data.len()
        );
        ensure!(
            data.iter().all(|v| v.is_finite()),
            Validation,
            "matrix contains non-finite entries"
        );
        Ok(Self { rows, cols, data })
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            ensure!(
                r.len() == cols,
                Dimension,
                "row {i} has {} entries, expected {cols}",
                r.len()
            );
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty slice with a zero width would panic
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.rows, "row range out of bounds");
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copy of the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(
            self.cols == other.rows,
            Dimension,
            "cannot multiply {}x{} by {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        Ok(from_na(&(to_na(self) * to_na(other))))
    }

    /// Largest entry of `|A - I|` for a square matrix.
    pub fn max_abs_deviation_from_identity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// Largest asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub(crate) fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn ensure_finite_slice(v: &[f64], what: &str) -> Result<()> {
    ensure!(
        v.iter().all(|x| x.is_finite()),
        Validation,
        "{what} contains non-finite entries"
    );
    Ok(())
}

/// `A · v`.
pub fn matvec(a: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        a.cols == v.len(),
        Dimension,
        "matrix has {} columns, vector has {} entries",
        a.cols,
        v.len()
    );
    ensure_finite_slice(v, "vector")?;
    let mut out = vec![0.0; a.rows];
    matvec_into(a, v, &mut out);
    Ok(out)
}

/// Unchecked `out = A · v`; callers guarantee the dimensions.
#[inline]
pub(crate) fn matvec_into(a: &Matrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.cols, v.len());
    debug_assert_eq!(a.rows, out.len());
    for (o, row) in out.iter_mut().zip(a.row_iter()) {
        *o = dot(row, v);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `XᵀX`.
pub fn gram(x: &Matrix) -> Matrix {
    let xn = to_na(x);
    from_na(&xn.tr_mul(&xn))
}

/// Ridge regression: returns the `M×N` matrix `W` minimizing
/// `‖X Wᵀ − Y‖² + λ‖W‖²` for `X: L×N`, `Y: L×M`.
///
/// For `λ > 0` the regularized normal equations are solved with Cholesky,
/// falling back to an SVD of `X` if the factorization fails. For `λ = 0` the
/// SVD path is used directly so that rank deficiency is detected: an
/// underdetermined system (`L < N`) yields the minimum-norm interpolating
/// solution, a rank-deficient overdetermined one is reported as singular.
pub fn ridge_solve(x: &Matrix, y: &Matrix, lambda: f64) -> Result<Matrix> {
    ensure!(x.rows >= 1, Validation, "ridge_solve needs at least one sample");
    ensure!(
        x.rows == y.rows,
        Dimension,
        "design has {} rows, targets have {}",
        x.rows,
        y.rows
    );
    ensure!(
        lambda.is_finite() && lambda >= 0.0,
        Validation,
        "ridge parameter must be finite and nonnegative, got {lambda}"
    );
    ensure!(
        x.is_finite() && y.is_finite(),
        Validation,
        "ridge inputs contain non-finite entries"
    );

    let xn = to_na(x);
    let yn = to_na(y);
    let n = x.cols;

    if lambda > 0.0 {
        let mut a = xn.tr_mul(&xn);
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        let rhs = xn.tr_mul(&yn);
        if let Some(chol) = a.cholesky() {
            let wt = chol.solve(&rhs);
            if wt.iter().all(|v| v.is_finite()) {
                return Ok(from_na(&wt.transpose()));
            }
        }
        log::debug!("cholesky failed for ridge system, using SVD fallback");
    }
    svd_ridge(xn, &yn, lambda)
}

fn svd_ridge(xn: DMatrix<f64>, yn: &DMatrix<f64>, lambda: f64) -> Result<Matrix> {
    let (l, n) = xn.shape();
    let svd = xn.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().fold(0.0f64, |m, v| m.max(*v));
    let tol = s_max * (l.max(n) as f64) * f64::EPSILON;
    let rank = s.iter().filter(|v| **v > tol).count();

    if lambda == 0.0 {
        if rank == 0 {
            return Err(Error::Numerical(
                "design matrix is zero; least-squares system is singular".into(),
            ));
        }
        if l >= n && rank < n {
            return Err(Error::Numerical(format!(
                "normal equations are singular (rank {rank} < {n})"
            )));
        }
    }

    // Wᵀ = V diag(s / (s² + λ)) Uᵀ Y
    let mut uty = u.tr_mul(yn);
    for (i, mut row) in uty.row_iter_mut().enumerate() {
        let si = s[i];
        let f = if si > tol || lambda > 0.0 {
            si / (si * si + lambda)
        } else {
            0.0
        };
        row *= f;
    }
    let wt = vt.tr_mul(&uty);
    if !wt.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("ridge solution is not finite".into()));
    }
    Ok(from_na(&wt.transpose()))
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

impl SymEig {
    /// `V diag(d) Vᵀ` for a replacement spectrum `d`.
    pub fn reconstruct_with(&self, diag: &[f64]) -> Matrix {
        reconstruct(&self.vectors, diag)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.values)
    }
}

pub(crate) fn reconstruct(vectors: &Matrix, diag: &[f64]) -> Matrix {
    let v = to_na(vectors);
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= diag[j];
    }
    let mut out = from_na(&(vd * v.transpose()));
    // exact symmetry; the product is only symmetric up to roundoff
    let n = out.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, m);
            out.set(j, i, m);
        }
    }
    out
}

pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// Eigenvector signs are fixed so that the largest-magnitude component of
/// each vector is positive.
pub fn sym_eig(s: &Matrix) -> Result<SymEig> {
    ensure!(s.is_square(), Dimension, "sym_eig needs a square matrix");
    ensure!(s.is_finite(), Validation, "sym_eig input is not finite");
    let scale = s.max_abs().max(1.0);
    let asym = s.asymmetry();
    ensure!(
        asym <= SYMMETRY_TOL * scale,
        Validation,
        "matrix is not symmetric (max asymmetry {asym:e})"
    );
    let n = s.rows;
    let mut a = to_na(s);
    a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, dst, sign * col[i]);
        }
    }
    Ok(SymEig { values, vectors })
}

/// Largest eigenvalue magnitude of a square matrix, from its real Schur form.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    ensure!(a.is_square(), Dimension, "spectral radius needs a square matrix");
    ensure!(a.is_finite(), Validation, "matrix is not finite");
    if a.rows == 0 {
        return Ok(0.0);
    }
    let schur = nalgebra::linalg::Schur::try_new(to_na(a), f64::EPSILON, 100 * a.rows.max(10))
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}
