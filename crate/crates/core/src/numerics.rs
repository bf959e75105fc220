//! Small dense real-matrix kernel.
//!
//! Everything here is sized for desk-scale control problems (a handful of
//! states), so storage is a flat row-major `Vec<f64>` and the algorithms are
//! the textbook ones: partially pivoted LU, a Kronecker-form Lyapunov solve
//! and Kleinman–Newton iteration for the continuous algebraic Riccati
//! equation.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`lu_solve`].
pub const PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows, all of which must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {ncols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(nrows, ncols, data)
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

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, n, data)
    }

    /// Column vector as an `n x 1` matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
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

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Copies the `nr x nc` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let mut b = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                b[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        assert!(
            r0 + src.rows <= self.rows && c0 + src.cols <= self.cols,
            "block out of range"
        );
        for i in 0..src.rows {
            for j in 0..src.cols {
                self[(r0 + i, c0 + j)] = src[(i, j)];
            }
        }
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn symmetrized(&self) -> Self {
        (self + &self.transpose()).scale(0.5)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(m.nrows(), m.ncols(), data)
    }

    /// Inverse via LU; fails with [`Error::SingularMatrix`] like [`lu_solve`].
    pub fn inverse(&self) -> Result<Self> {
        lu_solve(self, &Self::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for x in self.row(i) {
                write!(f, "{x:>14.6e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

/// LU factors with row permutation. Zero pivots are recorded, not rejected.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn factor(a: &Matrix) -> Self {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap_or(k);
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            if pivot == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Self { n, lu, perm, sign }
    }

    fn min_pivot(&self) -> f64 {
        (0..self.n)
            .map(|i| self.lu[i * self.n + i].abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn determinant(&self) -> f64 {
        (0..self.n).fold(self.sign, |d, i| d * self.lu[i * self.n + i])
    }

    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.n;
        let mut x = Matrix::zeros(n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
                y[i] -= s;
            }
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * y[j]).sum();
                y[i] = (y[i] - s) / self.lu[i * n + i];
            }
            for (i, v) in y.into_iter().enumerate() {
                x[(i, c)] = v;
            }
        }
        x
    }
}

/// Solves `A X = B` by partially pivoted LU.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve: A is {}x{}, B is {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let lu = Lu::factor(a);
    let scale = a.max_abs();
    if a.rows > 0 && (scale == 0.0 || lu.min_pivot() < PIVOT_TOL * scale) {
        return Err(Error::SingularMatrix);
    }
    let x = lu.solve(b);
    if !x.all_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(x)
}

/// Solves `A x = b` for a single right-hand side.
pub fn lu_solve_vec(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let x = lu_solve(a, &Matrix::column(b)?)?;
    Ok(x.data)
}

/// Determinant as the signed product of LU pivots; 0 for singular input.
pub fn determinant(a: &Matrix) -> f64 {
    assert!(a.is_square(), "determinant requires a square matrix");
    if a.rows == 0 {
        return 1.0;
    }
    Lu::factor(a).determinant()
}

/// Real parts of all eigenvalues (Hessenberg reduction + shifted QR).
pub fn eig_real_parts(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("eig_real_parts: non-square".into()));
    }
    if a.rows == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(a.to_nalgebra(), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence("eigenvalue QR iteration"))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.re).collect())
}

/// Largest eigenvalue real part.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eig_real_parts(a)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &Matrix) -> Result<bool> {
    Ok(spectral_abscissa(a)? < 0.0)
}

/// Solves `A X + X Aᵀ + Q = 0` through the Kronecker-vectorized linear system.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch("lyapunov_solve".into()));
    }
    let idx = |i: usize, j: usize| i * n + j;
    let mut m = Matrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                m[(row, idx(k, j))] += a[(i, k)];
                m[(row, idx(i, k))] += a[(j, k)];
            }
        }
    }
    let rhs: Vec<f64> = q.data.iter().map(|x| -x).collect();
    let x = lu_solve_vec(&m, &rhs)?;
    Matrix::new(n, n, x)
}

/// `‖AᵀP + PA − P B R⁻¹ Bᵀ P + Q‖_max`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let rinv_bt = lu_solve(r, &b.transpose())?;
    let res = &(&(&(&a.transpose() * p) + &(p * a)) - &(&(p * b) * &(&rinv_bt * p))) + q;
    Ok(res.max_abs())
}

const KLEINMAN_MAX_ITER: usize = 100;

/// Stabilizing solution of the continuous algebraic Riccati equation
/// `AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0` by Kleinman–Newton iteration.
pub fn care_solve(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    let m = b.cols;
    if !a.is_square() || b.rows != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch("care_solve".into()));
    }
    let bt = b.transpose();
    let rinv_bt = lu_solve(r, &bt)?;

    let mut k = stabilizing_gain(a, b)?;
    let mut p = Matrix::zeros(n, n);
    let mut converged = false;
    for iter in 0..KLEINMAN_MAX_ITER {
        let acl = a - &(b * &k);
        let qk = q + &(&(&k.transpose() * r) * &k);
        let p_next = lyapunov_solve(&acl.transpose(), &qk)?.symmetrized();
        let step = (&p_next - &p).max_abs();
        p = p_next;
        k = &rinv_bt * &p;
        log::trace!("kleinman iter {iter}: |dP| = {step:e}");
        if iter > 0 && step <= 1e-13 * (1.0 + p.max_abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        let res = care_residual(a, b, q, r, &p)?;
        if res > 1e-8 {
            return Err(Error::NoConvergence("Kleinman-Newton CARE iteration"));
        }
    }
    Ok(p)
}

/// Initial stabilizing gain for Kleinman iteration.
///
/// Zero when `A` is already Hurwitz. Otherwise the Lyapunov-based (Bass)
/// construction `K = Bᵀ Z⁻¹` with `(A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ`, which
/// places the closed-loop spectrum left of `−β`. The shift starts just past
/// the spectral abscissa (low gain) and grows until the result is Hurwitz.
fn stabilizing_gain(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    let abscissa = spectral_abscissa(a)?;
    if abscissa < 0.0 {
        return Ok(Matrix::zeros(b.cols, n));
    }
    let two_bbt = (b * &b.transpose()).scale(2.0);
    let unit = 1.0_f64.max(a.max_abs());
    let mut margin = 0.1 * unit;
    for _ in 0..12 {
        let beta = abscissa + margin;
        let shifted = &(-a) - &Matrix::identity(n).scale(beta);
        if let Ok(z) = lyapunov_solve(&shifted, &two_bbt) {
            if let Ok(k) = lu_solve(&z.symmetrized(), b).map(|x| x.transpose()) {
                if is_hurwitz(&(a - &(b * &k)))? {
                    return Ok(k);
                }
            }
        }
        margin *= 4.0;
    }
    Err(Error::NotStabilizable)
}

/// Rank by Gaussian elimination with full pivoting, relative tolerance.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let tol = rel_tol * 1.0_f64.max(a.max_abs());
    let (rows, cols) = m.shape();
    let mut r = 0;
    let mut used_cols = vec![false; cols];
    while r < rows {
        let mut best = (0.0, 0, 0);
        for i in r..rows {
            for (j, used) in used_cols.iter().enumerate() {
                if !used && m[(i, j)].abs() > best.0 {
                    best = (m[(i, j)].abs(), i, j);
                }
            }
        }
        if best.0 <= tol {
            break;
        }
        let (_, pi, pj) = best;
        for j in 0..cols {
            let t = m[(r, j)];
            m[(r, j)] = m[(pi, j)];
            m[(pi, j)] = t;
        }
        used_cols[pj] = true;
        for i in r + 1..rows {
            let f = m[(i, pj)] / m[(r, pj)];
            for j in 0..cols {
                let v = m[(r, j)];
                m[(i, j)] -= f * v;
            }
        }
        r += 1;
    }
    r
}

pub(crate) fn vec_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub(crate) fn vec_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn vec_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
