//! Small dense matrices for proposal covariances and normal priors.
//!
//! Parameter dimension here is k+1+n0, a few dozen at most, so a plain
//! row-major buffer with an unblocked Cholesky covers everything the sampler
//! needs. Nothing in this module is tuned for large matrices.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = R::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Matrix::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[R]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn with_row_capacity(rows: usize, cols: usize) -> Self {
        Matrix {
            rows: 0,
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn column(&self, j: usize) -> Vec<R> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: R) -> Matrix<R> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add_diagonal(&mut self, s: R) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] = self[(i, i)] + s;
        }
    }

    pub fn symmetrized(&self) -> Matrix<R> {
        let half = R::of(0.5);
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    pub fn max_abs_diagonal(&self) -> R {
        let n = self.rows.min(self.cols);
        (0..n).fold(R::zero(), |acc, i| acc.max(self[(i, i)].abs()))
    }

    /// y = M x
    pub fn mul_vec(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(R::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }
}

impl<R> Index<(usize, usize)> for Matrix<R> {
    type Output = R;
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R> IndexMut<(usize, usize)> for Matrix<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<R> {
    lower: Matrix<R>,
}

impl<R: Real> Cholesky<R> {
    /// Factors `m`; fails when `m` is not (numerically) positive definite.
    pub fn new(m: &Matrix<R>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::Dimension {
                what: "cholesky input",
                expected: n,
                actual: m.ncols(),
            });
        }
        let mut lower = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m[(i, j)];
                for k in 0..j {
                    sum = sum - lower[(i, k)] * lower[(j, k)];
                }
                if i == j {
                    if !(sum > R::zero()) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    lower[(i, j)] = sum.sqrt();
                } else {
                    lower[(i, j)] = sum / lower[(j, j)];
                }
            }
        }
        Ok(Cholesky { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Matrix<R> {
        &self.lower
    }

    /// log |M| = 2 sum log L_ii
    pub fn log_det(&self) -> R {
        let two = R::of(2.0);
        (0..self.dim()).fold(R::zero(), |acc, i| acc + self.lower[(i, i)].ln()) * two
    }

    /// Solves M x = b.
    pub fn solve(&self, b: &[R]) -> Vec<R> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // forward: L y = b
        let mut y = vec![R::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self.lower[(i, k)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
        // backward: L' x = y
        let mut x = vec![R::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    /// x' M^{-1} x via one triangular solve.
    pub fn inv_quadratic_form(&self, x: &[R]) -> R {
        let n = self.dim();
        let mut y = vec![R::zero(); n];
        let mut q = R::zero();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.lower[(i, k)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
            q = q + y[i] * y[i];
        }
        q
    }

    pub fn inverse(&self) -> Matrix<R> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![R::zero(); n];
        for j in 0..n {
            e[j] = R::one();
            let col = self.solve(&e);
            e[j] = R::zero();
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }

    /// x = mean + L z for standard-normal z.
    pub fn affine(&self, mean: &[R], z: &[R], out: &mut [R]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = mean[i];
            for k in 0..=i {
                s = s + self.lower[(i, k)] * z[k];
            }
            out[i] = s;
        }
    }
}

/// Sample covariance (denominator m-1) of the rows of `draws`.
pub fn sample_covariance<R: Real>(draws: &Matrix<R>) -> Matrix<R> {
    let m = draws.nrows();
    let d = draws.ncols();
    assert!(m >= 2, "sample covariance needs at least two rows");
    let mf = R::of(m as f64);
    let mut mean = vec![R::zero(); d];
    for i in 0..m {
        for (j, mj) in mean.iter_mut().enumerate() {
            *mj = *mj + draws[(i, j)];
        }
    }
    for mj in &mut mean {
        *mj = *mj / mf;
    }
    let denom = R::of((m - 1) as f64);
    let mut cov = Matrix::zeros(d, d);
    for i in 0..m {
        for j in 0..d {
            let cj = draws[(i, j)] - mean[j];
            for k in j..d {
                let ck = draws[(i, k)] - mean[k];
                cov[(j, k)] = cov[(j, k)] + cj * ck;
            }
        }
    }
    for j in 0..d {
        for k in j..d {
            let v = cov[(j, k)] / denom;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }
    cov
}

/// Multivariate normal log-density with normalizing constant.
pub fn mvn_log_density<R: Real>(x: &[R], mean: &[R], chol: &Cholesky<R>) -> R {
    let n = x.len();
    let diff: Vec<R> = x.iter().zip(mean).map(|(&a, &b)| a - b).collect();
    let q = chol.inv_quadratic_form(&diff);
    let ln_2pi = R::of((2.0 * std::f64::consts::PI).ln());
    let half = R::of(0.5);
    -half * (R::of(n as f64) * ln_2pi + chol.log_det() + q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_solve_and_inverse_roundtrip() {
        let m = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ]);
        let chol = Cholesky::new(&m).unwrap();
        let b = vec![1.0, -2.0, 0.7];
        let x = chol.solve(&b);
        let back = m.mul_vec(&x);
        for (bi, ri) in b.iter().zip(&back) {
            assert_relative_eq!(bi, ri, max_relative = 1e-12);
        }
        let inv = chol.inverse();
        let prod = Matrix::from_fn(3, 3, |i, j| {
            (0..3).fold(0.0, |acc, k| acc + m[(i, k)] * inv[(k, j)])
        });
        for i in 0..3 {
            for j in 0..3 {
                let want: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(Cholesky::new(&m), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues_for_diagonal() {
        let m = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]);
        let chol = Cholesky::new(&m).unwrap();
        assert_relative_eq!(chol.log_det(), 36.0_f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn sample_covariance_of_known_rows() {
        let draws = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]]);
        let cov = sample_covariance(&draws);
        assert_relative_eq!(cov[(0, 0)], 4.0, max_relative = 1e-14);
        assert_relative_eq!(cov[(0, 1)], 7.0, max_relative = 1e-14);
        assert_relative_eq!(cov[(1, 1)], 13.0, max_relative = 1e-13);
    }

    #[test]
    fn mvn_log_density_standard_normal() {
        let chol = Cholesky::new(&Matrix::identity(2)).unwrap();
        let lp = mvn_log_density(&[0.0, 0.0], &[0.0, 0.0], &chol);
        assert_relative_eq!(lp, -(2.0 * std::f64::consts::PI).ln(), max_relative = 1e-14);
    }

    #[test]
    fn quadratic_form_agrees_with_solve() {
        let m = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]);
        let chol = Cholesky::new(&m).unwrap();
        let x = vec![0.7, -1.1];
        let solved = chol.solve(&x);
        let direct: f64 = x.iter().zip(&solved).map(|(a, b)| a * b).sum();
        assert_relative_eq!(chol.inv_quadratic_form(&x), direct, max_relative = 1e-12);
    }
}
