//! Minimal dense linear algebra for the small systems this crate solves.
//!
//! Search-space dimensions are single digits and mixture components stay in
//! the dozens, so a plain row-major matrix with Cholesky and cyclic Jacobi
//! covers everything: density factorization, quadratic forms, eigenvalue
//! floors, confidence ellipsoids, kernel draws, and normal-equation solves.

use crate::{Error, Result, Scalar};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    /// Builds an `n x n` matrix from a row-major slice.
    pub fn from_rows(rows: usize, cols: usize, data: &[F]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn diagonal(diag: &[F]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
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

    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<F> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Max absolute asymmetry, zero for exactly symmetric matrices.
    pub fn asymmetry(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Averages off-diagonal pairs in place.
    pub fn symmetrize(&mut self) {
        let half = F::of(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Lower-triangular Cholesky factor, or `None` if the matrix is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<Matrix<F>> {
        assert!(self.is_square(), "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d <= F::zero() || !d.is_finite() {
                return None;
            }
            let dj = d.sqrt();
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / dj;
            }
        }
        Some(l)
    }

    /// Solves `L y = b` for lower-triangular `L` (this matrix).
    pub fn solve_lower(&self, b: &[F]) -> Vec<F> {
        let n = self.rows;
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - self[(i, k)] * y[k];
            }
            y[i] = s / self[(i, i)];
        }
        y
    }

    /// Solves `L^T x = y` for lower-triangular `L` (this matrix).
    pub fn solve_lower_transpose(&self, y: &[F]) -> Vec<F> {
        let n = self.rows;
        let mut x = vec![F::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self[(k, i)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Log-determinant of `A = L L^T` given this lower factor `L`.
    pub fn log_det_from_cholesky(&self) -> F {
        let two = F::of(2.0);
        (0..self.rows).map(|i| self[(i, i)].ln()).sum::<F>() * two
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching eigenvectors
    /// as columns of an orthogonal matrix.
    pub fn sym_eigen(&self) -> (Vec<F>, Matrix<F>) {
        assert!(self.is_square(), "sym_eigen needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = Matrix::identity(n);
        let eps = F::of(1e-30);

        for _sweep in 0..100 {
            let mut off = F::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off <= eps {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() <= F::of(1e-300) {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (F::of(2.0) * a[(p, q)]);
                    // Smaller-magnitude root keeps rotations stable.
                    let t = {
                        let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                        sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                    };
                    let c = F::one() / (t * t + F::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .expect("eigenvalues are comparable")
        });
        let values: Vec<F> = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (new_j, &old_j) in order.iter().enumerate() {
            for i in 0..n {
                vectors[(i, new_j)] = v[(i, old_j)];
            }
        }
        (values, vectors)
    }
}

impl<F: Scalar> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves the symmetric positive-definite system `A x = b` via Cholesky.
pub fn solve_spd<F: Scalar>(a: &Matrix<F>, b: &[F]) -> Result<Vec<F>> {
    let l = a.cholesky().ok_or(Error::FactorizationFailed)?;
    let y = l.solve_lower(b);
    Ok(l.solve_lower_transpose(&y))
}

/// Rebuilds `V diag(values) V^T`.
pub fn reconstruct_symmetric<F: Scalar>(values: &[F], vectors: &Matrix<F>) -> Matrix<F> {
    let n = values.len();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = F::zero();
            for k in 0..n {
                s += vectors[(i, k)] * values[k] * vectors[(j, k)];
            }
            out[(i, j)] = s;
        }
    }
    out.symmetrize();
    out
}
