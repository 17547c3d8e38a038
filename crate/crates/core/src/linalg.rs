//! Small dense linear algebra for the fitting and geometry pipelines.
//!
//! Everything here targets tiny systems: metric matrices up to 4x4, normal
//! equations for residual fits with at most a handful of parameters. Scalar
//! routines work over any [`Real`]; a separate set of routines runs the same
//! eliminations over jets so that metric inverses and determinants stay
//! differentiable.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::num::{real, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Mat<T> {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Mat<T> {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Mat<T> {
        Mat::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `A^T A` of this matrix, the Gram matrix of its columns.
    pub fn gram(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.cols, |i, j| {
            (0..self.rows).map(|r| self[(r, i)] * self[(r, j)]).sum()
        })
    }

    /// `A^T b`.
    pub fn tr_mul_vec(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.rows);
        (0..self.cols)
            .map(|j| (0..self.rows).map(|r| self[(r, j)] * b[r]).sum())
            .collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky
/// factorization.
///
/// # Errors
/// [`Error::NotPositiveDefinite`] when a pivot is not strictly positive.
pub fn cholesky_solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    // Lower triangular factor, a = L L^T.
    let mut l = Mat::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() {
            return Err(Error::NotPositiveDefinite {
                pivot: d.to_f64().unwrap_or(f64::NAN),
                step: j,
            });
        }
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    // Forward then backward substitution.
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Determinant by LU elimination with partial pivoting.
pub fn det<T: Real>(a: &Mat<T>) -> T {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    let mut result = T::one();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).expect("no NaN pivots")
            })
            .expect("nonempty range");
        if m[(pivot_row, col)] == T::zero() {
            return T::zero();
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot_row, j)];
                m[(pivot_row, j)] = tmp;
            }
            result = -result;
        }
        let pivot = m[(col, col)];
        result = result * pivot;
        for i in (col + 1)..n {
            let factor = m[(i, col)] / pivot;
            for j in col..n {
                let sub = factor * m[(col, j)];
                m[(i, j)] = m[(i, j)] - sub;
            }
        }
    }
    result
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns the
/// eigenvalues and the matrix whose columns are the matching eigenvectors.
pub fn jacobi_eigen<T: Real>(a: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    let mut v = Mat::<T>::identity(n);
    let tol = real::<T>(1e-30);
    let scale: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<T>() + T::one();
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() <= tol * scale {
                    continue;
                }
                // Classic Jacobi rotation annihilating m[p][q].
                let theta = (m[(q, q)] - m[(p, p)]) / (real::<T>(2.0) * m[(p, q)]);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
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
    let values = (0..n).map(|i| m[(i, i)]).collect();
    (values, v)
}

/// Result of a linear least squares fit.
#[derive(Clone, Debug)]
pub struct LsFit<T> {
    pub params: Vec<T>,
    /// Set when the normal equations were rank deficient and the minimum
    /// norm solution was taken instead.
    pub rank_deficient: bool,
}

/// Least squares solution of `design * params ~ rhs` through the normal
/// equations; falls back to an eigenvalue pseudo-inverse (minimum norm
/// solution) when the Gram matrix is numerically singular.
pub fn least_squares<T: Real>(design: &Mat<T>, rhs: &[T]) -> LsFit<T> {
    let gram = design.gram();
    let atb = design.tr_mul_vec(rhs);
    if let Ok(params) = cholesky_solve(&gram, &atb) {
        // Cholesky can succeed on nearly singular systems with huge,
        // meaningless parameters; detect by eigenvalue spread instead.
        let (values, _) = jacobi_eigen(&gram);
        let max = values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let min = values.iter().fold(T::infinity(), |m, &v| m.min(v.abs()));
        if min > max * real::<T>(1e-12) {
            return LsFit { params, rank_deficient: false };
        }
    }
    // Minimum norm pseudo-inverse solution.
    let (values, vectors) = jacobi_eigen(&gram);
    let max = values.iter().fold(T::zero(), |m, &v| m.max(v.abs())) + real::<T>(1e-300);
    let cutoff = max * real::<T>(1e-12);
    let n = gram.rows();
    let mut params = vec![T::zero(); n];
    for k in 0..n {
        if values[k].abs() <= cutoff {
            continue;
        }
        let mut proj = T::zero();
        for i in 0..n {
            proj += vectors[(i, k)] * atb[i];
        }
        let coef = proj / values[k];
        for i in 0..n {
            params[i] += coef * vectors[(i, k)];
        }
    }
    LsFit { params, rank_deficient: true }
}

/// Inverse of a square jet matrix by Gauss-Jordan elimination pivoted on
/// coefficient values.
///
/// # Errors
/// [`Error::IllConditioned`] when no usable pivot value remains.
pub fn jet_mat_inverse<T: Real>(m: &[Vec<Jet<T>>]) -> Result<Vec<Vec<Jet<T>>>> {
    let n = m.len();
    let config = m[0][0].config().clone();
    let mut a: Vec<Vec<Jet<T>>> = m.to_vec();
    let mut inv: Vec<Vec<Jet<T>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(&config, if i == j { T::one() } else { T::zero() }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[j][col].value().abs())
                    .expect("no NaN pivots")
            })
            .expect("nonempty range");
        if a[pivot_row][col].value().abs() < real::<T>(1e-300) {
            return Err(Error::IllConditioned(format!(
                "jet matrix is singular at elimination column {col}"
            )));
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].div(&pivot)?;
            inv[col][j] = inv[col][j].div(&pivot)?;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = a[i][col].clone();
            if factor.value() == T::zero() {
                // Still subtract: higher order coefficients may be nonzero.
                let all_zero = {
                    let f = &factor;
                    let len = f.config().monomials_upto(f.valid_order());
                    (0..len).all(|idx| {
                        let e = f.config().exponent(idx).to_vec();
                        f.coeff(&e).map(|c| c == T::zero()).unwrap_or(false)
                    })
                };
                if all_zero {
                    continue;
                }
            }
            for j in 0..n {
                let sub = factor.mul(&a[col][j])?;
                a[i][j] = a[i][j].sub(&sub)?;
                let sub = factor.mul(&inv[col][j])?;
                inv[i][j] = inv[i][j].sub(&sub)?;
            }
        }
    }
    Ok(inv)
}

/// Determinant of a square jet matrix by elimination on jets.
///
/// # Errors
/// [`Error::IllConditioned`] when a pivot value vanishes while lower rows
/// still carry that column.
pub fn jet_det<T: Real>(m: &[Vec<Jet<T>>]) -> Result<Jet<T>> {
    let n = m.len();
    let config = m[0][0].config().clone();
    let mut a: Vec<Vec<Jet<T>>> = m.to_vec();
    let mut result = Jet::constant(&config, T::one());
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[j][col].value().abs())
                    .expect("no NaN pivots")
            })
            .expect("nonempty range");
        if a[pivot_row][col].value().abs() < real::<T>(1e-300) {
            return Err(Error::IllConditioned(format!(
                "jet determinant pivot vanished at column {col}"
            )));
        }
        if pivot_row != col {
            a.swap(col, pivot_row);
            result = result.neg();
        }
        let pivot = a[col][col].clone();
        result = result.mul(&pivot)?;
        for i in (col + 1)..n {
            let factor = a[i][col].div(&pivot)?;
            for j in col..n {
                let sub = factor.mul(&a[col][j])?;
                a[i][j] = a[i][j].sub(&sub)?;
            }
        }
    }
    Ok(result)
}
