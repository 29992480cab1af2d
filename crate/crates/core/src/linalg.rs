//! Small dense linear-algebra kernels: plane rotations, triangular solves,
//! Cholesky factorization. Row-major storage throughout.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity_scaled(n: usize, diag: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scale(&mut self, k: T) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// `self · x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            axpy(xr, self.row(r), &mut out);
        }
        out
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.rows).all(|r| (0..r.min(self.cols)).all(|c| self[(r, c)] == T::zero()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha · x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Plane rotation mapping `(a, b)` onto `(r, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Givens<T> {
    pub c: T,
    pub s: T,
    pub r: T,
}

impl<T: Scalar> Givens<T> {
    /// With `a >= 0` the resulting `r` and `c` are nonnegative.
    pub fn annihilate(a: T, b: T) -> Self {
        if b == T::zero() {
            return Self {
                c: if a < T::zero() { -T::one() } else { T::one() },
                s: T::zero(),
                r: a.abs(),
            };
        }
        let r = a.hypot(b);
        Self {
            c: a / r,
            s: b / r,
            r,
        }
    }

    /// Rotates the pair `(x, y)`; `(a, b)` itself maps to `(r, 0)`.
    #[inline]
    pub fn apply(&self, x: T, y: T) -> (T, T) {
        (self.c * x + self.s * y, self.c * y - self.s * x)
    }
}

/// Solves `R x = z` for upper-triangular `R`. Returns `None` when a diagonal
/// entry is zero or negligible relative to the largest one.
pub fn back_substitute<T: Scalar>(r: &Matrix<T>, z: &[T]) -> Option<Vec<T>> {
    let n = r.rows();
    debug_assert_eq!(r.cols(), n);
    debug_assert_eq!(z.len(), n);
    let max_diag = (0..n).map(|i| r[(i, i)].abs()).fold(T::zero(), T::max);
    if !(max_diag > T::zero()) {
        return None;
    }
    let tol = max_diag * T::epsilon() * T::of(n as f64);
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let d = r[(i, i)];
        if !(d.abs() > tol) {
            return None;
        }
        let row = r.row(i);
        let s = dot(&row[i + 1..], &x[i + 1..]);
        x[i] = (z[i] - s) / d;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// In-place Cholesky factorization of a symmetric positive definite matrix.
/// Only the lower triangle is read; on success it holds `L` with `A = L Lᵀ`.
/// Returns `false` if the matrix is not numerically positive definite.
pub fn cholesky_in_place<T: Scalar>(a: &mut Matrix<T>) -> bool {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    let cols = a.cols();
    let data = a.as_mut_slice();
    for j in 0..n {
        // L[j][k] for k < j are final; finish the diagonal.
        let row_j = &data[j * cols..j * cols + j];
        let d = data[j * cols + j] - dot(row_j, row_j);
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        data[j * cols + j] = ljj;
        for i in j + 1..n {
            let (upper, lower) = data.split_at_mut(i * cols);
            let row_j = &upper[j * cols..j * cols + j];
            let row_i = &mut lower[..cols];
            let s = dot(&row_i[..j], row_j);
            row_i[j] = (row_i[j] - s) / ljj;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` given the factor produced by [`cholesky_in_place`].
pub fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &y[..i]);
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = T::zero();
        for k in i + 1..n {
            s += l[(k, i)] * y[k];
        }
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}
