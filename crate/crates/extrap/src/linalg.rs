//! Dense symmetric solves, generic over the scalar type.
//!
//! Matrices here are tiny (fidelity designs have at most a few tens of
//! points), so a plain row-major `Vec` with an unblocked Cholesky is both
//! adequate and easy to run in extended precision.

use crate::real::Real;

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct SquareMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SquareMatrix { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    pub n: usize,
    l: Vec<T>, // row-major, upper part unused
}

impl<T: Real> Cholesky<T> {
    /// Factor `a`; `None` if a pivot is not strictly positive.
    pub fn new(a: &SquareMatrix<T>) -> Option<Self> {
        let n = a.n;
        metrics::record_factorization(n);
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a.at(i, j).clone();
                for k in 0..j {
                    sum = sum.sub(&l[i * n + k].mul(&l[j * n + k]));
                }
                if i == j {
                    if !(sum > T::zero()) || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + j] = sum.sqrt();
                } else {
                    l[i * n + j] = sum.div(&l[j * n + j]);
                }
            }
        }
        Some(Cholesky { n, l })
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> &T {
        &self.l[i * self.n + j]
    }

    /// Solve `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut sum = b[i].clone();
            for (k, yk) in y.iter().enumerate().take(i) {
                sum = sum.sub(&self.l[i * n + k].mul(yk));
            }
            y.push(sum.div(&self.l[i * n + i]));
        }
        y
    }

    /// Solve `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut sum = x[i].clone();
            for k in (i + 1)..n {
                sum = sum.sub(&self.l[k * n + i].mul(&x[k]));
            }
            x[i] = sum.div(&self.l[i * n + i]);
        }
        x
    }

    /// Solve `A x = b` through the factorization.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s = s.add(&self.l[i * self.n + i].ln());
        }
        s.add(&s.clone())
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s = s.add(&x.mul(y));
    }
    s
}

/// Factorization-size log, used by tests to assert that grid fits never
/// materialize the full product-size system.
pub mod metrics {
    use std::cell::RefCell;

    thread_local! {
        static FACTORIZATION_DIMS: RefCell<Vec<usize>> = const { RefCell::new(Vec::new()) };
    }

    pub(super) fn record_factorization(n: usize) {
        FACTORIZATION_DIMS.with(|d| d.borrow_mut().push(n));
    }

    pub fn reset() {
        FACTORIZATION_DIMS.with(|d| d.borrow_mut().clear());
    }

    /// Dimensions of every factorization performed on this thread since the
    /// last [`reset`].
    pub fn factorization_dims() -> Vec<usize> {
        FACTORIZATION_DIMS.with(|d| d.borrow().clone())
    }
}
