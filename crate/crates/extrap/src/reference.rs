//! Reference posteriors computed from a proper prior with a large but
//! finite level variance `k0²`.
//!
//! These condition the dense covariance directly through standard GP
//! formulas, with none of the factored shortcuts used by the fast path,
//! and exist to validate that the flat-limit code equals the `k0² → ∞`
//! limit. They are deliberately slow and are not exposed on the CLI.

use nalgebra::{DMatrix, DVector};

use crate::bound::ErrorBound;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::Model;
use crate::kernel::{Kernel, KernelEval};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::real::Real;

/// Dense conditioning of the proper prior `σ²(k0² + k_b)`.
pub struct FiniteK0Posterior {
    dataset: Dataset,
    bound: ErrorBound,
    evaluator: KernelEval,
    k0sq: f64,
    sigma2: f64,
    kinv: DMatrix<f64>,
    kinv_f: DVector<f64>,
}

pub fn finite_k0_posterior(
    dataset: &Dataset,
    model: &Model,
    k0sq: f64,
    sigma2: f64,
) -> Result<FiniteK0Posterior> {
    dataset.validate()?;
    model.validate(dataset.dim())?;
    if !(k0sq > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "k0sq/sigma2".into(),
            reason: "must be positive".into(),
        });
    }
    let evaluator = model.kernel.evaluator();
    let n = dataset.len();
    let b: Vec<f64> = dataset.points.iter().map(|p| model.bound.eval(p)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        sigma2 * (k0sq + b[i] * b[j] * evaluator.eval(&dataset.points[i], &dataset.points[j]))
    });
    let kinv = k
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| k.try_inverse())
        .ok_or_else(|| Error::DegenerateBasis("finite-k0 covariance is singular".into()))?;
    let f = DVector::from_vec(dataset.values.clone());
    let kinv_f = &kinv * f;
    Ok(FiniteK0Posterior {
        dataset: dataset.clone(),
        bound: model.bound.clone(),
        evaluator,
        k0sq,
        sigma2,
        kinv,
        kinv_f,
    })
}

impl FiniteK0Posterior {
    fn kvec(&self, x: &[f64]) -> DVector<f64> {
        let bx = self.bound.eval(x);
        DVector::from_fn(self.dataset.len(), |i, _| {
            self.sigma2
                * (self.k0sq
                    + self.bound.eval(&self.dataset.points[i])
                        * bx
                        * self.evaluator.eval(&self.dataset.points[i], x))
        })
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.kvec(x).dot(&self.kinv_f)
    }

    pub fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        let bx = self.bound.eval(x);
        let by = self.bound.eval(y);
        let kxy = self.sigma2 * (self.k0sq + bx * by * self.evaluator.eval(x, y));
        let kx = self.kvec(x);
        let ky = self.kvec(y);
        kxy - (kx.transpose() * &self.kinv * ky)[(0, 0)]
    }

    pub fn mean_at_zero(&self) -> f64 {
        self.mean(&vec![0.0; self.dataset.dim()])
    }

    pub fn var_at_zero(&self) -> f64 {
        let zero = vec![0.0; self.dataset.dim()];
        self.cov(&zero, &zero)
    }
}

/// The same computation at the origin in arbitrary arithmetic, on a unit
/// σ² prior: `mean = k0² 1ᵀ K⁻¹ f`, `var = k0² − k0⁴ 1ᵀ K⁻¹ 1`.
pub fn finite_k0_zero_in<T: Real>(
    points: &[Vec<f64>],
    values: &[f64],
    bound: &ErrorBound,
    kernel: &Kernel,
    k0sq: f64,
) -> Result<(T, T)> {
    let evaluator = kernel.evaluator();
    let n = points.len();
    let pts: Vec<Vec<T>> = points
        .iter()
        .map(|p| p.iter().map(|&c| T::of(c)).collect())
        .collect();
    let b: Vec<T> = pts.iter().map(|p| bound.eval_in(p)).collect();
    let k0 = T::of(k0sq);
    let k = SquareMatrix::from_fn(n, |i, j| {
        k0.add(&b[i].mul(&b[j]).mul(&evaluator.eval_in(&pts[i], &pts[j])))
    });
    let chol = Cholesky::new(&k)
        .ok_or_else(|| Error::DegenerateBasis("finite-k0 covariance is singular".into()))?;
    let f: Vec<T> = values.iter().map(|&v| T::of(v)).collect();
    let ones = vec![T::one(); n];
    let kinv_f = chol.solve(&f);
    let kinv_1 = chol.solve(&ones);
    let mean = k0.mul(&dot(&ones, &kinv_f));
    let var = k0.sub(&k0.mul(&k0).mul(&dot(&ones, &kinv_1)));
    Ok((mean, var))
}

/// Dense tensor-grid reference: conditions the full `(k0² + k_b) ⊗ k_T`
/// covariance over all `n1·n2` grid cells at once.
pub struct DenseGridPosterior<T: Real> {
    x_points: Vec<Vec<T>>,
    t_points: Vec<T>,
    bound: ErrorBound,
    b: Vec<T>,
    eval_x: KernelEval,
    eval_t: KernelEval,
    k0sq: T,
    chol: Cholesky<T>,
    kinv_f: Vec<T>,
}

impl<T: Real> DenseGridPosterior<T> {
    /// `values` in row-major order: entry `(i, j)` is the observation at
    /// `(x_i, t_j)`.
    pub fn new(
        x_points: &[Vec<f64>],
        t_points: &[f64],
        values: &[f64],
        bound: &ErrorBound,
        kernel_x: &Kernel,
        kernel_t: &Kernel,
        k0sq: f64,
    ) -> Result<Self> {
        let n1 = x_points.len();
        let n2 = t_points.len();
        if values.len() != n1 * n2 {
            return Err(Error::InvalidData(format!(
                "grid values: expected {} entries, got {}",
                n1 * n2,
                values.len()
            )));
        }
        let eval_x = kernel_x.evaluator();
        let eval_t = kernel_t.evaluator();
        let xs: Vec<Vec<T>> = x_points
            .iter()
            .map(|p| p.iter().map(|&c| T::of(c)).collect())
            .collect();
        let ts: Vec<T> = t_points.iter().map(|&t| T::of(t)).collect();
        let b: Vec<T> = xs.iter().map(|p| bound.eval_in(p)).collect();
        let k0 = T::of(k0sq);
        let k = SquareMatrix::from_fn(n1 * n2, |r, c| {
            let (i, j) = (r / n2, r % n2);
            let (p, q) = (c / n2, c % n2);
            let kx = k0.add(&b[i].mul(&b[p]).mul(&eval_x.eval_in(&xs[i], &xs[p])));
            let kt = eval_t.eval_in(std::slice::from_ref(&ts[j]), std::slice::from_ref(&ts[q]));
            kx.mul(&kt)
        });
        let chol = Cholesky::new(&k)
            .ok_or_else(|| Error::DegenerateBasis("dense grid covariance is singular".into()))?;
        let f: Vec<T> = values.iter().map(|&v| T::of(v)).collect();
        let kinv_f = chol.solve(&f);
        Ok(DenseGridPosterior {
            x_points: xs,
            t_points: ts,
            bound: bound.clone(),
            b,
            eval_x,
            eval_t,
            k0sq: k0,
            chol,
            kinv_f,
        })
    }

    /// Prior cross-covariances between `(x, t_{t_idx})` and every grid cell.
    fn kvec(&self, x: &[T], t_idx: usize) -> Vec<T> {
        let bx = self.bound.eval_in(x);
        let n2 = self.t_points.len();
        let mut v = Vec::with_capacity(self.b.len() * n2);
        for (i, xi) in self.x_points.iter().enumerate() {
            let kx = self
                .k0sq
                .add(&self.b[i].mul(&bx).mul(&self.eval_x.eval_in(xi, x)));
            for j in 0..n2 {
                let kt = self.eval_t.eval_in(
                    std::slice::from_ref(&self.t_points[j]),
                    std::slice::from_ref(&self.t_points[t_idx]),
                );
                v.push(kx.mul(&kt));
            }
        }
        v
    }

    /// Conditional mean at `(x, t_{t_idx})` for a training index `t_idx`.
    pub fn mean(&self, x: &[f64], t_idx: usize) -> T {
        let xt: Vec<T> = x.iter().map(|&c| T::of(c)).collect();
        dot(&self.kvec(&xt, t_idx), &self.kinv_f)
    }

    /// Conditional covariance between `(x, t_i)` and `(y, t_j)` on a unit
    /// σ² prior.
    pub fn cov(&self, x: &[f64], ti: usize, y: &[f64], tj: usize) -> T {
        let xt: Vec<T> = x.iter().map(|&c| T::of(c)).collect();
        let yt: Vec<T> = y.iter().map(|&c| T::of(c)).collect();
        let bx = self.bound.eval_in(&xt);
        let by = self.bound.eval_in(&yt);
        let kxy = self
            .k0sq
            .add(&bx.mul(&by).mul(&self.eval_x.eval_in(&xt, &yt)));
        let ktt = self.eval_t.eval_in(
            std::slice::from_ref(&self.t_points[ti]),
            std::slice::from_ref(&self.t_points[tj]),
        );
        let prior = kxy.mul(&ktt);
        let kx = self.kvec(&xt, ti);
        let ky = self.kvec(&yt, tj);
        let reduction = dot(&kx, &self.chol.solve(&ky));
        prior.sub(&reduction)
    }
}
