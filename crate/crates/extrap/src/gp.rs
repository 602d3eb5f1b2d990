//! Error-bound-modulated Gaussian-process regression and extrapolation to
//! the zero-discretisation limit.
//!
//! The covariance between observed fidelities is `k_b(x, x') =
//! b(x) b(x') k_e(x, x')`, handled throughout in the factored form
//! `K_b = B K_e B` with `B = diag(b(x_i))`: linear systems are solved
//! against `K_e` and rescaled by `B⁻¹`. Near the origin `b(x_i)` can be
//! ~1e-8, and forming `K_b` directly would square that dynamic range.

use serde::{Deserialize, Serialize};

use crate::bound::ErrorBound;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelEval};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::real::Real;
use crate::stats::normal_quantile;

/// Jitter escalation bounds: relative shifts applied to the diagonal of
/// `K_e` when a factorization fails.
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-8;

/// Prior specification: error bound, normalised-error kernel, and an
/// optional baseline diagonal jitter (relative to the mean diagonal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub bound: ErrorBound,
    pub kernel: Kernel,
    #[serde(default)]
    pub nugget_relative: f64,
}

impl Model {
    pub fn new(bound: ErrorBound, kernel: Kernel) -> Self {
        Model {
            bound,
            kernel,
            nugget_relative: 0.0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.bound.validate(dim)?;
        self.kernel.validate()?;
        if self.kernel.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "model kernel dimension",
                expected: dim,
                got: self.kernel.dim(),
            });
        }
        if !(0.0..=1e-4).contains(&self.nugget_relative) {
            return Err(Error::InvalidParameter {
                name: "nugget_relative".into(),
                reason: format!("must lie in [0, 1e-4], got {}", self.nugget_relative),
            });
        }
        Ok(())
    }
}

/// Factored covariance system: Cholesky of the (jittered) `K_e` Gram
/// matrix together with the bound values `b(x_i)`.
pub(crate) struct FactoredSystem<T> {
    pub chol: Cholesky<T>,
    pub b_vals: Vec<T>,
    pub jitter_used: f64,
}

/// Build the kernel Gram matrix at the given points and factor it,
/// escalating the relative diagonal jitter until the factorization
/// succeeds. Returns the factor and the jitter that was needed.
pub(crate) fn factor_gram<T: Real>(
    points: &[Vec<T>],
    kernel: &KernelEval,
    nugget_relative: f64,
) -> Result<(Cholesky<T>, f64)> {
    let n = points.len();
    let ke = SquareMatrix::from_fn(n, |i, j| kernel.eval_in(&points[i], &points[j]));
    let mut mean_diag = T::zero();
    for i in 0..n {
        mean_diag = mean_diag.add(ke.at(i, i));
    }
    mean_diag = mean_diag.div(&T::of(n as f64));

    let mut lambda = nugget_relative;
    loop {
        let shifted = if lambda == 0.0 {
            ke.clone()
        } else {
            let mut m = ke.clone();
            let shift = mean_diag.mul(&T::of(lambda));
            for i in 0..n {
                let v = m.at(i, i).add(&shift);
                m.set(i, i, v);
            }
            m
        };
        if let Some(chol) = Cholesky::new(&shifted) {
            return Ok((chol, lambda));
        }
        let next = if lambda < JITTER_START {
            JITTER_START
        } else {
            lambda * 10.0
        };
        if next > JITTER_MAX {
            let (i, j, distance) = closest_pair(points, kernel);
            return Err(Error::IllConditioned {
                i,
                j,
                distance,
                max_jitter: JITTER_MAX,
            });
        }
        lambda = next;
    }
}

/// [`factor_gram`] plus the error-bound values `b(x_i)`.
pub(crate) fn factor_system<T: Real>(
    points: &[Vec<T>],
    bound: &ErrorBound,
    kernel: &KernelEval,
    nugget_relative: f64,
) -> Result<FactoredSystem<T>> {
    let (chol, jitter_used) = factor_gram(points, kernel, nugget_relative)?;
    let b_vals = points.iter().map(|p| bound.eval_in(p)).collect();
    Ok(FactoredSystem {
        chol,
        b_vals,
        jitter_used,
    })
}

fn closest_pair<T: Real>(points: &[Vec<T>], kernel: &KernelEval) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let xi: Vec<f64> = points[i].iter().map(Real::to_f64).collect();
            let xj: Vec<f64> = points[j].iter().map(Real::to_f64).collect();
            let d = kernel.scaled_dist(&xi, &xj);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    best
}

impl KernelEval {
    /// Euclidean distance in length-scale units, for conditioning reports.
    pub fn scaled_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let ells: Vec<f64> = match self {
            KernelEval::Radial { ell, .. } => ell.as_slice().to_vec(),
            KernelEval::Product { ells, .. } => ells.clone(),
        };
        x.iter()
            .zip(y)
            .zip(&ells)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Zero-fidelity conditional quantities derived from a factored system.
#[derive(Clone, Debug)]
pub(crate) struct ZeroMoments<T> {
    pub objective: T,
    pub cross: T,
    pub quad: T,
    pub mean: T,
    pub sigma2: T,
    pub var: T,
    /// `K_e⁻¹ u` with `u_i = 1/b(x_i)`; weights are `alpha_i / (b_i · objective)`.
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

pub(crate) fn zero_moments<T: Real>(sys: &FactoredSystem<T>, values: &[T]) -> ZeroMoments<T> {
    let n = values.len();
    let u: Vec<T> = sys.b_vals.iter().map(|b| T::one().div(b)).collect();
    let g: Vec<T> = values
        .iter()
        .zip(&sys.b_vals)
        .map(|(f, b)| f.div(b))
        .collect();
    let alpha = sys.chol.solve(&u);
    let beta = sys.chol.solve(&g);
    let objective = dot(&u, &alpha);
    let cross = dot(&u, &beta);
    let quad = dot(&g, &beta);
    let mean = cross.div(&objective);
    let mut sigma2 = quad
        .sub(&cross.mul(&cross).div(&objective))
        .div(&T::of(n as f64));
    if sigma2 < T::zero() {
        sigma2 = T::zero();
    }
    let var = sigma2.div(&objective);
    ZeroMoments {
        objective,
        cross,
        quad,
        mean,
        sigma2,
        var,
        alpha,
        beta,
    }
}

/// Fitted posterior: extrapolated value, calibrated scale, and a
/// factorization handle for predictions away from the origin.
pub struct Posterior {
    pub dataset: Dataset,
    pub model: Model,
    pub weights: Vec<f64>,
    pub mean_at_zero: f64,
    pub var_at_zero: f64,
    pub sigma2: f64,
    /// `1ᵀ K_b⁻¹ 1`, the design objective of the fitted dataset.
    pub objective: f64,
    /// Relative diagonal jitter that was required, zero when none.
    pub jitter_used: f64,
    /// Single observation: defined but carries no spread information.
    pub degenerate: bool,
    chol: Cholesky<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    evaluator: KernelEval,
}

/// Condition the flat-limit model on a dataset.
pub fn fit(dataset: &Dataset, model: &Model) -> Result<Posterior> {
    dataset.validate()?;
    model.validate(dataset.dim())?;
    let evaluator = model.kernel.evaluator();
    let sys = factor_system(
        &dataset.points,
        &model.bound,
        &evaluator,
        model.nugget_relative,
    )?;
    let moments = zero_moments(&sys, &dataset.values);
    let weights: Vec<f64> = moments
        .alpha
        .iter()
        .zip(&sys.b_vals)
        .map(|(a, b)| a / (b * moments.objective))
        .collect();
    let gamma: Vec<f64> = moments
        .beta
        .iter()
        .zip(&moments.alpha)
        .map(|(be, al)| be - moments.mean * al)
        .collect();
    Ok(Posterior {
        degenerate: dataset.len() == 1,
        weights,
        mean_at_zero: moments.mean,
        var_at_zero: moments.var,
        sigma2: moments.sigma2,
        objective: moments.objective,
        jitter_used: sys.jitter_used,
        chol: sys.chol,
        alpha: moments.alpha,
        gamma,
        evaluator,
        dataset: dataset.clone(),
        model: model.clone(),
    })
}

impl Posterior {
    /// Conditional mean and variance at a new fidelity vector
    /// (componentwise nonnegative; the origin gives the extrapolated value).
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dataset.dim() {
            return Err(Error::DimensionMismatch {
                context: "prediction point",
                expected: self.dataset.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "x".into(),
                reason: "prediction points must be componentwise nonnegative and finite".into(),
            });
        }
        let xt: Vec<f64> = x.to_vec();
        let kx: Vec<f64> = self
            .dataset
            .points
            .iter()
            .map(|p| self.evaluator.eval(p, &xt))
            .collect();
        let b_x = self.model.bound.eval(x);
        let mean = self.mean_at_zero + b_x * dot(&kx, &self.gamma);

        let v = self.chol.solve(&kx);
        let k_xx = self.evaluator.eval(&xt, &xt);
        let explained = b_x * b_x * (k_xx - dot(&kx, &v));
        let s = b_x * dot(&kx, &self.alpha);
        let level = (s - 1.0) * (s - 1.0) / self.objective;
        let var = (self.sigma2 * (explained + level)).max(0.0);
        Ok((mean, var))
    }

    pub fn credible_interval(&self, alpha: f64) -> Result<CredibleInterval> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha".into(),
                reason: format!("must lie in (0, 1], got {alpha}"),
            });
        }
        let q = if alpha == 1.0 {
            0.0
        } else {
            normal_quantile(1.0 - alpha / 2.0)
        };
        let sd = self.var_at_zero.sqrt();
        Ok(CredibleInterval {
            alpha,
            lo: self.mean_at_zero - q * sd,
            hi: self.mean_at_zero + q * sd,
            degenerate: self.var_at_zero == 0.0,
        })
    }

    pub fn summary(&self, alpha: f64) -> Result<PosteriorSummary> {
        let interval = self.credible_interval(alpha)?;
        Ok(PosteriorSummary {
            mean_at_zero: self.mean_at_zero,
            sd_at_zero: self.var_at_zero.sqrt(),
            sigma2: self.sigma2,
            objective: self.objective,
            weights: self.weights.clone(),
            interval,
        })
    }
}

/// Central credible interval at the origin. `degenerate` marks a
/// zero-variance posterior collapsing to the point `{mean}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean_at_zero: f64,
    pub sd_at_zero: f64,
    pub sigma2: f64,
    pub objective: f64,
    pub weights: Vec<f64>,
    pub interval: CredibleInterval,
}

/// `K_b` in both plain and diagonal-factored form, mainly for oracles and
/// diagnostics; fitting itself never forms the product.
pub struct KbMatrices {
    pub kb: SquareMatrix<f64>,
    pub b_diag: Vec<f64>,
    pub ke: SquareMatrix<f64>,
}

pub fn build_kb(dataset: &Dataset, model: &Model) -> Result<KbMatrices> {
    dataset.validate()?;
    model.validate(dataset.dim())?;
    let evaluator = model.kernel.evaluator();
    let n = dataset.len();
    let b_diag: Vec<f64> = dataset.points.iter().map(|p| model.bound.eval(p)).collect();
    let ke = SquareMatrix::from_fn(n, |i, j| {
        evaluator.eval(&dataset.points[i], &dataset.points[j])
    });
    let kb = SquareMatrix::from_fn(n, |i, j| b_diag[i] * b_diag[j] * ke.at(i, j));
    Ok(KbMatrices { kb, b_diag, ke })
}
