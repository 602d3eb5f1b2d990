//! Radial covariance kernels over anisotropically scaled distances, plus
//! tensor products of one-dimensional kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::wendland::{wendland_polynomial, PiecewisePolynomial};

/// Per-axis length scales, strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LengthScales(Vec<f64>);

impl LengthScales {
    pub fn new(ell: Vec<f64>) -> Result<Self> {
        if ell.is_empty() {
            return Err(Error::InvalidParameter {
                name: "ell".into(),
                reason: "at least one length scale is required".into(),
            });
        }
        for (i, &l) in ell.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidParameter {
                    name: format!("ell[{i}]"),
                    reason: format!("length scales must be positive and finite, got {l}"),
                });
            }
        }
        Ok(LengthScales(ell))
    }

    pub fn isotropic(ell: f64, dim: usize) -> Result<Self> {
        Self::new(vec![ell; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LengthScales {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LengthScales::new(v)
    }
}

impl From<LengthScales> for Vec<f64> {
    fn from(l: LengthScales) -> Vec<f64> {
        l.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Matern,
    Wendland,
    Gaussian,
}

/// A radial kernel: family, smoothness level and per-axis length scales.
///
/// `smoothness` is ignored by the Gaussian family. The Wendland profile is
/// kept exactly as constructed, i.e. not rescaled to one at the origin, so
/// the diagonal of its Gram matrix is `φ(0) ≠ 1` in general.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(rename = "s")]
    pub smoothness: u32,
    pub ell: LengthScales,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        smoothness: u32,
        ell: LengthScales,
        dim: usize,
    ) -> Result<Self> {
        let spec = KernelSpec {
            family,
            smoothness,
            ell,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn univariate(family: KernelFamily, smoothness: u32, ell: f64) -> Result<Self> {
        Self::new(family, smoothness, LengthScales::new(vec![ell])?, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim".into(),
                reason: "dimension must be at least 1".into(),
            });
        }
        if self.ell.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "kernel length scales",
                expected: self.dim,
                got: self.ell.len(),
            });
        }
        Ok(())
    }

    /// Precompute the radial profile for repeated evaluation.
    pub fn radial(&self) -> RadialProfile {
        match self.family {
            KernelFamily::Matern => RadialProfile::Matern {
                s: self.smoothness,
                coeffs: matern_coefficients(self.smoothness),
                rate: (2.0 * self.smoothness as f64 + 1.0).sqrt(),
            },
            KernelFamily::Wendland => {
                RadialProfile::Wendland(wendland_polynomial(self.dim as u32, self.smoothness))
            }
            KernelFamily::Gaussian => RadialProfile::Gaussian,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let r = self.radial();
        let z = scaled_distance(x, y, &self.ell)?;
        Ok(r.eval(z))
    }
}

/// Evaluation-ready radial profile.
#[derive(Clone, Debug)]
pub enum RadialProfile {
    Matern {
        s: u32,
        /// Polynomial coefficients of the pre-exponential factor in powers
        /// of `2·sqrt(2s+1)·z`.
        coeffs: Vec<f64>,
        rate: f64,
    },
    Wendland(PiecewisePolynomial),
    Gaussian,
}

impl RadialProfile {
    pub fn eval(&self, z: f64) -> f64 {
        self.eval_in::<f64>(&z)
    }

    pub fn eval_in<T: Real>(&self, z: &T) -> T {
        match self {
            RadialProfile::Matern { coeffs, rate, .. } => {
                let t = z.mul(&T::of(2.0 * rate)); // 2·sqrt(2s+1)·z
                let mut poly = T::zero();
                for c in coeffs.iter().rev() {
                    poly = poly.mul(&t).add(&T::of(*c));
                }
                let decay = z.mul(&T::of(*rate)).neg().exp();
                poly.mul(&decay)
            }
            RadialProfile::Wendland(p) => p.eval_in(z),
            RadialProfile::Gaussian => z.mul(z).neg().exp(),
        }
    }
}

/// `sqrt(Σ (x_i - y_i)² / ℓ_i²)`.
pub fn scaled_distance(x: &[f64], y: &[f64], ell: &LengthScales) -> Result<f64> {
    if x.len() != ell.len() {
        return Err(Error::DimensionMismatch {
            context: "scaled distance",
            expected: ell.len(),
            got: x.len(),
        });
    }
    if y.len() != ell.len() {
        return Err(Error::DimensionMismatch {
            context: "scaled distance",
            expected: ell.len(),
            got: y.len(),
        });
    }
    let mut sum = 0.0;
    for i in 0..x.len() {
        let d = (x[i] - y[i]) / ell.as_slice()[i];
        sum += d * d;
    }
    Ok(sum.sqrt())
}

pub fn scaled_distance_in<T: Real>(x: &[T], y: &[T], ell: &LengthScales) -> T {
    let mut sum = T::zero();
    for i in 0..x.len() {
        let d = x[i].sub(&y[i]).div(&T::of(ell.as_slice()[i]));
        sum = sum.add(&d.mul(&d));
    }
    sum.sqrt()
}

/// Pre-exponential polynomial coefficients of the Matérn profile: the
/// radial function is `exp(-sqrt(2s+1) z) · (s!/(2s)!) · Σ_i [(s+i)!/(i!(s-i)!)] u^{s-i}`
/// with `u = 2 sqrt(2s+1) z`; index the result by the power of `u`.
fn matern_coefficients(s: u32) -> Vec<f64> {
    let s = s as i64;
    let fact = |n: i64| -> f64 { (1..=n).map(|k| k as f64).product::<f64>().max(1.0) };
    let lead = fact(s) / fact(2 * s);
    let mut coeffs = vec![0.0; s as usize + 1];
    for i in 0..=s {
        let c = fact(s + i) / (fact(i) * fact(s - i));
        coeffs[(s - i) as usize] = lead * c;
    }
    coeffs
}

/// Matérn radial function at smoothness level `s`; equals one at `z = 0`.
pub fn matern_radial(z: f64, s: u32) -> f64 {
    KernelSpec {
        family: KernelFamily::Matern,
        smoothness: s,
        ell: LengthScales(vec![1.0]),
        dim: 1,
    }
    .radial()
    .eval(z)
}

/// Wendland radial function; zero for `z ≥ 1`, unnormalized at the origin.
pub fn wendland_radial(z: f64, d: u32, s: u32) -> f64 {
    wendland_polynomial(d, s).eval(z)
}

/// Covariance model for the normalised error: a single radial kernel on
/// the full fidelity vector, or a product of one-dimensional kernels with
/// separately chosen families, smoothness and length scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kernel {
    Product { product: Vec<KernelSpec> },
    Radial(KernelSpec),
}

impl Kernel {
    pub fn radial(spec: KernelSpec) -> Self {
        Kernel::Radial(spec)
    }

    pub fn product(axes: Vec<KernelSpec>) -> Result<Self> {
        for (i, spec) in axes.iter().enumerate() {
            if spec.dim != 1 {
                return Err(Error::InvalidParameter {
                    name: format!("product[{i}]"),
                    reason: "tensor-product factors must be one-dimensional".into(),
                });
            }
            spec.validate()?;
        }
        if axes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "product".into(),
                reason: "at least one factor is required".into(),
            });
        }
        Ok(Kernel::Product { product: axes })
    }

    pub fn dim(&self) -> usize {
        match self {
            Kernel::Radial(spec) => spec.dim,
            Kernel::Product { product } => product.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Radial(spec) => spec.validate(),
            Kernel::Product { product } => Kernel::product(product.clone()).map(|_| ()),
        }
    }

    pub fn evaluator(&self) -> KernelEval {
        match self {
            Kernel::Radial(spec) => KernelEval::Radial {
                profile: spec.radial(),
                ell: spec.ell.clone(),
            },
            Kernel::Product { product } => KernelEval::Product {
                profiles: product.iter().map(|s| s.radial()).collect(),
                ells: product.iter().map(|s| s.ell.as_slice()[0]).collect(),
            },
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "kernel evaluation",
                expected: self.dim(),
                got: if x.len() != self.dim() {
                    x.len()
                } else {
                    y.len()
                },
            });
        }
        Ok(self.evaluator().eval(x, y))
    }
}

/// Precompiled evaluator for hot loops.
#[derive(Clone, Debug)]
pub enum KernelEval {
    Radial {
        profile: RadialProfile,
        ell: LengthScales,
    },
    Product {
        profiles: Vec<RadialProfile>,
        ells: Vec<f64>,
    },
}

impl KernelEval {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelEval::Radial { profile, ell } => {
                let z = scaled_distance(x, y, ell).expect("dimension checked by caller");
                profile.eval(z)
            }
            KernelEval::Product { profiles, ells } => {
                let mut prod = 1.0;
                for i in 0..profiles.len() {
                    let z = (x[i] - y[i]).abs() / ells[i];
                    prod *= profiles[i].eval(z);
                }
                prod
            }
        }
    }

    pub fn eval_in<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match self {
            KernelEval::Radial { profile, ell } => {
                let z = scaled_distance_in(x, y, ell);
                profile.eval_in(&z)
            }
            KernelEval::Product { profiles, ells } => {
                let mut prod = T::one();
                for i in 0..profiles.len() {
                    let z = x[i].sub(&y[i]).abs().div(&T::of(ells[i]));
                    prod = prod.mul(&profiles[i].eval_in(&z));
                }
                prod
            }
        }
    }
}
