//! Compactly supported polynomial radial functions.
//!
//! The family is generated from the truncated power `(1-z)_+^m` by
//! repeatedly applying the integral operator `(Iφ)(z) = ∫_z^∞ t φ(t) dt`.
//! The iteration is carried out symbolically on rational coefficients, so
//! any smoothness level in the tested range is produced without hard-coded
//! closed forms. Coefficients are promoted to floating point only at
//! evaluation time.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::real::Real;

/// Polynomial segments on consecutive intervals, zero beyond the last
/// breakpoint. Coefficients are in the monomial basis, ascending degree.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial {
    /// Ascending breakpoints; segment `k` covers `[breakpoints[k], breakpoints[k+1])`.
    pub breakpoints: Vec<BigRational>,
    pub segments: Vec<Vec<BigRational>>,
}

impl PiecewisePolynomial {
    /// The single-segment polynomial `(1 - z)^m` on `[0, 1]`.
    pub fn truncated_power(m: u32) -> Self {
        // Binomial expansion of (1 - z)^m.
        let mut coeffs = vec![BigRational::zero(); m as usize + 1];
        let mut binom = BigInt::one();
        for (k, c) in coeffs.iter_mut().enumerate() {
            let sign = if k % 2 == 0 {
                BigInt::one()
            } else {
                -BigInt::one()
            };
            *c = BigRational::from_integer(sign * &binom);
            binom = &binom * BigInt::from(m as i64 - k as i64) / BigInt::from(k as i64 + 1);
        }
        PiecewisePolynomial {
            breakpoints: vec![BigRational::zero(), BigRational::one()],
            segments: vec![coeffs],
        }
    }

    /// Apply `(Iφ)(z) = ∫_z^∞ t φ(t) dt` exactly. The function is zero past
    /// the last breakpoint, so the upper limit collapses there.
    pub fn integral_operator(&self) -> Self {
        let m = self.segments.len();
        // Antiderivative A_k of t·p_k(t) on each segment.
        let antiderivs: Vec<Vec<BigRational>> = self
            .segments
            .iter()
            .map(|p| {
                // t·p(t) shifts every coefficient up one degree; integrate.
                let mut a = vec![BigRational::zero(); p.len() + 2];
                for (k, c) in p.iter().enumerate() {
                    a[k + 2] = c / BigRational::from_integer(BigInt::from(k as i64 + 2));
                }
                a
            })
            .collect();

        // tails[k] = ∫_{b_{k+1}}^{b_m} t φ(t) dt, the mass beyond segment k.
        let mut tails = vec![BigRational::zero(); m];
        for k in (0..m.saturating_sub(1)).rev() {
            let next_full = eval_rational(&antiderivs[k + 1], &self.breakpoints[k + 2])
                - eval_rational(&antiderivs[k + 1], &self.breakpoints[k + 1]);
            tails[k] = next_full + tails[k + 1].clone();
        }

        // On segment k: (Iφ)(z) = A_k(b_{k+1}) - A_k(z) + tail[k].
        let segments: Vec<Vec<BigRational>> = (0..m)
            .map(|k| {
                let mut coeffs: Vec<BigRational> =
                    antiderivs[k].iter().map(|c| -c.clone()).collect();
                coeffs[0] +=
                    eval_rational(&antiderivs[k], &self.breakpoints[k + 1]) + tails[k].clone();
                coeffs
            })
            .collect();

        PiecewisePolynomial {
            breakpoints: self.breakpoints.clone(),
            segments,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.eval_in::<f64>(&z)
    }

    pub fn eval_in<T: Real>(&self, z: &T) -> T {
        let last = rational_to_t::<T>(self.breakpoints.last().expect("nonempty breakpoints"));
        if *z >= last {
            return T::zero();
        }
        let mut seg = 0;
        for k in 0..self.segments.len() {
            let hi = rational_to_t::<T>(&self.breakpoints[k + 1]);
            if *z < hi {
                seg = k;
                break;
            }
        }
        // Horner in the requested arithmetic.
        let mut acc = T::zero();
        for c in self.segments[seg].iter().rev() {
            acc = acc.mul(z).add(&rational_to_t::<T>(c));
        }
        acc
    }

    /// Maximum jump across interior breakpoints, for continuity checks.
    pub fn max_interior_jump(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.segments.len() {
            let b = rational_to_f64(&self.breakpoints[k]);
            let left: f64 = self.segments[k - 1]
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * b + rational_to_f64(c));
            let right: f64 = self.segments[k]
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * b + rational_to_f64(c));
            worst = worst.max((left - right).abs());
        }
        worst
    }
}

fn eval_rational(coeffs: &[BigRational], z: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational fits f64")
}

fn rational_to_t<T: Real>(r: &BigRational) -> T {
    // Numerators and denominators stay small for the supported smoothness
    // range; converting the parts separately keeps the quotient exact in
    // extended precision.
    let num = r.numer();
    let den = r.denom();
    match (num.to_i64(), den.to_i64()) {
        (Some(n), Some(d)) => T::of(n as f64).div(&T::of(d as f64)),
        _ => T::of(rational_to_f64(r)),
    }
}

/// Radial profile `I^s (1-z)_+^{⌊d/2⌋+s+1}` for dimension `d` and
/// smoothness `s`. Not normalized to one at the origin.
pub fn wendland_polynomial(d: u32, s: u32) -> PiecewisePolynomial {
    let m = d / 2 + s + 1;
    let mut phi = PiecewisePolynomial::truncated_power(m);
    for _ in 0..s {
        phi = phi.integral_operator();
    }
    phi
}
