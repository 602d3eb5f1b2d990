//! Built-in oracle problems with known continuum limits, used to exercise
//! the full extrapolation stack at desk scale.

use crate::bound::ErrorBound;
use crate::design::DesignProblem;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily, KernelSpec};
use crate::real::Real;

/// Which numerical method the problem wraps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// Symmetric difference quotient approximating a derivative at zero;
    /// the probed function carries a one-sided `t^{s+4}` term so the
    /// normalised error has smoothness exactly `s`.
    CentralDifference { s_true: u32 },
    /// Composite trapezoid values of an oscillatory integrand, indexed by
    /// the panel width `x = 1/n`.
    Trapezoid,
}

/// A simulator stand-in with a known limit and a known error bound.
pub struct OracleProblem {
    pub name: &'static str,
    pub dim: usize,
    pub kind: OracleKind,
    pub true_limit: f64,
    pub bound: ErrorBound,
    pub notes: &'static str,
}

impl OracleProblem {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_in::<f64>(&[x[0]])
    }

    pub fn eval_in<T: Real>(&self, x: &[T]) -> T {
        let x = &x[0];
        match self.kind {
            OracleKind::CentralDifference { s_true } => {
                // psi(t) = sin(10 t) + 1_{t>0} t^{s+4}, evaluated one-sided
                // exactly as written.
                let psi = |t: &T| -> T {
                    let osc = t.mul(&T::of(10.0)).sin();
                    if *t > T::zero() {
                        osc.add(&t.powi(s_true as i64 + 4))
                    } else {
                        osc
                    }
                };
                let num = psi(x).sub(&psi(&x.neg()));
                num.div(&x.mul(&T::of(2.0)))
            }
            OracleKind::Trapezoid => {
                let n = self.panels(x.to_f64()).0;
                let nt = T::of(n as f64);
                let psi = |t: &T| -> T {
                    let osc = t.mul(&T::of(10.0)).sin();
                    osc.add(&t.mul(t))
                };
                let mut sum = psi(&T::zero()).add(&psi(&T::one())).div(&T::of(2.0));
                for k in 1..n {
                    sum = sum.add(&psi(&T::of(k as f64).div(&nt)));
                }
                sum.div(&nt)
            }
        }
    }

    pub fn true_limit_in<T: Real>(&self) -> T {
        match self.kind {
            OracleKind::CentralDifference { .. } => T::of(10.0),
            OracleKind::Trapezoid => {
                // closed-form antiderivative: (1 - cos 10)/10 + 1/3
                let one = T::one();
                let cos10 = T::of(10.0).cos();
                one.sub(&cos10).div(&T::of(10.0)).add(&one.div(&T::of(3.0)))
            }
        }
    }

    /// Trapezoid panel count for a fidelity `x ≈ 1/n`: the nearest integer
    /// with a flag telling whether snapping actually moved the input.
    pub fn panels(&self, x: f64) -> (u64, bool) {
        let raw = 1.0 / x;
        let n = raw.round().max(1.0) as u64;
        let snapped = (raw - n as f64).abs() > 1e-9 * raw;
        (n, snapped)
    }

    /// Warning text when `x` is not an exact reciprocal panel count.
    pub fn snap_warning(&self, x: f64) -> Option<String> {
        match self.kind {
            OracleKind::Trapezoid => {
                let (n, snapped) = self.panels(x);
                snapped.then(|| format!("fidelity {x} is not 1/integer; snapped to n = {n} panels"))
            }
            _ => None,
        }
    }
}

/// Derivative estimation benchmark: the limit is 10 and the bound is
/// second order.
pub fn central_difference_oracle(s_true: u32) -> OracleProblem {
    OracleProblem {
        name: "central-difference",
        dim: 1,
        kind: OracleKind::CentralDifference { s_true },
        true_limit: 10.0,
        bound: ErrorBound::monomial(2.0),
        notes: "symmetric difference quotient of an oscillatory function; second-order accurate",
    }
}

/// Quadrature benchmark: trapezoid values of `sin(10t) + t²` on `[0, 1]`.
pub fn trapezoid_oracle() -> OracleProblem {
    OracleProblem {
        name: "trapezoid",
        dim: 1,
        kind: OracleKind::Trapezoid,
        true_limit: (1.0 - 10f64.cos()) / 10.0 + 1.0 / 3.0,
        bound: ErrorBound::monomial(2.0),
        notes: "composite trapezoid rule; even error expansion starting at second order",
    }
}

/// First-order method with reciprocal cost on a uniform candidate grid
/// over `(0, 1]`, the canonical budgeted-design benchmark geometry.
pub fn euler_design_problem(grid_size: usize) -> Result<DesignProblem> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_size".into(),
            reason: "need at least two candidates".into(),
        });
    }
    let candidates: Vec<Vec<f64>> = (1..=grid_size)
        .map(|i| vec![i as f64 / grid_size as f64])
        .collect();
    let costs: Vec<f64> = candidates.iter().map(|c| 1.0 / c[0]).collect();
    Ok(DesignProblem {
        candidates,
        costs,
        budget: 1.0,
        bound: ErrorBound::monomial(1.0),
        kernel: Kernel::radial(KernelSpec::univariate(KernelFamily::Matern, 0, 1.0)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn central_difference_values() {
        let p = central_difference_oracle(2);
        assert_eq!(p.true_limit, 10.0);
        // direct evaluation: (2 sin(10x) + x^{s+4})/(2x) at x = 1
        let expected = (2.0 * 10f64.sin() + 1.0) / 2.0;
        assert_relative_eq!(p.eval(&[1.0]), expected, max_relative = 1e-14);
        assert!((p.eval(&[1.0]) - (-0.0440211)).abs() < 5e-8);
    }

    #[test]
    fn central_difference_is_second_order() {
        let p = central_difference_oracle(2);
        // |f(x) - 10| / x² stays bounded as x shrinks; the asymptotic
        // constant from the sin expansion is 1000/6.
        let ratios: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&x| (p.eval(&[x]) - 10.0).abs() / (x * x))
            .collect();
        let max = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(max < 300.0, "ratio blew up: {ratios:?}");
        let last = *ratios.last().unwrap();
        assert!(
            (last - 1000.0 / 6.0).abs() < 2.0,
            "ratio {last} far from 1000/6"
        );
    }

    #[test]
    fn trapezoid_values() {
        let p = trapezoid_oracle();
        // closed-form limit
        assert_relative_eq!(
            p.true_limit,
            (1.0 - 10f64.cos()) / 10.0 + 1.0 / 3.0,
            max_relative = 1e-15
        );
        assert!((p.true_limit - 0.5172405).abs() < 5e-7);
        // one panel: (psi(0) + psi(1))/2
        let y1 = (0.0 + 10f64.sin() + 1.0) / 2.0;
        assert_relative_eq!(p.eval(&[1.0]), y1, max_relative = 1e-14);
        assert!((p.eval(&[1.0]) - 0.2279894).abs() < 1e-7);
    }

    #[test]
    fn trapezoid_second_order_slope() {
        let p = trapezoid_oracle();
        let errors: Vec<f64> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&n| (p.eval(&[1.0 / n]) - p.true_limit).abs())
            .collect();
        // log-log slope across the dyadic refinement
        for w in errors.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(
                (slope - 2.0).abs() < 0.25,
                "local order {slope} (errors {errors:?})"
            );
        }
    }

    #[test]
    fn trapezoid_snapping() {
        let p = trapezoid_oracle();
        assert_eq!(p.panels(0.25), (4, false));
        let (n, snapped) = p.panels(0.3);
        assert_eq!(n, 3);
        assert!(snapped);
        assert!(p.snap_warning(0.3).is_some());
        assert!(p.snap_warning(0.25).is_none());
    }

    #[test]
    fn extended_evaluation_agrees_with_double() {
        use crate::real::{bits_for_digits, set_precision_bits, MpFloat};
        set_precision_bits(bits_for_digits(50));
        for problem in [central_difference_oracle(2), trapezoid_oracle()] {
            for x in [1.0, 0.5, 0.125] {
                let d = problem.eval(&[x]);
                let e = problem.eval_in::<MpFloat>(&[MpFloat::of(x)]).to_f64();
                assert_relative_eq!(d, e, max_relative = 1e-13);
            }
            let lim = problem.true_limit_in::<MpFloat>().to_f64();
            assert_relative_eq!(problem.true_limit, lim, max_relative = 1e-14);
        }
    }

    #[test]
    fn euler_budget_below_cheapest_run_degrades_gracefully() {
        let mut p = euler_design_problem(20).unwrap();
        p.budget = 0.5; // cheapest candidate (x = 1) costs 1
        let sol = crate::design::optimize_design(&p).unwrap();
        assert!(sol.selected.is_empty());
        assert_eq!(sol.objective, 0.0);
        assert!(sol.warning.is_some());
    }

    #[test]
    fn euler_geometry() {
        let p = euler_design_problem(20).unwrap();
        assert_eq!(p.candidates.len(), 20);
        assert_relative_eq!(p.costs[0], 20.0); // cost at x = 0.05 is 1/x
        assert_relative_eq!(p.candidates[0][0], 0.05);
        assert_relative_eq!(p.candidates[19][0], 1.0);
        assert!(euler_design_problem(1).is_err());
    }
}
