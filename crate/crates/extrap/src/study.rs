//! Convergence-study harness: scale a base design by a sequence of `h`
//! factors, run extrapolation methods at each scale, and fit log-log
//! error slopes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classical::{richardson, shanks, Sequence};
use crate::data::fmt_float;
use crate::error::{Error, Result};
use crate::gp::{factor_system, zero_moments};
use crate::kernel::{Kernel, KernelFamily, KernelSpec, LengthScales};
use crate::parallel::par_map;
use crate::problems::OracleProblem;
use crate::real::{bits_for_digits, set_precision_bits, MpFloat, Precision, Real};

/// An extrapolation method to run at every scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Model-based extrapolation with the problem's error bound and the
    /// given kernel; length scale defaults to 1.
    Gp {
        family: KernelFamily,
        smoothness: u32,
        ell: f64,
    },
    /// The numerical method itself: its value at the finest design point.
    Raw,
    /// Power-elimination tableau at the given order, full depth.
    Richardson { order: u32 },
    /// One pass of the closed-form Shanks transformation, deepest entry.
    Shanks,
}

impl Method {
    pub fn gp(family: KernelFamily, smoothness: u32) -> Self {
        Method::Gp {
            family,
            smoothness,
            ell: 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::Gp {
                family, smoothness, ..
            } => {
                let fam = match family {
                    KernelFamily::Matern => "matern",
                    KernelFamily::Wendland => "wendland",
                    KernelFamily::Gaussian => "gaussian",
                };
                format!("gp-{fam}-s{smoothness}")
            }
            Method::Raw => "raw".into(),
            Method::Richardson { order } => format!("richardson-r{order}"),
            Method::Shanks => "shanks".into(),
        }
    }
}

/// Least-squares slope of `log |error|` against `log h` over the largest
/// contiguous window above the precision floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Indices into `h_values` delimiting the fitted window (inclusive).
    pub window: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: String,
    pub abs_error: Vec<f64>,
    /// Signed standardized error; only model-based methods report one.
    pub rel_error: Vec<Option<f64>>,
    pub slope: Option<SlopeFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub problem: String,
    pub precision: Precision,
    pub h_values: Vec<f64>,
    pub curves: Vec<MethodCurve>,
}

/// Run every requested method on the oracle evaluated over `h · base`
/// for each `h`. Extended precision covers both the oracle evaluation and
/// the model linear algebra; errors are reported as doubles.
pub fn run_convergence_study(
    problem: &OracleProblem,
    base_design: &[f64],
    h_values: &[f64],
    methods: &[Method],
    precision: Precision,
) -> Result<StudyResult> {
    if methods.is_empty() {
        return Err(Error::InvalidParameter {
            name: "methods".into(),
            reason: "at least one method is required".into(),
        });
    }
    if base_design.is_empty() || base_design.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidData(
            "base design must be nonempty and positive".into(),
        ));
    }
    if h_values.is_empty() || h_values.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
        return Err(Error::InvalidData(
            "scale factors must lie in (0, 1]".into(),
        ));
    }

    // Indexed per-h evaluation; indices keep result assembly deterministic.
    let hs: Vec<f64> = h_values.to_vec();
    let per_h: Vec<Result<Vec<(f64, Option<f64>)>>> = par_map(&hs, |&h| match precision {
        Precision::Double => run_at_scale::<f64>(problem, base_design, h, methods),
        Precision::Extended(digits) => {
            set_precision_bits(bits_for_digits(digits));
            run_at_scale::<MpFloat>(problem, base_design, h, methods)
        }
    });

    let mut columns: Vec<Vec<(f64, Option<f64>)>> = Vec::with_capacity(hs.len());
    for r in per_h {
        columns.push(r?);
    }

    let floor = 100.0 * precision.epsilon() * problem.true_limit.abs().max(1.0);
    let curves = methods
        .iter()
        .enumerate()
        .map(|(mi, method)| {
            let abs_error: Vec<f64> = columns.iter().map(|c| c[mi].0).collect();
            let rel_error: Vec<Option<f64>> = columns.iter().map(|c| c[mi].1).collect();
            let slope = fit_slope(&hs, &abs_error, floor);
            MethodCurve {
                method: method.label(),
                abs_error,
                rel_error,
                slope,
            }
        })
        .collect();

    Ok(StudyResult {
        problem: problem.name.into(),
        precision,
        h_values: hs,
        curves,
    })
}

/// Evaluate all methods at one scale: returns `(abs_error, rel_error)`
/// per method.
fn run_at_scale<T: Real>(
    problem: &OracleProblem,
    base_design: &[f64],
    h: f64,
    methods: &[Method],
) -> Result<Vec<(f64, Option<f64>)>> {
    let mut base = base_design.to_vec();
    base.sort_by(|a, b| b.partial_cmp(a).expect("finite design"));
    let h_t = T::of(h);
    let points_t: Vec<Vec<T>> = base.iter().map(|&b| vec![T::of(b).mul(&h_t)]).collect();
    let values_t: Vec<T> = points_t.iter().map(|p| problem.eval_in(p)).collect();
    let limit_t = problem.true_limit_in::<T>();

    let xs_f64: Vec<f64> = points_t.iter().map(|p| p[0].to_f64()).collect();
    let values_f64: Vec<f64> = values_t.iter().map(Real::to_f64).collect();

    methods
        .iter()
        .map(|method| match method {
            Method::Gp {
                family,
                smoothness,
                ell,
            } => {
                let spec =
                    KernelSpec::new(*family, *smoothness, LengthScales::new(vec![*ell])?, 1)?;
                let evaluator = Kernel::radial(spec).evaluator();
                let sys = factor_system(&points_t, &problem.bound, &evaluator, 0.0)?;
                let moments = zero_moments(&sys, &values_t);
                let err = limit_t.sub(&moments.mean);
                let abs = err.abs().to_f64();
                let rel = if moments.var > T::zero() {
                    Some(err.div(&moments.var.sqrt()).to_f64())
                } else {
                    None
                };
                Ok((abs, rel))
            }
            Method::Raw => {
                let best = values_t.last().expect("nonempty design");
                Ok((limit_t.sub(best).abs().to_f64(), None))
            }
            Method::Richardson { order } => {
                let seq = Sequence::with_x(xs_f64.clone(), values_f64.clone())?;
                let depth = seq.len() - 1;
                let out = richardson(&seq, *order, depth)?;
                Ok(((problem.true_limit - out.y[0]).abs(), None))
            }
            Method::Shanks => {
                let seq = Sequence::values(values_f64.clone())?;
                let out = shanks(&seq)?;
                let est = *out.y.last().expect("guarded output nonempty");
                Ok(((problem.true_limit - est).abs(), None))
            }
        })
        .collect()
}

/// Largest contiguous window of scales whose error clears the floor,
/// regressed as `log err ~ slope · log h`; `None` with fewer than two
/// usable points.
fn fit_slope(h_values: &[f64], errors: &[f64], floor: f64) -> Option<SlopeFit> {
    let eligible: Vec<bool> = errors.iter().map(|&e| e >= floor).collect();
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=eligible.len() {
        if i < eligible.len() && eligible[i] {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            let run = (s, i - 1);
            if best.is_none_or(|(bs, be)| run.1 - run.0 > be - bs) {
                best = Some(run);
            }
        }
    }
    let (lo, hi) = best?;
    if hi - lo < 1 {
        return None;
    }
    let xs: Vec<f64> = h_values[lo..=hi].iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors[lo..=hi].iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(SlopeFit {
        slope: sxy / sxx,
        window: (lo, hi),
    })
}

impl StudyResult {
    pub fn slope_of(&self, method_label: &str) -> Option<f64> {
        self.curves
            .iter()
            .find(|c| c.method == method_label)
            .and_then(|c| c.slope.as_ref().map(|s| s.slope))
    }

    pub fn curve(&self, method_label: &str) -> Option<&MethodCurve> {
        self.curves.iter().find(|c| c.method == method_label)
    }

    /// Long CSV: `h,method,abs_error,rel_error` (relative error empty for
    /// methods without an uncertainty estimate).
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["h", "method", "abs_error", "rel_error"])?;
        for curve in &self.curves {
            for (i, &h) in self.h_values.iter().enumerate() {
                wtr.write_record(&[
                    fmt_float(h),
                    curve.method.clone(),
                    fmt_float(curve.abs_error[i]),
                    curve.rel_error[i].map(fmt_float).unwrap_or_default(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON summary with the fitted slopes, plot-ready.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "problem": self.problem,
            "precision": self.precision,
            "h_values": self.h_values,
            "slopes": self.curves.iter().map(|c| {
                serde_json::json!({
                    "method": c.method,
                    "slope": c.slope.as_ref().map(|s| s.slope),
                    "window": c.slope.as_ref().map(|s| {
                        vec![self.h_values[s.window.0], self.h_values[s.window.1]]
                    }),
                })
            }).collect::<Vec<_>>(),
        })
    }
}
