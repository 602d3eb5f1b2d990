//! Extrapolation of vector- or function-valued output observed on a
//! Cartesian grid of fidelities × output indices.
//!
//! The covariance factorizes over the grid, so fitting only ever factors
//! the two marginal Gram matrices (sizes `n1` and `n2`); the full
//! `n1·n2` system is never formed.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bound::ErrorBound;
use crate::data::fmt_float;
use crate::error::{Error, Result};
use crate::gp::{factor_gram, factor_system};
use crate::kernel::{Kernel, KernelEval, KernelFamily, KernelSpec, LengthScales};
use crate::linalg::{dot, Cholesky};

/// Observations `f(x_i, t_j)` on a complete grid. The output index `t` is
/// opaque: any real labels with a kernel defined on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDataset {
    pub x_points: Vec<Vec<f64>>,
    pub t_points: Vec<f64>,
    /// Row `i`, column `j` holds the value at `(x_points[i], t_points[j])`.
    pub values: Vec<Vec<f64>>,
}

impl GridDataset {
    pub fn new(x_points: Vec<Vec<f64>>, t_points: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let g = GridDataset {
            x_points,
            t_points,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_fidelities(&self) -> usize {
        self.x_points.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.t_points.len()
    }

    pub fn dim(&self) -> usize {
        self.x_points.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_points.is_empty() || self.t_points.is_empty() {
            return Err(Error::InvalidData(
                "grid must have at least one row and column".into(),
            ));
        }
        let d = self.dim();
        for (i, p) in self.x_points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::InvalidData(format!(
                    "fidelity {i} has {} coordinates, expected {d}",
                    p.len()
                )));
            }
            if p.iter().any(|&c| !(c > 0.0)) {
                return Err(Error::InvalidData(format!(
                    "fidelity {i} must be componentwise positive"
                )));
            }
        }
        for i in 0..self.x_points.len() {
            for j in (i + 1)..self.x_points.len() {
                if self.x_points[i] == self.x_points[j] {
                    return Err(Error::InvalidData(format!(
                        "fidelities {i} and {j} coincide"
                    )));
                }
            }
        }
        for i in 0..self.t_points.len() {
            for j in (i + 1)..self.t_points.len() {
                if self.t_points[i] == self.t_points[j] {
                    return Err(Error::InvalidData(format!(
                        "output indices {i} and {j} coincide"
                    )));
                }
            }
        }
        if self.values.len() != self.x_points.len()
            || self
                .values
                .iter()
                .any(|row| row.len() != self.t_points.len())
        {
            return Err(Error::InvalidData(
                "value table shape does not match the grid; for incomplete grids fit each output \
                 separately with the scalar model"
                    .into(),
            ));
        }
        if self
            .values
            .iter()
            .any(|row| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidData("grid values must be finite".into()));
        }
        Ok(())
    }

    /// Read the long CSV form `x1,...,xd,t,f`. The rows may come in any
    /// order, but together they must tile a complete Cartesian grid.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let d = cols.iter().take_while(|c| c.starts_with('x')).count();
        if d == 0 || cols.len() != d + 2 || cols[d] != "t" || cols[d + 1] != "f" {
            return Err(Error::InvalidData(format!(
                "expected header x1,...,xd,t,f, got {}",
                cols.join(",")
            )));
        }
        let mut x_points: Vec<Vec<f64>> = Vec::new();
        let mut t_points: Vec<f64> = Vec::new();
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        for (rowno, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .ok_or_else(|| Error::InvalidData(format!("row {rowno}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidData(format!("row {rowno}, column {i}: {e}")))
            };
            let x: Vec<f64> = (0..d).map(parse).collect::<Result<_>>()?;
            let t = parse(d)?;
            let f = parse(d + 1)?;
            let xi = match x_points.iter().position(|p| *p == x) {
                Some(i) => i,
                None => {
                    x_points.push(x);
                    x_points.len() - 1
                }
            };
            let tj = match t_points.iter().position(|&p| p == t) {
                Some(j) => j,
                None => {
                    t_points.push(t);
                    t_points.len() - 1
                }
            };
            cells.push((xi, tj, f));
        }
        let (n1, n2) = (x_points.len(), t_points.len());
        if cells.len() != n1 * n2 {
            return Err(Error::InvalidData(format!(
                "grid is incomplete: {} rows for {n1} fidelities x {n2} outputs; fit each output \
                 separately with the scalar model instead",
                cells.len()
            )));
        }
        let mut values = vec![vec![f64::NAN; n2]; n1];
        for (i, j, f) in cells {
            if !values[i][j].is_nan() {
                return Err(Error::InvalidData(format!(
                    "duplicate grid cell for fidelity {i}, output {j}"
                )));
            }
            values[i][j] = f;
        }
        GridDataset::new(x_points, t_points, values)
    }
}

/// Default output-index kernel: Gaussian with length scale equal to the
/// full span of the index values.
pub fn default_t_kernel(t_points: &[f64]) -> Result<Kernel> {
    let lo = t_points.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t_points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(Kernel::radial(KernelSpec::new(
        KernelFamily::Gaussian,
        0,
        LengthScales::new(vec![span])?,
        1,
    )?))
}

/// Fitted tensor-grid posterior.
pub struct MultiPosterior {
    pub grid: GridDataset,
    pub bound: ErrorBound,
    pub sigma2: f64,
    /// `1ᵀK_b⁻¹1` of the fidelity side.
    pub objective: f64,
    /// Extrapolated mean at `(0, t_j)` for every training output index.
    pub mean_at_zero: Vec<f64>,
    weights: Vec<f64>,
    b_vals: Vec<f64>,
    alpha: Vec<f64>,
    chol_x: Cholesky<f64>,
    eval_x: KernelEval,
    eval_t: KernelEval,
}

/// Condition the factorized grid model. Only the two marginal Gram
/// matrices are factorized; the jitter escalation policy of the scalar
/// fit applies to each factor independently.
pub fn fit_grid(
    grid: &GridDataset,
    bound: &ErrorBound,
    kernel_x: &Kernel,
    kernel_t: &Kernel,
) -> Result<MultiPosterior> {
    grid.validate()?;
    bound.validate(grid.dim())?;
    if kernel_x.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            context: "fidelity kernel",
            expected: grid.dim(),
            got: kernel_x.dim(),
        });
    }
    if kernel_t.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "output-index kernel",
            expected: 1,
            got: kernel_t.dim(),
        });
    }
    let (n1, n2) = (grid.n_fidelities(), grid.n_outputs());
    let eval_x = kernel_x.evaluator();
    let eval_t = kernel_t.evaluator();

    let sys = factor_system(&grid.x_points, bound, &eval_x, 0.0)?;
    let t_cols: Vec<Vec<f64>> = grid.t_points.iter().map(|&t| vec![t]).collect();
    let (chol_t, _) = factor_gram(&t_cols, &eval_t, 0.0)?;

    let u: Vec<f64> = sys.b_vals.iter().map(|b| 1.0 / b).collect();
    let alpha = sys.chol.solve(&u);
    let objective = dot(&u, &alpha);
    let weights: Vec<f64> = alpha
        .iter()
        .zip(&sys.b_vals)
        .map(|(a, b)| a / (b * objective))
        .collect();

    // Extrapolated trajectory: column-wise weighted sums.
    let mean_at_zero: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| weights[i] * grid.values[i][j]).sum())
        .collect();

    // Scale estimate: the Kronecker quadratic form tr(K_T⁻¹ Fᵀ P F) with
    // P = K_b⁻¹ - K_b⁻¹1 1ᵀK_b⁻¹ / (1ᵀK_b⁻¹1), divided by the number of
    // grid cells.
    let mut h = vec![vec![0.0f64; n2]; n2]; // Fᵀ P F
    let mut p_cols: Vec<Vec<f64>> = Vec::with_capacity(n2);
    for j in 0..n2 {
        let col: Vec<f64> = (0..n1).map(|i| grid.values[i][j]).collect();
        let g: Vec<f64> = col.iter().zip(&sys.b_vals).map(|(c, b)| c / b).collect();
        let beta = sys.chol.solve(&g);
        let level = dot(&u, &beta) / objective;
        let p_col: Vec<f64> = (0..n1)
            .map(|i| (beta[i] - level * alpha[i]) / sys.b_vals[i])
            .collect();
        p_cols.push(p_col);
    }
    for j in 0..n2 {
        for k in 0..n2 {
            let col_j: Vec<f64> = (0..n1).map(|i| grid.values[i][j]).collect();
            h[j][k] = dot(&col_j, &p_cols[k]);
        }
    }
    let mut trace = 0.0;
    for k in 0..n2 {
        let col: Vec<f64> = (0..n2).map(|j| h[j][k]).collect();
        let z = chol_t.solve(&col);
        trace += z[k];
    }
    let sigma2 = (trace / (n1 * n2) as f64).max(0.0);

    Ok(MultiPosterior {
        grid: grid.clone(),
        bound: bound.clone(),
        sigma2,
        objective,
        mean_at_zero,
        weights,
        b_vals: sys.b_vals,
        alpha,
        chol_x: sys.chol,
        eval_x,
        eval_t,
    })
}

impl MultiPosterior {
    fn t_index(&self, t: f64) -> Result<usize> {
        self.grid
            .t_points
            .iter()
            .position(|&p| p == t)
            .ok_or_else(|| {
                Error::Unsupported(format!(
                "output index {t} is not in the training grid: the conditional covariance has no \
                 finite limit off the grid; refit with this index included or place a proper \
                 prior on the output domain"
            ))
            })
    }

    /// Conditional mean and variance at fidelity `x` and a training output
    /// index `t`. `x = 0` gives the extrapolated trajectory point.
    pub fn predict(&self, x: &[f64], t: f64) -> Result<(f64, f64)> {
        let j = self.t_index(t)?;
        self.predict_at_index(x, j)
    }

    pub fn predict_at_index(&self, x: &[f64], j: usize) -> Result<(f64, f64)> {
        if x.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch {
                context: "prediction fidelity",
                expected: self.grid.dim(),
                got: x.len(),
            });
        }
        if j >= self.grid.n_outputs() {
            return Err(Error::InvalidParameter {
                name: "t".into(),
                reason: format!("output column {j} out of range"),
            });
        }
        if x.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "x".into(),
                reason: "prediction fidelities must be componentwise nonnegative".into(),
            });
        }
        let n1 = self.grid.n_fidelities();
        let xt = x.to_vec();
        let kx: Vec<f64> = self
            .grid
            .x_points
            .iter()
            .map(|p| self.eval_x.eval(p, &xt))
            .collect();
        let b_x = self.bound.eval(x);
        let v = self.chol_x.solve(&kx);
        let s = b_x * dot(&kx, &self.alpha);
        let row: Vec<f64> = (0..n1)
            .map(|i| b_x * v[i] / self.b_vals[i] + (1.0 - s) * self.weights[i])
            .collect();
        let mean: f64 = (0..n1).map(|i| row[i] * self.grid.values[i][j]).sum();

        let tj = [self.grid.t_points[j]];
        let ktt = self.eval_t.eval(&tj, &tj);
        let explained = b_x * b_x * (self.eval_x.eval(&xt, &xt) - dot(&kx, &v));
        let level = (s - 1.0) * (s - 1.0) / self.objective;
        let var = (self.sigma2 * ktt * (explained + level)).max(0.0);
        Ok((mean, var))
    }

    /// Conditional covariance between `(x, t)` and `(x', t')` for training
    /// output indices.
    pub fn covariance(&self, x: &[f64], t: f64, x2: &[f64], t2: f64) -> Result<f64> {
        let ti = self.t_index(t)?;
        let tj = self.t_index(t2)?;
        let kx: Vec<f64> = self
            .grid
            .x_points
            .iter()
            .map(|p| self.eval_x.eval(p, x))
            .collect();
        let kx2: Vec<f64> = self
            .grid
            .x_points
            .iter()
            .map(|p| self.eval_x.eval(p, x2))
            .collect();
        let (b1, b2) = (self.bound.eval(x), self.bound.eval(x2));
        let v2 = self.chol_x.solve(&kx2);
        let s1 = b1 * dot(&kx, &self.alpha);
        let s2 = b2 * dot(&kx2, &self.alpha);
        let cx = b1 * b2 * (self.eval_x.eval(x, x2) - dot(&kx, &v2))
            + (s1 - 1.0) * (s2 - 1.0) / self.objective;
        let ktt = self
            .eval_t
            .eval(&[self.grid.t_points[ti]], &[self.grid.t_points[tj]]);
        Ok(self.sigma2 * ktt * cx)
    }

    /// Extrapolated trajectory rows `(t, mean, sd)` at the origin.
    pub fn trajectory(&self) -> Vec<(f64, f64, f64)> {
        (0..self.grid.n_outputs())
            .map(|j| {
                let (m, v) = self
                    .predict_at_index(&vec![0.0; self.grid.dim()], j)
                    .expect("training index is valid");
                (self.grid.t_points[j], m, v.sqrt())
            })
            .collect()
    }

    /// Write the trajectory as `t,mean,sd` CSV.
    pub fn trajectory_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "mean", "sd"])?;
        for (t, m, sd) in self.trajectory() {
            wtr.write_record(&[fmt_float(t), fmt_float(m), fmt_float(sd)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
