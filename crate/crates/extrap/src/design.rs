//! Cost-constrained experimental design: choose the fidelity subset
//! maximising `1ᵀK_b⁻¹1` (the reciprocal posterior variance at the
//! origin, with the scale held fixed at one) under a hard cost budget.

use serde::{Deserialize, Serialize};

use crate::bound::ErrorBound;
use crate::error::{Error, Result};
use crate::gp::factor_system;
use crate::kernel::{Kernel, KernelEval};
use crate::linalg::dot;
use crate::parallel::par_map;

/// Candidate fidelities with their costs and a hard budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignProblem {
    pub candidates: Vec<Vec<f64>>,
    /// Cost of running each candidate, in seconds.
    pub costs: Vec<f64>,
    pub budget: f64,
    pub bound: ErrorBound,
    pub kernel: Kernel,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidData("candidate set is empty".into()));
        }
        let d = self.candidates[0].len();
        for (i, c) in self.candidates.iter().enumerate() {
            if c.len() != d {
                return Err(Error::InvalidData(format!(
                    "candidate {i} has {} coordinates, expected {d}",
                    c.len()
                )));
            }
            if c.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidData(format!(
                    "candidate {i} must have strictly positive coordinates"
                )));
            }
        }
        for i in 0..self.candidates.len() {
            for j in (i + 1)..self.candidates.len() {
                if self.candidates[i] == self.candidates[j] {
                    return Err(Error::InvalidData(format!(
                        "candidates {i} and {j} coincide"
                    )));
                }
            }
        }
        if self.costs.len() != self.candidates.len() {
            return Err(Error::InvalidData(format!(
                "{} costs for {} candidates",
                self.costs.len(),
                self.candidates.len()
            )));
        }
        if self.costs.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidData("costs must be positive".into()));
        }
        if !(self.budget > 0.0) {
            return Err(Error::InvalidData("budget must be positive".into()));
        }
        self.bound.validate(d)?;
        self.kernel.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exhaustive,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    /// Indices into the candidate list, ascending.
    pub selected: Vec<usize>,
    /// `1ᵀK_b⁻¹1` of the selected subset (0 for the empty design).
    pub objective: f64,
    pub total_cost: f64,
    pub method: SearchMethod,
    /// Guaranteed optimal over the candidate set; only exhaustive search
    /// can assert this.
    pub optimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Greedy runs also record what the gain-per-cost variant of the
    /// selection rule would have chosen, for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_diagnostics: Option<GreedyDiagnostics>,
}

/// Outcome of the alternative greedy selection rule (largest objective
/// gain per unit cost instead of largest absolute gain).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyDiagnostics {
    pub per_cost_selected: Vec<usize>,
    pub per_cost_objective: f64,
}

impl DesignSolution {
    /// Plain-text table of the selected candidates.
    pub fn table(&self, problem: &DesignProblem) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "design: {} of {} candidates, objective {:.6e}, cost {:.6e} / budget {:.6e} ({})\n",
            self.selected.len(),
            problem.candidates.len(),
            self.objective,
            self.total_cost,
            problem.budget,
            if self.optimal { "optimal" } else { "greedy" },
        ));
        if let Some(w) = &self.warning {
            out.push_str(&format!("warning: {w}\n"));
        }
        out.push_str("index  cost          point\n");
        for &i in &self.selected {
            let coords: Vec<String> = problem.candidates[i]
                .iter()
                .map(|c| format!("{c:.6}"))
                .collect();
            out.push_str(&format!(
                "{i:<6} {:<13.6e} ({})\n",
                problem.costs[i],
                coords.join(", ")
            ));
        }
        out
    }
}

/// Read a candidate table from CSV with header `x1,...,xd,cost`.
pub fn candidates_from_csv<R: std::io::Read>(reader: R) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let d = cols.iter().take_while(|c| c.starts_with('x')).count();
    if d == 0 || cols.len() != d + 1 || cols[d] != "cost" {
        return Err(Error::InvalidData(format!(
            "expected header x1,...,xd,cost, got {}",
            cols.join(",")
        )));
    }
    let mut candidates = Vec::new();
    let mut costs = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::InvalidData(format!("row {row}: missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidData(format!("row {row}, column {i}: {e}")))
        };
        candidates.push((0..d).map(parse).collect::<Result<Vec<f64>>>()?);
        costs.push(parse(d)?);
    }
    Ok((candidates, costs))
}

/// `1ᵀK_b⁻¹1` for a point set, through the diagonal factorization.
/// The empty set is 0 by convention (no information about the level).
pub fn design_objective(points: &[Vec<f64>], bound: &ErrorBound, kernel: &Kernel) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let evaluator = kernel.evaluator();
    let sys = factor_system(points, bound, &evaluator, 0.0)?;
    let u: Vec<f64> = sys.b_vals.iter().map(|b| 1.0 / b).collect();
    let alpha = sys.chol.solve(&u);
    Ok(dot(&u, &alpha))
}

/// Candidate sets of at most this size are searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Solve the budgeted subset selection. Exhaustive enumeration (with
/// cost-dominance pruning) up to [`EXHAUSTIVE_LIMIT`] candidates, greedy
/// forward selection beyond that.
pub fn optimize_design(problem: &DesignProblem) -> Result<DesignSolution> {
    problem.validate()?;
    let min_cost = problem.costs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_cost > problem.budget {
        return Ok(DesignSolution {
            selected: vec![],
            objective: 0.0,
            total_cost: 0.0,
            method: SearchMethod::Exhaustive,
            optimal: true,
            warning: Some(format!(
                "budget {:.6e} is below the cheapest candidate cost {min_cost:.6e}; empty design",
                problem.budget
            )),
            greedy_diagnostics: None,
        });
    }
    if problem.candidates.len() <= EXHAUSTIVE_LIMIT {
        exhaustive_search(problem)
    } else {
        greedy_search(problem)
    }
}

fn subset_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

fn exhaustive_search(problem: &DesignProblem) -> Result<DesignSolution> {
    let n = problem.candidates.len();
    let budget = problem.budget;

    // The objective is monotone under supersets, so only cost-maximal
    // feasible sets (no remaining candidate fits the residual budget) can
    // be optimal; everything else is dominated and never evaluated.
    let mut maximal: Vec<(u32, f64)> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let mut cost = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                cost += problem.costs[i];
            }
        }
        if cost > budget {
            continue;
        }
        let extendable = (0..n).any(|i| mask & (1 << i) == 0 && cost + problem.costs[i] <= budget);
        if !extendable {
            maximal.push((mask, cost));
        }
    }

    let scored = par_map(&maximal, |(mask, cost)| {
        let pts: Vec<Vec<f64>> = subset_indices(*mask, n)
            .into_iter()
            .map(|i| problem.candidates[i].clone())
            .collect();
        let obj =
            design_objective(&pts, &problem.bound, &problem.kernel).unwrap_or(f64::NEG_INFINITY);
        (*mask, *cost, obj)
    });

    let mut best: Option<(u32, f64, f64)> = None;
    for &(mask, cost, obj) in &scored {
        if obj == f64::NEG_INFINITY {
            continue;
        }
        let better = match best {
            None => true,
            Some((bmask, _, bobj)) => {
                obj > bobj || (obj == bobj && subset_indices(mask, n) < subset_indices(bmask, n))
            }
        };
        if better {
            best = Some((mask, cost, obj));
        }
    }

    let Some((mask, cost, obj)) = best else {
        return Err(Error::NoFeasibleCandidate(
            "every feasible subset was numerically singular".into(),
        ));
    };
    Ok(DesignSolution {
        selected: subset_indices(mask, n),
        objective: obj,
        total_cost: cost,
        method: SearchMethod::Exhaustive,
        optimal: true,
        warning: None,
        greedy_diagnostics: None,
    })
}

fn greedy_search(problem: &DesignProblem) -> Result<DesignSolution> {
    let (selected, objective, total_cost) = greedy_run(problem, GreedyRule::AbsoluteGain);
    // The absolute-gain rule is the selection criterion; the per-cost
    // variant is recorded alongside so the two can be compared.
    let (alt_selected, alt_objective, _) = greedy_run(problem, GreedyRule::GainPerCost);
    Ok(DesignSolution {
        selected,
        objective,
        total_cost,
        method: SearchMethod::Greedy,
        optimal: false,
        warning: None,
        greedy_diagnostics: Some(GreedyDiagnostics {
            per_cost_selected: alt_selected,
            per_cost_objective: alt_objective,
        }),
    })
}

#[derive(Clone, Copy, PartialEq)]
enum GreedyRule {
    AbsoluteGain,
    GainPerCost,
}

fn greedy_run(problem: &DesignProblem, rule: GreedyRule) -> (Vec<usize>, f64, f64) {
    let n = problem.candidates.len();
    let mut state = IncrementalDesign::new(problem.bound.clone(), problem.kernel.clone());
    let mut selected: Vec<usize> = Vec::new();
    let mut total_cost = 0.0;

    loop {
        let affordable: Vec<usize> = (0..n)
            .filter(|i| !selected.contains(i) && total_cost + problem.costs[*i] <= problem.budget)
            .collect();
        if affordable.is_empty() {
            break;
        }
        let gains = par_map(&affordable, |&i| {
            match state.peek_add(&problem.candidates[i]) {
                Some(obj) => Some(obj),
                None => {
                    // Update breakdown: recompute the whole subset.
                    let mut pts: Vec<Vec<f64>> = selected
                        .iter()
                        .map(|&k| problem.candidates[k].clone())
                        .collect();
                    pts.push(problem.candidates[i].clone());
                    design_objective(&pts, &problem.bound, &problem.kernel).ok()
                }
            }
        });
        let current = state.objective();
        let mut best: Option<(usize, f64)> = None;
        for (pos, gain) in gains.iter().enumerate() {
            if let Some(obj) = gain {
                let idx = affordable[pos];
                let score = match rule {
                    GreedyRule::AbsoluteGain => *obj,
                    GreedyRule::GainPerCost => (*obj - current) / problem.costs[idx],
                };
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((idx, score));
                }
            }
        }
        let Some((idx, _)) = best else { break };
        if state.try_add(&problem.candidates[idx]).is_none() {
            // The committed update failed even though scoring succeeded;
            // rebuild the state from scratch including the new point.
            let mut pts: Vec<Vec<f64>> = selected
                .iter()
                .map(|&k| problem.candidates[k].clone())
                .collect();
            pts.push(problem.candidates[idx].clone());
            state = IncrementalDesign::new(problem.bound.clone(), problem.kernel.clone());
            let mut ok = true;
            for p in &pts {
                if state.try_add(p).is_none() {
                    ok = false;
                    break;
                }
            }
            if !ok {
                break;
            }
        }
        total_cost += problem.costs[idx];
        selected.push(idx);
    }

    selected.sort_unstable();
    let pts: Vec<Vec<f64>> = selected
        .iter()
        .map(|&k| problem.candidates[k].clone())
        .collect();
    let objective = design_objective(&pts, &problem.bound, &problem.kernel).unwrap_or(0.0);
    (selected, objective, total_cost)
}

/// Growing-design factorization handle: appends one point at a time to a
/// Cholesky factor of `K_e` and tracks `y = L⁻¹u`, so the objective
/// `uᵀK_e⁻¹u = ‖y‖²` updates in O(n²) per added point.
pub struct IncrementalDesign {
    bound: ErrorBound,
    evaluator: KernelEval,
    points: Vec<Vec<f64>>,
    l: Vec<Vec<f64>>, // row i holds L[i][0..=i]
    y: Vec<f64>,
    objective: f64,
}

impl IncrementalDesign {
    pub fn new(bound: ErrorBound, kernel: Kernel) -> Self {
        IncrementalDesign {
            bound,
            evaluator: kernel.evaluator(),
            points: Vec::new(),
            l: Vec::new(),
            y: Vec::new(),
            objective: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Objective of the current set (0 when empty).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    fn extension(&self, x: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
        let k_new: Vec<f64> = self
            .points
            .iter()
            .map(|p| self.evaluator.eval(p, x))
            .collect();
        // forward-solve L w = k_new against the growing factor
        let mut w: Vec<f64> = Vec::with_capacity(self.points.len());
        for i in 0..self.points.len() {
            let mut sum = k_new[i];
            for (j, wj) in w.iter().enumerate().take(i) {
                sum -= self.l[i][j] * wj;
            }
            w.push(sum / self.l[i][i]);
        }
        let pivot = self.evaluator.eval(x, x) - dot(&w, &w);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None; // duplicate or numerically dependent point
        }
        let l_new = pivot.sqrt();
        let b = self.bound.eval(x);
        if !(b > 0.0) {
            return None;
        }
        let y_new = (1.0 / b - dot(&w, &self.y)) / l_new;
        Some((w, l_new, y_new))
    }

    /// Objective of `current ∪ {x}` without committing the update; `None`
    /// marks an infeasible extension (duplicate point or update breakdown).
    pub fn peek_add(&self, x: &[f64]) -> Option<f64> {
        let (_, _, y_new) = self.extension(x)?;
        Some(self.objective + y_new * y_new)
    }

    /// Commit `x` into the factorization; returns the new objective.
    pub fn try_add(&mut self, x: &[f64]) -> Option<f64> {
        let (mut w, l_new, y_new) = self.extension(x)?;
        w.push(l_new);
        self.l.push(w);
        self.y.push(y_new);
        self.points.push(x.to_vec());
        self.objective += y_new * y_new;
        Some(self.objective)
    }
}
