//! The budgeted extrapolation workflow: per-axis pilot sweeps, order and
//! scale estimation, cost-constrained design, execution, and the final
//! extrapolated estimate.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use extrap::bound::ErrorBound;
use extrap::data::Dataset;
use extrap::design::{optimize_design, DesignProblem, DesignSolution};
use extrap::gp::{fit, CredibleInterval, Model};
use extrap::kernel::{Kernel, KernelFamily};
use extrap::order::{estimate_axiswise, AxisEstimate, OrderGrid};
use extrap::parallel::par_map;

use crate::error::{Error, Result};
use crate::ledger::{RunLedger, RunRecord, Stage};
use crate::simulator::Simulator;

fn default_alpha() -> f64 {
    0.05
}

fn default_family() -> KernelFamily {
    KernelFamily::Matern
}

/// Everything the orchestration needs besides the simulator itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkflowConfig {
    /// Cheap starting fidelity; pilot sweeps vary one coordinate at a
    /// time with the others pinned here.
    pub lofi_point: Vec<f64>,
    /// Per-axis pilot values for the varied coordinate.
    pub axis_sweeps: Vec<Vec<f64>>,
    /// Hyperparameter search grid; defaults derived from each sweep.
    #[serde(default)]
    pub grid: Option<OrderGrid>,
    #[serde(default = "default_family")]
    pub kernel_family: KernelFamily,
    /// Candidate fidelities for the budgeted design.
    pub candidates: Vec<Vec<f64>>,
    /// Total budget for the design stage, seconds. Pilot cost is excluded,
    /// matching the assumption that pilots are negligible; the report
    /// states the exclusion and the pilot/budget ratio.
    pub budget: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub ledger_path: PathBuf,
}

impl WorkflowConfig {
    pub fn validate(&self, sim_dim: usize) -> Result<()> {
        let d = self.lofi_point.len();
        if d == 0 || d != sim_dim {
            return Err(Error::Config(format!(
                "lo-fi point has {d} coordinates, simulator expects {sim_dim}"
            )));
        }
        if self.lofi_point.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config(
                "lo-fi point must be componentwise positive".into(),
            ));
        }
        if self.axis_sweeps.len() != d {
            return Err(Error::Config(format!(
                "{} axis sweeps for {d} fidelity axes",
                self.axis_sweeps.len()
            )));
        }
        for (i, sweep) in self.axis_sweeps.iter().enumerate() {
            if sweep.len() < 2 {
                return Err(Error::Config(format!(
                    "axis {i}: at least two pilot values are required"
                )));
            }
            if sweep.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!(
                    "axis {i}: pilot values must be positive"
                )));
            }
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("candidate set is empty".into()));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if c.len() != d || c.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!(
                    "candidate {i} must have {d} positive coordinates"
                )));
            }
        }
        if !(self.budget > 0.0) {
            return Err(Error::Config("budget must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkflowReport {
    pub axes: Vec<AxisEstimate>,
    pub bound: ErrorBound,
    pub kernel: Kernel,
    pub design: DesignSolution,
    /// Design points actually backing the final fit.
    pub executed: Vec<Vec<f64>>,
    pub mean_at_zero: f64,
    pub sd_at_zero: f64,
    pub sigma2: f64,
    pub objective: f64,
    pub interval: CredibleInterval,
    /// Total measured cost of pilot-stage runs (excluded from the budget;
    /// see `notes`).
    pub pilot_cost_seconds: f64,
    /// Measured cost of the design-stage runs backing the fit.
    pub design_cost_seconds: f64,
    pub pilot_budget_ratio: f64,
    pub simulator_calls: usize,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Fetch a run from the ledger or execute it, appending the outcome.
fn ensure_run(
    sim: &dyn Simulator,
    ledger: &RunLedger,
    calls: &AtomicUsize,
    x: &[f64],
    stage: Stage,
) -> Result<RunRecord> {
    if let Some(existing) = ledger.find(x) {
        return Ok(existing);
    }
    let outcome = sim.run(x)?;
    calls.fetch_add(1, Ordering::SeqCst);
    let record = RunRecord {
        x: x.to_vec(),
        value: outcome.value,
        cost_seconds: outcome.cost_seconds,
        wall_time: chrono::Utc::now().to_rfc3339(),
        stage,
        exit_status: outcome.exit_status,
    };
    ledger.append(record.clone())?;
    Ok(record)
}

fn ensure_runs(
    sim: &dyn Simulator,
    ledger: &RunLedger,
    calls: &AtomicUsize,
    points: &[Vec<f64>],
    stage: Stage,
) -> Result<Vec<RunRecord>> {
    // Distinct points only; the ledger lookup makes reruns free but two
    // concurrent first runs of the same point would both execute.
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.contains(p) {
            distinct.push(p.clone());
        }
    }
    let outcomes = par_map(&distinct, |p| ensure_run(sim, ledger, calls, p, stage));
    let mut by_point = Vec::with_capacity(points.len());
    let executed: Vec<RunRecord> = outcomes.into_iter().collect::<Result<_>>()?;
    for p in points {
        let idx = distinct
            .iter()
            .position(|q| q == p)
            .expect("point was deduplicated");
        by_point.push(executed[idx].clone());
    }
    Ok(by_point)
}

/// Run the three stages end to end. Every simulator outcome lands in the
/// ledger before it is used, so a rerun with an intact ledger reproduces
/// the identical report without spawning anything.
pub fn run_workflow(sim: &dyn Simulator, config: &WorkflowConfig) -> Result<WorkflowReport> {
    config.validate(sim.dim())?;
    let d = config.lofi_point.len();
    let ledger = RunLedger::open(&config.ledger_path)?;
    let calls = AtomicUsize::new(0);
    let mut warnings: Vec<String> = Vec::new();
    let mut notes: Vec<String> = Vec::new();

    // Stage 1: pilot sweeps, one axis at a time.
    let mut axis_datasets = Vec::with_capacity(d);
    for axis in 0..d {
        let points: Vec<Vec<f64>> = config.axis_sweeps[axis]
            .iter()
            .map(|&v| {
                let mut p = config.lofi_point.clone();
                p[axis] = v;
                p
            })
            .collect();
        let records = ensure_runs(sim, &ledger, &calls, &points, Stage::Pilot)?;
        let xs: Vec<f64> = config.axis_sweeps[axis].clone();
        let values: Vec<f64> = records.iter().map(|r| r.value).collect();
        axis_datasets.push(Dataset::univariate(&xs, &values)?);
    }

    let grid = config.grid.clone().unwrap_or_else(|| {
        let range = config
            .axis_sweeps
            .iter()
            .flat_map(|s| s.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        OrderGrid::default_for_range(range)
    });
    let estimate = estimate_axiswise(&axis_datasets, &grid, config.kernel_family)?;
    for (i, a) in estimate.axes.iter().enumerate() {
        if a.flat {
            warnings.push(format!(
                "axis {}: pilot sweep carried no order information; conservative smallest grid \
                 values were used",
                i + 1
            ));
        }
    }

    // Stage 2: candidate costs, then the budgeted design.
    let costs: Vec<f64> = match predicted_costs(sim, &config.candidates) {
        Some(costs) => {
            notes.push("candidate costs predicted from the cost model before running".into());
            costs
        }
        None => {
            warnings.push(
                "cost source is not predictive: running every candidate up front to measure \
                 costs (expensive)"
                    .into(),
            );
            let records = ensure_runs(sim, &ledger, &calls, &config.candidates, Stage::Extra)?;
            records.iter().map(|r| r.cost_seconds).collect()
        }
    };
    let problem = DesignProblem {
        candidates: config.candidates.clone(),
        costs,
        budget: config.budget,
        bound: estimate.bound.clone(),
        kernel: estimate.kernel.clone(),
    };
    let design = optimize_design(&problem)?;
    if let Some(w) = &design.warning {
        warnings.push(w.clone());
    }

    // Stage 3: execute the design and fit.
    let final_dataset = if design.selected.is_empty() {
        warnings.push(
            "empty design: the budget admits no candidate run; extrapolating from pilot data \
             only"
                .into(),
        );
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for (axis, ds) in axis_datasets.iter().enumerate() {
            for (k, p) in ds.points.iter().enumerate() {
                let mut full = config.lofi_point.clone();
                full[axis] = p[0];
                if !pts.contains(&full) {
                    pts.push(full);
                    vals.push(ds.values[k]);
                }
            }
        }
        Dataset::new(pts, vals)?
    } else {
        let points: Vec<Vec<f64>> = design
            .selected
            .iter()
            .map(|&i| config.candidates[i].clone())
            .collect();
        let records = ensure_runs(sim, &ledger, &calls, &points, Stage::Design)?;
        Dataset::new(points, records.iter().map(|r| r.value).collect())?
    };
    let executed = final_dataset.points.clone();

    let model = Model::new(estimate.bound.clone(), estimate.kernel.clone());
    let posterior = fit(&final_dataset, &model)?;
    let interval = posterior.credible_interval(config.alpha)?;

    let records = ledger.records();
    let pilot_cost_seconds: f64 = records
        .iter()
        .filter(|r| r.stage == Stage::Pilot)
        .map(|r| r.cost_seconds)
        .sum();
    let design_cost_seconds: f64 = executed
        .iter()
        .filter_map(|p| ledger.find(p))
        .map(|r| r.cost_seconds)
        .sum();
    notes.push(
        "pilot cost is excluded from the design budget under the negligible-pilot assumption; \
         judge the reported pilot/budget ratio"
            .into(),
    );

    Ok(WorkflowReport {
        axes: estimate.axes,
        bound: estimate.bound,
        kernel: estimate.kernel,
        design,
        executed,
        mean_at_zero: posterior.mean_at_zero,
        sd_at_zero: posterior.var_at_zero.sqrt(),
        sigma2: posterior.sigma2,
        objective: posterior.objective,
        interval,
        pilot_cost_seconds,
        design_cost_seconds,
        pilot_budget_ratio: pilot_cost_seconds / config.budget,
        simulator_calls: calls.load(Ordering::SeqCst),
        warnings,
        notes,
    })
}

fn predicted_costs(sim: &dyn Simulator, candidates: &[Vec<f64>]) -> Option<Vec<f64>> {
    candidates.iter().map(|c| sim.predict_cost(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::SimOutcome;
    use std::sync::atomic::AtomicUsize;

    /// In-process separable test simulator f(x) = 1 + x1 + x2².
    struct Synthetic {
        calls: AtomicUsize,
    }

    impl Synthetic {
        fn new() -> Self {
            Synthetic {
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Simulator for Synthetic {
        fn dim(&self) -> usize {
            2
        }

        fn run(&self, x: &[f64]) -> Result<SimOutcome> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(SimOutcome {
                value: 1.0 + x[0] + x[1] * x[1],
                cost_seconds: 1.0 / (x[0] * x[1]),
                wall_seconds: 0.0,
                exit_status: 0,
            })
        }

        fn predict_cost(&self, x: &[f64]) -> Option<f64> {
            Some(1.0 / (x[0] * x[1]))
        }
    }

    fn config(dir: &std::path::Path, budget: f64) -> WorkflowConfig {
        let sweep = vec![1.0, 0.5, 0.25, 0.125];
        let grid: Vec<Vec<f64>> = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .flat_map(|&a| [0.25, 0.5, 0.75, 1.0].iter().map(move |&b| vec![a, b]))
            .collect();
        WorkflowConfig {
            lofi_point: vec![1.0, 1.0],
            axis_sweeps: vec![sweep.clone(), sweep],
            grid: None,
            kernel_family: KernelFamily::Matern,
            candidates: grid,
            budget,
            alpha: 0.05,
            ledger_path: dir.join("runs.jsonl"),
        }
    }

    #[test]
    fn end_to_end_recovers_orders_and_limit() {
        let dir = tempfile::tempdir().unwrap();
        let sim = Synthetic::new();
        let cfg = config(dir.path(), 40.0);
        let report = run_workflow(&sim, &cfg).unwrap();

        assert_eq!(report.axes[0].r, 1.0, "first axis order");
        assert_eq!(report.axes[1].r, 2.0, "second axis order");
        assert!(
            report.design.selected.len() >= 4,
            "design {:?}",
            report.design.selected
        );
        assert!(
            (report.mean_at_zero - 1.0).abs() <= 1e-3,
            "extrapolated value {}",
            report.mean_at_zero
        );
        assert!(report.design.total_cost <= cfg.budget);
        assert!(report.pilot_budget_ratio > 0.0);
        assert!(
            report.interval.lo <= report.mean_at_zero && report.mean_at_zero <= report.interval.hi
        );
    }

    #[test]
    fn ledger_resume_spawns_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 40.0);
        let sim = Synthetic::new();
        let first = run_workflow(&sim, &cfg).unwrap();
        assert!(first.simulator_calls > 0);

        let sim2 = Synthetic::new();
        let second = run_workflow(&sim2, &cfg).unwrap();
        assert_eq!(second.simulator_calls, 0, "resume must reuse the ledger");
        assert_eq!(sim2.calls.load(Ordering::SeqCst), 0);
        assert_eq!(first.mean_at_zero, second.mean_at_zero);
        assert_eq!(first.design.selected, second.design.selected);
        assert_eq!(first.sigma2, second.sigma2);
    }

    #[test]
    fn tiny_budget_degrades_to_pilot_only() {
        let dir = tempfile::tempdir().unwrap();
        // cheapest candidate costs 1/(1·1) = 1
        let cfg = config(dir.path(), 0.5);
        let sim = Synthetic::new();
        let report = run_workflow(&sim, &cfg).unwrap();
        assert!(report.design.selected.is_empty());
        assert!(
            report.warnings.iter().any(|w| w.contains("pilot")),
            "warnings: {:?}",
            report.warnings
        );
        // still produces a finite extrapolation from the pilots
        assert!(report.mean_at_zero.is_finite());
        assert!(!report.executed.is_empty());
    }

    /// A simulator without a predictive cost model forces the measured
    /// pre-run pass over every candidate.
    struct MeasuredOnly {
        inner: Synthetic,
    }

    impl Simulator for MeasuredOnly {
        fn dim(&self) -> usize {
            2
        }
        fn run(&self, x: &[f64]) -> Result<SimOutcome> {
            self.inner.run(x)
        }
    }

    #[test]
    fn measured_costs_pre_run_all_candidates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 40.0);
        let sim = MeasuredOnly {
            inner: Synthetic::new(),
        };
        let report = run_workflow(&sim, &cfg).unwrap();
        assert!(
            report.warnings.iter().any(|w| w.contains("measure costs")),
            "warnings: {:?}",
            report.warnings
        );
        // every candidate has a ledger entry, so the design stage reuses them
        let ledger = RunLedger::open(&cfg.ledger_path).unwrap();
        for c in &cfg.candidates {
            assert!(
                ledger.find(c).is_some(),
                "candidate {c:?} missing from ledger"
            );
        }
        assert!((report.mean_at_zero - 1.0).abs() < 1e-3);
    }

    #[test]
    fn partial_ledger_resumes_with_only_missing_runs() {
        let dir = tempfile::tempdir().unwrap();
        // First pass: budget admits nothing, so only pilot runs land in
        // the ledger.
        let mut cfg = config(dir.path(), 0.5);
        let sim = Synthetic::new();
        let first = run_workflow(&sim, &cfg).unwrap();
        assert!(first.design.selected.is_empty());
        let pilot_calls = first.simulator_calls;
        assert!(pilot_calls > 0);

        let after_first: Vec<Vec<f64>> = RunLedger::open(&cfg.ledger_path)
            .unwrap()
            .records()
            .iter()
            .map(|r| r.x.clone())
            .collect();

        // Second pass with a real budget: pilots (and any design point
        // that coincides with one) come from the ledger; only genuinely
        // new fidelities execute.
        cfg.budget = 40.0;
        let sim2 = Synthetic::new();
        let second = run_workflow(&sim2, &cfg).unwrap();
        assert!(!second.design.selected.is_empty());
        let missing = second
            .executed
            .iter()
            .filter(|p| !after_first.contains(p))
            .count();
        assert_eq!(
            second.simulator_calls, missing,
            "resume should run exactly the design points absent from the ledger"
        );
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let sim = Synthetic::new();
        let mut cfg = config(dir.path(), 10.0);
        cfg.axis_sweeps.pop();
        assert!(run_workflow(&sim, &cfg).is_err());

        let mut cfg = config(dir.path(), 10.0);
        cfg.lofi_point = vec![1.0];
        assert!(run_workflow(&sim, &cfg).is_err());

        let mut cfg = config(dir.path(), 10.0);
        cfg.budget = 0.0;
        assert!(run_workflow(&sim, &cfg).is_err());
    }
}
