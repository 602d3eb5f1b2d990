//! Subcommand implementations.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use extrap::classical::{self, Sequence};
use extrap::data::Dataset;
use extrap::design::{candidates_from_csv, optimize_design, DesignProblem};
use extrap::diagnostics::{box_fill_distance, gamma_constant};
use extrap::gp::{fit as fit_model, Model, PosteriorSummary};
use extrap::kernel::KernelFamily;
use extrap::order::{estimate_order as order_search, BoundFamily, OrderGrid};
use extrap::parallel::configure_workers;
use extrap::problems::{central_difference_oracle, trapezoid_oracle, OracleProblem};
use extrap::real::Precision;
use extrap::study::{run_convergence_study, Method};
use extrap::ErrorBound;
use extrap_sim::{run_workflow, SimulatorSpec, SubprocessSimulator, WorkflowConfig};

use crate::output::{emit, require_file, to_pretty_json, CliError, CliResult};

fn load_dataset(path: &PathBuf) -> CliResult<Dataset> {
    require_file(path)?;
    Ok(Dataset::from_csv_path(path)?)
}

fn load_model(path: &PathBuf) -> CliResult<Model> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    let model: Model = serde_json::from_str(&text)?;
    Ok(model)
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    if s == "double" {
        return Ok(Precision::Double);
    }
    if let Some(digits) = s.strip_prefix("extended:") {
        let digits: u32 = digits
            .parse()
            .map_err(|_| format!("bad digit count in '{s}'"))?;
        if digits == 0 {
            return Err("extended precision needs at least one digit".into());
        }
        return Ok(Precision::Extended(digits));
    }
    Err(format!(
        "unknown precision '{s}'; expected 'double' or 'extended:<digits>'"
    ))
}

fn parse_family(s: &str) -> Result<KernelFamily, String> {
    match s {
        "matern" => Ok(KernelFamily::Matern),
        "wendland" => Ok(KernelFamily::Wendland),
        "gaussian" => Ok(KernelFamily::Gaussian),
        other => Err(format!("unknown kernel family '{other}'")),
    }
}

/// Comma-separated float list. A dedicated type keeps clap from
/// reinterpreting `Option<Vec<f64>>` as a repeated scalar argument.
#[derive(Clone, Debug)]
pub struct F64List(Vec<f64>);

fn parse_f64_list(s: &str) -> Result<F64List, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<Vec<f64>, String>>()
        .map(F64List)
}

/// Fitted-state file: everything needed to reproduce the fit bit for bit.
#[derive(Serialize, Deserialize)]
struct FittedState {
    dataset: Dataset,
    model: Model,
    summary: PosteriorSummary,
    diagnostics: Diagnostics,
}

#[derive(Serialize, Deserialize)]
struct Diagnostics {
    /// Box fill distance of the per-axis max-normalized design.
    box_fill: extrap::diagnostics::BoxFill,
    gamma_d: u64,
    /// Fill-distance level below which the acceleration guarantees bite:
    /// `1 / (gamma_d (r + 2 s))` with the bound's largest order and the
    /// kernel's largest smoothness.
    fill_threshold: f64,
    jitter_used: f64,
}

fn run_fit(dataset: &Dataset, model: &Model, alpha: f64, seed: u64) -> CliResult<FittedState> {
    let posterior = fit_model(dataset, model)?;
    let summary = posterior.summary(alpha)?;
    let d = dataset.dim();
    let mut maxima = vec![0.0f64; d];
    for p in &dataset.points {
        for (k, &c) in p.iter().enumerate() {
            maxima[k] = maxima[k].max(c);
        }
    }
    let normalized: Vec<Vec<f64>> = dataset
        .points
        .iter()
        .map(|p| p.iter().zip(&maxima).map(|(&c, &m)| c / m).collect())
        .collect();
    let box_fill = box_fill_distance(&normalized, d, seed)?;
    let gamma_d = gamma_constant(d as u32)?;
    let r = match &model.bound {
        ErrorBound::Monomial { order, .. } => *order,
        ErrorBound::Additive { orders, .. } | ErrorBound::Product { orders } => {
            orders.iter().cloned().fold(0.0, f64::max)
        }
        ErrorBound::Polynomial { terms } => terms
            .iter()
            .map(|t| t.exponents.iter().sum::<f64>())
            .fold(0.0, f64::max),
    };
    let s = match &model.kernel {
        extrap::Kernel::Radial(spec) => spec.smoothness,
        extrap::Kernel::Product { product } => {
            product.iter().map(|k| k.smoothness).max().unwrap_or(0)
        }
    };
    let fill_threshold = 1.0 / (gamma_d as f64 * (r + 2.0 * s as f64));
    Ok(FittedState {
        dataset: dataset.clone(),
        model: model.clone(),
        summary,
        diagnostics: Diagnostics {
            box_fill,
            gamma_d,
            fill_threshold,
            jitter_used: posterior.jitter_used,
        },
    })
}

#[derive(Args)]
pub struct FitArgs {
    /// Dataset CSV with header `x1,...,xd,f[,cost]`.
    #[arg(long)]
    data: PathBuf,
    /// Model JSON: {"bound": {...}, "kernel": {...}, "nugget_relative": 0}.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Seed for the randomized fill-distance diagnostic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    let state = run_fit(&dataset, &model, args.alpha, args.seed)?;
    emit(&args.out, &to_pretty_json(&state)?)
}

#[derive(Args)]
pub struct ExtrapolateArgs {
    /// Dataset CSV (alternative to --fitted).
    #[arg(long, conflicts_with = "fitted", requires = "model")]
    data: Option<PathBuf>,
    /// Model JSON (alternative to --fitted).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Fitted state produced by `extrap fit`.
    #[arg(long)]
    fitted: Option<PathBuf>,
    /// Also predict at this fidelity (comma-separated coordinates).
    #[arg(long, value_parser = parse_f64_list)]
    at: Option<F64List>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn extrapolate(args: ExtrapolateArgs) -> CliResult<()> {
    let (dataset, model) = match (&args.fitted, &args.data, &args.model) {
        (Some(fitted), None, None) => {
            require_file(fitted)?;
            let state: FittedState = serde_json::from_str(&std::fs::read_to_string(fitted)?)?;
            (state.dataset, state.model)
        }
        (None, Some(data), Some(model)) => (load_dataset(data)?, load_model(model)?),
        _ => {
            return Err(CliError::Usage(
                "pass either --fitted, or both --data and --model".into(),
            ))
        }
    };
    let posterior = fit_model(&dataset, &model)?;
    let summary = posterior.summary(args.alpha)?;
    let mut payload = serde_json::to_value(&summary)?;
    if let Some(F64List(x)) = &args.at {
        let (mean, variance) = posterior.predict(x)?;
        payload["at"] = serde_json::json!({
            "x": x,
            "mean": mean,
            "sd": variance.sqrt(),
        });
    }
    emit(
        &args.out,
        &format!("{}\n", serde_json::to_string_pretty(&payload)?),
    )
}

#[derive(Args)]
pub struct DesignArgs {
    /// Candidate CSV with header x1,...,xd,cost.
    #[arg(long)]
    candidates: PathBuf,
    /// Model JSON providing the error bound and kernel (scale is held
    /// fixed during design).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn design(args: DesignArgs) -> CliResult<()> {
    configure_workers(args.workers);
    require_file(&args.candidates)?;
    let file = std::fs::File::open(&args.candidates)?;
    let (candidates, costs) = candidates_from_csv(file)?;
    let model = load_model(&args.model)?;
    let problem = DesignProblem {
        candidates,
        costs,
        budget: args.budget,
        bound: model.bound,
        kernel: model.kernel,
    };
    let solution = optimize_design(&problem)?;
    let table = solution.table(&problem);
    if args.out.is_some() {
        emit(&args.out, &to_pretty_json(&solution)?)?;
        print!("{table}");
    } else {
        emit(&None, &to_pretty_json(&solution)?)?;
        eprint!("{table}");
    }
    Ok(())
}

#[derive(Args)]
pub struct EstimateOrderArgs {
    /// Dataset CSV; one varying fidelity axis for the monomial family.
    #[arg(long)]
    data: PathBuf,
    /// Grid JSON {"r_values": [...], "s_values": [...], "ell_values": [...]};
    /// defaults derive from the data range.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BoundFamilyArg::Monomial)]
    bound_family: BoundFamilyArg,
    #[arg(long, value_parser = parse_family, default_value = "matern")]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum BoundFamilyArg {
    Monomial,
    Additive,
    Product,
}

impl From<BoundFamilyArg> for BoundFamily {
    fn from(v: BoundFamilyArg) -> Self {
        match v {
            BoundFamilyArg::Monomial => BoundFamily::Monomial,
            BoundFamilyArg::Additive => BoundFamily::Additive,
            BoundFamilyArg::Product => BoundFamily::Product,
        }
    }
}

pub fn estimate_order(args: EstimateOrderArgs) -> CliResult<()> {
    configure_workers(args.workers);
    let dataset = load_dataset(&args.data)?;
    let grid = match &args.grid {
        Some(path) => {
            require_file(path)?;
            serde_json::from_str::<OrderGrid>(&std::fs::read_to_string(path)?)?
        }
        None => OrderGrid::default_for_dataset(&dataset),
    };
    let estimate = order_search(&dataset, &grid, args.bound_family.into(), args.kernel)?;
    // Surface rows flattened as [r_1..r_d, s, ell, log_ql] for plotting.
    let d = dataset.dim();
    let mut columns: Vec<String> = (1..=d).map(|i| format!("r{i}")).collect();
    columns.extend(["s".to_string(), "ell".to_string(), "log_ql".to_string()]);
    let rows: Vec<Vec<serde_json::Value>> = estimate
        .surface
        .iter()
        .map(|row| {
            let mut out: Vec<serde_json::Value> =
                row.r.iter().map(|r| serde_json::json!(r)).collect();
            out.push(serde_json::json!(row.s));
            out.push(serde_json::json!(row.ell));
            out.push(match row.log_ql {
                Some(v) => serde_json::json!(v),
                None => serde_json::Value::Null,
            });
            out
        })
        .collect();
    let payload = serde_json::json!({
        "r_hat": estimate.r_hat,
        "s_hat": estimate.s_hat,
        "ell_hat": estimate.ell_hat,
        "log_ql": estimate.log_ql,
        "sigma_hat": estimate.sigma_hat,
        "flat_data": estimate.flat_data,
        "surface": { "columns": columns, "rows": rows },
    });
    emit(
        &args.out,
        &format!("{}\n", serde_json::to_string_pretty(&payload)?),
    )
}

#[derive(Args)]
pub struct ClassicalArgs {
    /// Sequence CSV with header x,y.
    #[arg(long)]
    data: PathBuf,
    /// richardson | shanks | germain-bonne | thiele
    #[arg(long)]
    method: String,
    /// Elimination order for the tableau.
    #[arg(long, default_value_t = 1)]
    order: u32,
    /// Tableau depth; defaults to the full table.
    #[arg(long)]
    depth: Option<usize>,
    /// System size for the difference-power basis.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Rational degree for the mixed basis.
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn classical(args: ClassicalArgs) -> CliResult<()> {
    require_file(&args.data)?;
    let file = std::fs::File::open(&args.data)?;
    let seq = Sequence::from_csv_reader(file).map_err(CliError::from)?;
    let transformed = match args.method.as_str() {
        "richardson" => {
            let depth = args.depth.unwrap_or(seq.len().saturating_sub(1));
            classical::richardson(&seq, args.order, depth)?
        }
        "shanks" => classical::shanks(&seq)?,
        "germain-bonne" => {
            let value = classical::germain_bonne(&seq, args.n)?;
            Sequence {
                x: Some(vec![0.0]),
                y: vec![value],
            }
        }
        "thiele" => {
            let value = classical::thiele(&seq, args.p)?;
            Sequence {
                x: Some(vec![0.0]),
                y: vec![value],
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown method '{other}'; expected richardson, shanks, germain-bonne or thiele"
            )))
        }
    };
    emit(&args.out, &transformed.to_csv_string())
}

#[derive(Args)]
pub struct StudyArgs {
    /// central-difference | trapezoid
    #[arg(long)]
    problem: String,
    /// Smoothness of the probed function for the difference problem.
    #[arg(long, default_value_t = 2)]
    s_true: u32,
    #[arg(long, value_parser = parse_family, default_value = "matern")]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 2)]
    s: u32,
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    /// Base design, comma separated; defaults per problem.
    #[arg(long, value_parser = parse_f64_list)]
    design: Option<F64List>,
    /// Scale factors, comma separated; defaults per problem.
    #[arg(long, value_parser = parse_f64_list)]
    h: Option<F64List>,
    /// Comma-separated subset of gp,raw,richardson,shanks.
    #[arg(long, default_value = "gp,raw")]
    methods: String,
    #[arg(long, value_parser = parse_precision, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON slope summary destination.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn study(args: StudyArgs) -> CliResult<()> {
    configure_workers(args.workers);
    let problem: OracleProblem = match args.problem.as_str() {
        "central-difference" => central_difference_oracle(args.s_true),
        "trapezoid" => trapezoid_oracle(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown problem '{other}'; expected central-difference or trapezoid"
            )))
        }
    };
    let default_design: Vec<f64> = match args.problem.as_str() {
        "central-difference" => vec![0.2, 0.4, 0.6, 0.8, 1.0],
        _ => vec![1.0, 0.5, 0.25, 0.125, 0.0625],
    };
    let default_h: Vec<f64> = match args.problem.as_str() {
        "central-difference" => vec![1.0, 0.7, 0.5, 0.35, 0.25, 0.18],
        _ => vec![1.0, 0.5, 0.25],
    };
    let design = args.design.map_or(default_design, |l| l.0);
    let h = args.h.map_or(default_h, |l| l.0);

    // Warn about trapezoid fidelities that are not exact panel
    // reciprocals; they snap to the nearest integer panel count.
    for &hv in &h {
        for &b in &design {
            if let Some(w) = problem.snap_warning(hv * b) {
                eprintln!("warning: {w}");
            }
        }
    }

    let bound_order = 2; // both built-in problems are second order
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| match m.trim() {
            "gp" => Ok(Method::Gp {
                family: args.kernel,
                smoothness: args.s,
                ell: args.ell,
            }),
            "raw" => Ok(Method::Raw),
            "richardson" => Ok(Method::Richardson { order: bound_order }),
            "shanks" => Ok(Method::Shanks),
            other => Err(CliError::Usage(format!("unknown method '{other}'"))),
        })
        .collect::<CliResult<_>>()?;

    let result = run_convergence_study(&problem, &design, &h, &methods, args.precision)?;
    let mut csv_buf = Vec::new();
    result.to_csv_writer(&mut csv_buf).map_err(CliError::from)?;
    emit(&args.out, &String::from_utf8_lossy(&csv_buf))?;
    let summary = format!(
        "{}\n",
        serde_json::to_string_pretty(&result.summary_json())?
    );
    match &args.summary {
        Some(_) => emit(&args.summary, &summary)?,
        None => {
            if args.out.is_some() {
                print!("{summary}");
            } else {
                eprint!("{summary}");
            }
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct WorkflowArgs {
    /// Simulator spec JSON (command template, parse rule, timeout, cost source).
    #[arg(long)]
    simulator: PathBuf,
    /// Workflow config JSON (lo-fi point, sweeps, candidates, budget, ledger).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn workflow(args: WorkflowArgs) -> CliResult<()> {
    configure_workers(args.workers);
    require_file(&args.simulator)?;
    require_file(&args.config)?;
    let spec: SimulatorSpec = serde_json::from_str(&std::fs::read_to_string(&args.simulator)?)?;
    let config: WorkflowConfig = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
    let sim = SubprocessSimulator::new(spec)?;
    let report = run_workflow(&sim, &config)?;

    let human = format!(
        "extrapolated value: {} (sd {})\n{}% interval: [{}, {}]\ndesign: {} points, cost {:.4e} \
         of budget {:.4e}\npilot cost {:.4e} ({}% of budget, excluded from the budget)\nsimulator \
         calls this run: {}\nwarnings: {}\n",
        report.mean_at_zero,
        report.sd_at_zero,
        100.0 * (1.0 - report.interval.alpha),
        report.interval.lo,
        report.interval.hi,
        report.executed.len(),
        report.design_cost_seconds,
        config.budget,
        report.pilot_cost_seconds,
        (100.0 * report.pilot_budget_ratio).round(),
        report.simulator_calls,
        if report.warnings.is_empty() {
            "none".to_string()
        } else {
            report.warnings.join("; ")
        }
    );
    if args.out.is_some() {
        emit(&args.out, &to_pretty_json(&report)?)?;
        print!("{human}");
    } else {
        emit(&None, &to_pretty_json(&report)?)?;
        eprint!("{human}");
    }
    Ok(())
}
