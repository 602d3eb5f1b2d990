//! Command-line front end: fitting, extrapolation, order estimation,
//! experimental design, classical transforms, convergence studies and the
//! full simulator workflow.

mod commands;
mod output;

use clap::{Parser, Subcommand};

use crate::output::CliError;

#[derive(Parser)]
#[command(
    name = "extrap",
    version,
    about = "Multi-fidelity extrapolation of simulator output to the zero-discretisation limit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the extrapolation model to a dataset and save the fitted state.
    Fit(commands::FitArgs),
    /// Report the extrapolated value, uncertainty and credible interval.
    Extrapolate(commands::ExtrapolateArgs),
    /// Choose the cost-constrained optimal subset of candidate fidelities.
    Design(commands::DesignArgs),
    /// Estimate convergence order, smoothness and length scale by grid search.
    EstimateOrder(commands::EstimateOrderArgs),
    /// Classical sequence transformations (tableau, Shanks, rational, ...).
    Classical(commands::ClassicalArgs),
    /// Convergence study of built-in oracle problems across scales.
    Study(commands::StudyArgs),
    /// Pilot sweeps, budgeted design and final extrapolation against an
    /// external simulator.
    Workflow(commands::WorkflowArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Extrapolate(args) => commands::extrapolate(args),
        Command::Design(args) => commands::design(args),
        Command::EstimateOrder(args) => commands::estimate_order(args),
        Command::Classical(args) => commands::classical(args),
        Command::Study(args) => commands::study(args),
        Command::Workflow(args) => commands::workflow(args),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Domain(err)) => {
            let payload = serde_json::json!({
                "error": err.to_string(),
            });
            eprintln!("{payload}");
            std::process::exit(1);
        }
    }
}
