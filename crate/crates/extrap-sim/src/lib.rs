//! Client for external black-box simulators plus the budgeted
//! pilot → design → execute workflow built on top of the `extrap` models.

pub mod error;
pub mod ledger;
pub mod simulator;
pub mod workflow;

pub use error::{Error, Result};
pub use ledger::{RunLedger, RunRecord, Stage};
pub use simulator::{
    CostModel, CostSource, CostTerm, ParseRule, SimOutcome, Simulator, SimulatorSpec,
    SubprocessSimulator,
};
pub use workflow::{run_workflow, WorkflowConfig, WorkflowReport};
