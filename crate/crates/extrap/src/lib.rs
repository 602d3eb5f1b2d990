//! Fitting numerical-analysis-informed Gaussian processes to simulator
//! output observed at multiple fidelities, and extrapolating to the
//! zero-discretisation continuum limit with calibrated uncertainty.
//!
//! The crate provides:
//! - radial and tensor-product covariance kernels ([`kernel`]),
//! - discretisation-error bounds ([`bound`]),
//! - the flat-prior-limit conditional model with scale estimation and
//!   credible intervals ([`gp`]),
//! - quasi-likelihood estimation of unknown convergence orders ([`order`]),
//! - cost-constrained experimental design over candidate fidelities
//!   ([`design`]),
//! - classical sequence transformations as baselines ([`classical`]),
//! - tensor-grid extrapolation for vector-valued output ([`multioutput`]),
//! - built-in oracle problems and a convergence-study harness
//!   ([`problems`], [`study`]).

pub mod bound;
pub mod classical;
pub mod data;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod multioutput;
pub mod order;
pub mod parallel;
pub mod problems;
pub mod real;
pub mod reference;
pub mod stats;
pub mod study;
pub mod wendland;

pub use bound::ErrorBound;
pub use data::Dataset;
pub use error::{Error, Result};
pub use gp::{fit, CredibleInterval, Model, Posterior};
pub use kernel::{Kernel, KernelFamily, KernelSpec, LengthScales};
pub use real::Precision;
