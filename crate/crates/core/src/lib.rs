//! Optimal social-distancing control for the SVIR epidemic model.
//!
//! The crate covers the uncontrolled and controlled dynamics
//! ([`model`]), the cost functional and its decomposition ([`cost`]), the
//! Pontryagin conditions ([`pmp`], [`singular`]), a forward-backward sweep
//! solver ([`fbs`]), parameter calibration from compartment series
//! ([`calibration`]) and the scenario runner behind the `svir` command
//! ([`scenario`], [`io`]).

pub mod calibration;
pub mod cost;
pub mod error;
pub mod fbs;
pub mod io;
pub mod model;
pub mod nnls;
pub mod pmp;
mod rk4;
pub mod scenario;
pub mod singular;

pub use calibration::{BaselineWindow, EstimationResult, ObservedSeries, Rates};
pub use cost::{CostBreakdown, CostShares, CostSpec, SocialCost};
pub use error::{Result, SvirError};
pub use fbs::{evaluate_constant_policy, solve, sweep_parameter, FbsConfig, SolutionPath};
pub use io::config::{ScenarioConfig, Strategy};
pub use model::{ControlPath, Equilibrium, EquilibriumKind, ModelParams, SvirState, TimeGrid};
pub use pmp::{CostateState, Regime, SwitchingDiagnostics, SwitchingTolerances};
pub use scenario::{CalibrationMode, RunReport};
