//! Scenario files, run manifests, the end-to-end pipeline and the batch
//! driver behind the `blowup-lab` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod manifest;
pub mod pipeline;
pub mod scenario;

pub use batch::{batch, scenario_files, SummaryRow};
pub use manifest::{RunManifest, RunStatus};
pub use pipeline::{run, run_scenario};
pub use scenario::{load_scenario, parse_scenario, DiagnosticPlan, InitialData, ProfilePlan, Scenario};
