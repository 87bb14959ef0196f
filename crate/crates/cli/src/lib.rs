//! Experiment harness for the `t2ta` association toolkit: Monte Carlo sweeps,
//! convergence studies, collective perception runs, likelihood ablations and
//! oracle agreement checks. Results are plain rows ready for CSV output.

pub mod algorithms;
pub mod convergence;
pub mod cp;
pub mod mc;
pub mod oracle;
pub mod output;
pub mod scoring;

pub use algorithms::{run_algorithm, AlgorithmKind, AlgorithmParams, Outcome};
pub use convergence::{run_convergence, ConvergenceRow};
pub use cp::{
    run_cp_experiment, score_cp_frames, CpFrameRow, CpOutput, CpRow, CpSpec, WorldSource,
};
pub use mc::{
    ablation_grid, mean_of, run_likelihood_ablation, run_mc_experiment, summarize_mc, FrameSource,
    McOutput, McRow, McScenario, McSpec, McSummaryRow,
};
pub use oracle::{oracle_check, OracleRow, OracleSpec, OracleSummary};

use serde::Serialize;

/// A run that did not complete.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub scenario: String,
    pub seed: u64,
    pub algorithm: String,
    pub error: String,
}

impl Failure {
    pub fn new(scenario: &str, seed: u64, algorithm: &str, error: &t2ta::Error) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            algorithm: algorithm.into(),
            error: error.to_string(),
        }
    }
}
