//! Configurable, seeded experiments: config documents, cell execution,
//! artifacts, evaluation of saved policies and the oracle suites.

mod config;
mod run;
mod suites;

use std::path::Path;

pub use config::{Algorithm, BuiltEnv, EnvSpec, EvaluationConfig, ExperimentConfig};
pub use run::{
    evaluate_files, evaluate_policy, run_cell, run_experiment, summary_csv, CellResult, EvalReport, Gaps, RunOverrides,
    RunRecord, RunSummary, SummaryRow,
};
pub use suites::{
    bandit_regret, full_information_regret, oracle_check, regression_probe, Adversary, OracleCase, OracleReport, Suite,
    ARM_COUNTS, REGRESSION_PROBES, ROUNDS,
};

use crate::error::Result;

/// Builds an environment and writes its game document to `path`.
pub fn gen_env(spec: &EnvSpec, path: impl AsRef<Path>) -> Result<()> {
    spec.build()?.env.game.save(path)
}
