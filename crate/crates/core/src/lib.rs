//! A desk-scale laboratory for sequential decision making under uncertainty:
//! Bayes mixtures over finite model classes, loss-minimizing prediction, and
//! finite-horizon expectimax planning, with a reproducible experiment
//! harness.

pub mod config;
pub mod env;
pub mod environments;
pub mod error;
pub mod harness;
pub mod mixture;
pub mod planner;
pub mod predictor;
pub mod report;
pub mod scalar;
pub mod types;
mod util;

pub use env::{absorb_loss, validate_env, AbsorbedEnv, Env, Law, LossMatrix, LossSpec, TableEnv};
pub use error::{Error, Result};
pub use mixture::{prefix_code_weights, MixCtx, Mixture, ModelClass, WeightScheme};
pub use planner::{
    brute_force_value, expectimax_value, extract_expectimax_policy, greedy_reduction_check,
    select_action, value_iteration_mdp, HorizonMode, LossSource, PlanResult, PlannerConfig,
};
pub use predictor::{
    regret_report, run_prediction, sample_stream, threshold_gamma, LossLedger, PredictorPolicy,
};
pub use report::{ExperimentReport, OutputFormat, RunMeta, Verdict};
pub use scalar::Scalar;
pub use types::{Action, Alphabet, HistoryTape, HistoryViews, LossGrid, Percept, Spaces};

/// Artifact version stamped into every report header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
