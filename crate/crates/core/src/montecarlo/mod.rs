//! Concrete-`eps` instantiation, seeded simulation and dense oracles.
//!
//! Every path draws from its own ChaCha8 stream keyed by the batch seed and the
//! path index, so results do not depend on how paths are spread over workers.

mod kernel;
mod oracle;
mod sampling;
mod stats;

use thiserror::Error;

use crate::asymptotics::AsymptoticError;

pub use kernel::{ConcreteKernel, REGIME_GUARD};
pub use oracle::{oracle_hitting, oracle_mean_exit, oracle_visits, RESIDUAL_TOL};
pub use sampling::{
    choose_sampler, exit_paths, exit_time_samples, occupation_distribution, path_rng, run_paths,
    sample_path, Execution, ExitPath, OccupationResult, PathSample, Sampler, SimOptions, Start,
    RNG_NAME,
};
pub use stats::{ks_vs_exp1, mean_and_stderr, wilson_interval, Interval, Z95};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("evaluated probability {value} of transition {from} -> {to} exceeds 1 by more than 10% at eps = {eps}; eps is too large")]
    EpsTooLarge {
        eps: f64,
        from: usize,
        to: usize,
        value: f64,
    },
    #[error("cannot evaluate entry ({from}, {to}): {error}")]
    Evaluation {
        from: usize,
        to: usize,
        error: AsymptoticError,
    },
    #[error("row {0} has no positive finite mass")]
    BadRow(usize),
    #[error("state {state} has invalid mean {mean}")]
    BadMean { state: usize, mean: f64 },
    #[error("state {state}: {error}")]
    Sojourn { state: usize, error: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("path exceeded {0} embedded steps before leaving the set")]
    StepLimit(u64),
    #[error("linear system is singular or ill-conditioned")]
    Singular,
}
