//! Experiment orchestration: configs, non-IID partitioning, the per-round
//! lifecycle, baselines, and metric/cost accounting.

pub mod config;
pub mod metrics;
pub mod partition;
pub mod sim;

use thiserror::Error;

use crate::adversary::AdversaryError;
use crate::chain::ChainError;
use crate::community::CommunityError;
use crate::consensus::ConsensusError;
use crate::learning::LearnError;

pub use config::{
    nearest_odd, DataConfig, DerivedSizes, ExperimentConfig, Framework, GenesisCommittee,
    PartitionScheme,
};
pub use metrics::{write_metrics_csv, MetricsRow, RoundCostReport};
pub use partition::partition_data;
pub use sim::{prepare_data, run_experiment, ExperimentOutput, FrameworkRun, PreparedData};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error at line {line}, column {column}: {msg}")]
    Config {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("round {round} could not gather k qualified updates in {attempts} attempts")]
    ExperimentFailure { round: u64, attempts: u32 },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Community(#[from] CommunityError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("io error: {0}")]
    Io(String),
}
