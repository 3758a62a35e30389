//! Committee-consensus blockchain federated learning, desk scale.
//!
//! A deterministic simulator and library for federated training whose
//! global models and scored local updates live on a hash-linked ledger,
//! with update validation by a small elected committee instead of a
//! broadcast consensus. Includes the adversary models (Gaussian update
//! poisoning, committee collusion), an exact hypergeometric calculator for
//! the committee-takeover probability, a token incentive ledger, and an
//! experiment harness with mean / coordinate-median / stand-alone
//! baselines.

pub mod adversary;
pub mod chain;
pub mod community;
pub mod consensus;
pub mod harness;
pub mod learning;
pub mod params;
pub mod seed;

pub use adversary::{attack_success_prob, AttackAnalysisQuery, AttackConfig};
pub use chain::{Chain, ChainCheck, ChainError};
pub use community::{Community, NodeId};
pub use consensus::{Aggregator, CommitteeState, ElectionStrategy, QualificationPolicy};
pub use harness::{run_experiment, ExperimentConfig, Framework, HarnessError};
pub use learning::{Dataset, TrainConfig};
pub use params::ParamVector;
