//! Experiment configuration: a JSON document mirroring these fields drives
//! `run_experiment` (see the `cli` crate's `run` subcommand).

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackConfig;
use crate::consensus::{Aggregator, ElectionVariant, QualificationPolicy};
use crate::learning::TrainConfig;

use super::HarnessError;

/// Which training frameworks a run executes over identical partitions and
/// seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Bflc,
    BasicFl,
    #[serde(rename = "cwmed")]
    CwMed,
    StandAlone,
}

impl Framework {
    pub fn label(self) -> &'static str {
        match self {
            Framework::Bflc => "bflc",
            Framework::BasicFl => "basic_fl",
            Framework::CwMed => "cwmed",
            Framework::StandAlone => "stand_alone",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    Synthetic {
        n_samples: usize,
        features: usize,
        classes: usize,
        separation: f64,
    },
    Csv {
        path: String,
        #[serde(default)]
        classes: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Per-node class proportions drawn from Dirichlet(alpha · 1).
    Dirichlet { alpha: f64 },
    /// Sort by label, cut into n_nodes × s shards, deal s per node.
    Shards { shards_per_node: usize },
}

/// How the first committee is chosen. The honest-majority analysis assumes
/// a majority-honest first committee, so that premise is a config choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenesisCommittee {
    #[default]
    Random,
    HonestMajority,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    /// Fraction of all nodes active each round.
    pub active_fraction: f64,
    /// Committee share of the active nodes; the size is rounded to the
    /// nearest odd integer (ties downward) unless overridden.
    pub committee_fraction: f64,
    #[serde(default)]
    pub committee_size_override: Option<usize>,
    pub rounds: u64,
    pub k_updates_per_round: u64,
    #[serde(default = "default_election")]
    pub election: ElectionVariant,
    #[serde(default)]
    pub qualification: QualificationPolicy,
    #[serde(default = "default_aggregator")]
    pub aggregator: Aggregator,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
    pub data: DataConfig,
    pub partition: PartitionScheme,
    /// Held-out fraction of the dataset used for the global accuracy
    /// metric; never partitioned to nodes.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub train: TrainConfig,
    #[serde(default = "default_reward_pool")]
    pub reward_pool: u64,
    #[serde(default = "default_permission_fee")]
    pub permission_fee: u64,
    #[serde(default = "default_initial_treasury")]
    pub initial_treasury: u64,
    #[serde(default)]
    pub genesis_committee: GenesisCommittee,
    #[serde(default = "default_frameworks")]
    pub frameworks: Vec<Framework>,
    /// Aborted rounds are re-run with a fresh active sample up to this cap.
    #[serde(default = "default_retry_cap")]
    pub retry_cap: u32,
    pub seed: u64,
}

fn default_election() -> ElectionVariant {
    ElectionVariant::ByScore
}

fn default_aggregator() -> Aggregator {
    Aggregator::Mean
}

fn default_test_fraction() -> f64 {
    0.25
}

fn default_reward_pool() -> u64 {
    1000
}

fn default_permission_fee() -> u64 {
    10
}

fn default_initial_treasury() -> u64 {
    1_000_000_000
}

fn default_frameworks() -> Vec<Framework> {
    vec![Framework::Bflc]
}

fn default_retry_cap() -> u32 {
    5
}

/// Round sizes derived from the config fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSizes {
    pub active_count: usize,
    pub committee_size: usize,
    pub trainers_per_round: usize,
}

/// Nearest odd integer to `x`, ties resolved downward, never below 1.
pub fn nearest_odd(x: f64) -> usize {
    let rounded = x.round().max(1.0) as i64;
    if rounded % 2 == 1 {
        rounded as usize
    } else {
        let lower = (rounded - 1).max(1);
        let upper = rounded + 1;
        if x - lower as f64 <= upper as f64 - x {
            lower as usize
        } else {
            upper as usize
        }
    }
}

impl ExperimentConfig {
    pub fn derived_sizes(&self) -> DerivedSizes {
        let active_count = ((self.active_fraction * self.n_nodes as f64).round() as usize)
            .clamp(2, self.n_nodes);
        let committee_size = self
            .committee_size_override
            .unwrap_or_else(|| nearest_odd(self.committee_fraction * active_count as f64))
            .clamp(1, active_count - 1);
        DerivedSizes {
            active_count,
            committee_size,
            trainers_per_round: active_count - committee_size,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::InvalidArgument(msg));
        if self.n_nodes < 2 {
            return fail("n_nodes must be at least 2".into());
        }
        if !(self.active_fraction > 0.0 && self.active_fraction <= 1.0) {
            return fail(format!(
                "active_fraction must lie in (0,1], got {}",
                self.active_fraction
            ));
        }
        if !(self.committee_fraction > 0.0 && self.committee_fraction < 1.0) {
            return fail(format!(
                "committee_fraction must lie in (0,1), got {}",
                self.committee_fraction
            ));
        }
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if self.k_updates_per_round == 0 {
            return fail("k_updates_per_round must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return fail(format!(
                "test_fraction must lie in [0,1), got {}",
                self.test_fraction
            ));
        }
        if self.retry_cap == 0 {
            return fail("retry_cap must be at least 1".into());
        }
        if self.frameworks.is_empty() {
            return fail("at least one framework must be selected".into());
        }
        self.qualification.validate()?;
        if let Some(attack) = &self.attack {
            attack.validate()?;
        }
        match &self.data {
            DataConfig::Synthetic {
                n_samples,
                features,
                classes,
                separation,
            } => {
                if *classes < 2 || *features == 0 || *n_samples < *classes {
                    return fail("synthetic data needs classes ≥ 2, features ≥ 1, and at least one sample per class".into());
                }
                if !separation.is_finite() || *separation < 0.0 {
                    return fail("separation must be finite and non-negative".into());
                }
            }
            DataConfig::Csv { path, .. } => {
                if path.is_empty() {
                    return fail("csv path must be non-empty".into());
                }
            }
        }
        let sizes = self.derived_sizes();
        if (sizes.trainers_per_round as u64) < self.k_updates_per_round {
            return fail(format!(
                "k_updates_per_round = {} exceeds the {} training nodes per round \
                 (active {} minus committee {})",
                self.k_updates_per_round,
                sizes.trainers_per_round,
                sizes.active_count,
                sizes.committee_size
            ));
        }
        Ok(())
    }

    /// Parses and validates a JSON config; parse errors carry the line and
    /// column.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config {
                line: e.line(),
                column: e.column(),
                msg: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self, HarnessError> {
        let mut text = String::new();
        File::open(&path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.as_ref().display())))?
            .read_to_string(&mut text)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}
