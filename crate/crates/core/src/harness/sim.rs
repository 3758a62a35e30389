//! The experiment driver: the per-round committee-consensus lifecycle plus
//! the unfiltered (mean / coordinate-median) and stand-alone baselines,
//! all run over identical partitions and derived seed streams so that the
//! aggregation rule is the only difference.

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{self, AttackConfig};
use crate::chain::Chain;
use crate::community::{Community, NodeId};
use crate::consensus::{
    elect_committee, Aggregator, CommitteeState, ConsensusError, ElectionStrategy, SubmitOutcome,
};
use crate::learning::{self, Dataset, TrainConfig};
use crate::seed;

use super::config::{DataConfig, ExperimentConfig, Framework, GenesisCommittee};
use super::metrics::{MetricsRow, RoundCostReport};
use super::partition::partition_data;
use super::HarnessError;

// Independent random-stream tags, mixed with the experiment seed.
const STREAM_GENESIS_MODEL: u64 = 1;
const STREAM_TEST_SPLIT: u64 = 2;
const STREAM_PARTITION: u64 = 3;
const STREAM_MALICIOUS: u64 = 4;
const STREAM_GENESIS_COMMITTEE: u64 = 5;
const STREAM_ACTIVE: u64 = 6;
const STREAM_TRAIN: u64 = 7;
const STREAM_POISON: u64 = 8;
const STREAM_COLLUDE: u64 = 9;
const STREAM_ELECT: u64 = 10;
const STREAM_CALIBRATE: u64 = 11;

/// Node id used as the stand-alone trainer's seed tag.
const STANDALONE_TAG: u64 = u64::MAX;

/// Everything one framework produced in one run.
#[derive(Debug, Clone)]
pub struct FrameworkRun {
    pub framework: Framework,
    pub metrics: Vec<MetricsRow>,
    /// Present for the committee-consensus framework only.
    pub chain: Option<Chain>,
    pub community: Option<Community>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<FrameworkRun>,
}

impl ExperimentOutput {
    pub fn run(&self, framework: Framework) -> Option<&FrameworkRun> {
        self.runs.iter().find(|r| r.framework == framework)
    }
}

/// The deterministic data-preparation stage shared by every framework:
/// full dataset, held-out test split, per-node partitions, the malicious
/// subset, and the resolved poisoning sigma.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub node_data: Vec<Dataset>,
    pub malicious: BTreeSet<NodeId>,
    pub sigma: f64,
}

/// Builds the experiment's data environment; a pure function of the
/// config.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, HarnessError> {
    cfg.validate()?;
    let full = load_data(cfg)?;
    let (train, test) = split_test(&full, cfg.test_fraction, derive(cfg, &[STREAM_TEST_SPLIT]))?;
    if cfg.n_nodes > train.n() {
        return Err(HarnessError::InvalidArgument(format!(
            "{} nodes need at least {} training samples, have {}",
            cfg.n_nodes,
            cfg.n_nodes,
            train.n()
        )));
    }
    let node_data = partition_data(
        &train,
        cfg.n_nodes,
        &cfg.partition,
        derive(cfg, &[STREAM_PARTITION]),
    )?;
    let malicious = malicious_set(cfg);
    let shape = learning::model_shape(train.d(), train.n_classes());
    let sigma = resolve_sigma(cfg, &node_data, &shape)?;
    Ok(PreparedData {
        train,
        test,
        node_data,
        malicious,
        sigma,
    })
}

/// Runs every configured framework over identical data, partitions, and
/// seed streams. Output is a pure function of the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let data = prepare_data(cfg)?;
    let shape = learning::model_shape(data.train.d(), data.train.n_classes());
    let mut runs = Vec::with_capacity(cfg.frameworks.len());
    for &framework in &cfg.frameworks {
        let run = match framework {
            Framework::Bflc => run_bflc(
                cfg,
                &data.node_data,
                &data.test,
                &data.malicious,
                &shape,
                data.sigma,
            )?,
            Framework::BasicFl => run_unfiltered(
                cfg,
                Framework::BasicFl,
                Aggregator::Mean,
                &data.node_data,
                &data.test,
                &data.malicious,
                &shape,
                data.sigma,
            )?,
            Framework::CwMed => run_unfiltered(
                cfg,
                Framework::CwMed,
                Aggregator::CwMed,
                &data.node_data,
                &data.test,
                &data.malicious,
                &shape,
                data.sigma,
            )?,
            Framework::StandAlone => run_standalone(cfg, &data.train, &data.test, &shape)?,
        };
        runs.push(run);
    }
    Ok(ExperimentOutput { runs })
}

fn derive(cfg: &ExperimentConfig, tags: &[u64]) -> u64 {
    seed::derive(cfg.seed, tags)
}

fn load_data(cfg: &ExperimentConfig) -> Result<Dataset, HarnessError> {
    match &cfg.data {
        DataConfig::Synthetic {
            n_samples,
            features,
            classes,
            separation,
        } => Ok(learning::generate_synthetic(
            derive(cfg, &[STREAM_TEST_SPLIT, 0]),
            *n_samples,
            *features,
            *classes,
            *separation,
        )?),
        DataConfig::Csv { path, classes } => Ok(Dataset::from_csv_path(path, *classes)?),
    }
}

/// Splits off a held-out test set (never partitioned to nodes).
fn split_test(
    data: &Dataset,
    test_fraction: f64,
    seed_value: u64,
) -> Result<(Dataset, Dataset), HarnessError> {
    if test_fraction == 0.0 {
        return Ok((data.clone(), data.clone()));
    }
    let n = data.n();
    let test_n = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut seed::rng(seed_value));
    let mut test_rows = order[..test_n].to_vec();
    let mut train_rows = order[test_n..].to_vec();
    test_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok((data.subset(&train_rows)?, data.subset(&test_rows)?))
}

/// The seeded malicious subset, fixed for the whole experiment.
fn malicious_set(cfg: &ExperimentConfig) -> BTreeSet<NodeId> {
    let Some(attack) = &cfg.attack else {
        return BTreeSet::new();
    };
    let count = adversary::floor_portion(cfg.n_nodes as u64, attack.malicious_fraction) as usize;
    if count == 0 {
        return BTreeSet::new();
    }
    let mut rng = seed::rng(derive(cfg, &[STREAM_MALICIOUS, attack.seed]));
    rand::seq::index::sample(&mut rng, cfg.n_nodes, count)
        .into_iter()
        .map(|i| NodeId(i as u64))
        .collect()
}

/// Resolves the poisoning sigma. In relative mode, sigma multiplies the
/// median honest-delta coordinate scale: each probe node trains once from
/// the genesis model, its delta's coordinate scale is the RMS over
/// coordinates, and the median across probe nodes (up to 32) is taken.
pub fn honest_delta_scale(
    cfg: &ExperimentConfig,
    node_data: &[Dataset],
    shape: &[usize],
) -> Result<f64, HarnessError> {
    let genesis = learning::init_model(derive(cfg, &[STREAM_GENESIS_MODEL]), shape)?;
    let probe = node_data.len().min(32);
    let mut scales = Vec::with_capacity(probe);
    for (node, data) in node_data.iter().enumerate().take(probe) {
        let tcfg = TrainConfig {
            seed: derive(cfg, &[STREAM_CALIBRATE, node as u64]),
            ..cfg.train.clone()
        };
        let delta = learning::local_train(&genesis, data, &tcfg)?;
        let rms = (delta.values().iter().map(|v| v * v).sum::<f64>() / delta.len() as f64).sqrt();
        scales.push(rms);
    }
    scales.sort_by(|a, b| a.partial_cmp(b).expect("finite deltas"));
    Ok(scales[scales.len() / 2])
}

fn resolve_sigma(
    cfg: &ExperimentConfig,
    node_data: &[Dataset],
    shape: &[usize],
) -> Result<f64, HarnessError> {
    let Some(attack) = &cfg.attack else {
        return Ok(0.0);
    };
    if !attack.sigma_is_relative {
        return Ok(attack.noise_sigma);
    }
    Ok(attack.noise_sigma * honest_delta_scale(cfg, node_data, shape)?)
}

/// Committee for round 0. `HonestMajority` guarantees strictly more than
/// half the seats go to honest nodes; the rest are sampled from everyone
/// remaining.
fn genesis_committee(
    cfg: &ExperimentConfig,
    malicious: &BTreeSet<NodeId>,
    committee_size: usize,
) -> Result<BTreeSet<NodeId>, HarnessError> {
    let all: Vec<NodeId> = (0..cfg.n_nodes as u64).map(NodeId).collect();
    let mut rng = seed::rng(derive(cfg, &[STREAM_GENESIS_COMMITTEE]));
    match cfg.genesis_committee {
        GenesisCommittee::Random => {
            Ok(rand::seq::index::sample(&mut rng, all.len(), committee_size)
                .into_iter()
                .map(|i| all[i])
                .collect())
        }
        GenesisCommittee::HonestMajority => {
            let honest: Vec<NodeId> = all
                .iter()
                .copied()
                .filter(|id| !malicious.contains(id))
                .collect();
            let majority = committee_size / 2 + 1;
            if honest.len() < majority {
                return Err(HarnessError::InvalidArgument(format!(
                    "honest-majority genesis committee needs {majority} honest nodes, have {}",
                    honest.len()
                )));
            }
            let mut committee: BTreeSet<NodeId> =
                rand::seq::index::sample(&mut rng, honest.len(), majority)
                    .into_iter()
                    .map(|i| honest[i])
                    .collect();
            let rest: Vec<NodeId> = all
                .iter()
                .copied()
                .filter(|id| !committee.contains(id))
                .collect();
            let need = committee_size - committee.len();
            committee.extend(
                rand::seq::index::sample(&mut rng, rest.len(), need)
                    .into_iter()
                    .map(|i| rest[i]),
            );
            Ok(committee)
        }
    }
}

/// Active nodes for one round: the sitting committee plus a fresh seeded
/// sample of the remaining nodes.
fn sample_active(
    n_nodes: usize,
    committee: &BTreeSet<NodeId>,
    active_count: usize,
    seed_value: u64,
) -> BTreeSet<NodeId> {
    let others: Vec<NodeId> = (0..n_nodes as u64)
        .map(NodeId)
        .filter(|id| !committee.contains(id))
        .collect();
    let need = active_count.saturating_sub(committee.len()).min(others.len());
    let mut active = committee.clone();
    let mut rng = seed::rng(seed_value);
    active.extend(
        rand::seq::index::sample(&mut rng, others.len(), need)
            .into_iter()
            .map(|i| others[i]),
    );
    active
}

fn run_bflc(
    cfg: &ExperimentConfig,
    node_data: &[Dataset],
    test: &Dataset,
    malicious: &BTreeSet<NodeId>,
    shape: &[usize],
    sigma: f64,
) -> Result<FrameworkRun, HarnessError> {
    let sizes = cfg.derived_sizes();
    let genesis = learning::init_model(derive(cfg, &[STREAM_GENESIS_MODEL]), shape)?;
    let mut chain = Chain::new(cfg.k_updates_per_round, genesis)?;

    let mut community = Community::new(cfg.permission_fee, cfg.initial_treasury);
    for node in 0..cfg.n_nodes as u64 {
        community.join(NodeId(node), cfg.permission_fee, 0)?;
    }
    community.appoint_manager(NodeId(0))?;

    let committee0 = genesis_committee(cfg, malicious, sizes.committee_size)?;
    let mut state = CommitteeState::new(committee0, 0, cfg.qualification)?;

    let mut metrics = Vec::with_capacity(cfg.rounds as usize);
    for _ in 0..cfg.rounds {
        let row = run_bflc_round(
            cfg,
            &mut chain,
            &mut state,
            &mut community,
            node_data,
            test,
            malicious,
            sigma,
        )?;
        metrics.push(row);
    }
    Ok(FrameworkRun {
        framework: Framework::Bflc,
        metrics,
        chain: Some(chain),
        community: Some(community),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_bflc_round(
    cfg: &ExperimentConfig,
    chain: &mut Chain,
    state: &mut CommitteeState,
    community: &mut Community,
    node_data: &[Dataset],
    test: &Dataset,
    malicious: &BTreeSet<NodeId>,
    sigma: f64,
) -> Result<MetricsRow, HarnessError> {
    let sizes = cfg.derived_sizes();
    let round = state.round();
    let global = chain.latest_model()?.1.clone();
    let members: Vec<NodeId> = state.members().iter().copied().collect();
    let member_data: Vec<&Dataset> = members
        .iter()
        .map(|m| &node_data[m.0 as usize])
        .collect();

    // Committee-median score of the current global model, the reference
    // point for relative qualification (honest evaluations).
    let member_global_scores: Vec<f64> = member_data
        .iter()
        .map(|d| learning::evaluate(&global, d))
        .collect::<Result<_, _>>()?;
    let global_score =
        crate::consensus::median(&member_global_scores).expect("nonempty committee");

    let collusion_on = cfg.attack.is_some_and(|a| a.collusion);
    let attack_seed = cfg.attack.map_or(0, |a| a.seed);

    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut poisoned_accepted = 0u64;
    let mut submissions = 0u64;
    let mut success = false;
    for attempt in 0..cfg.retry_cap {
        let active = sample_active(
            cfg.n_nodes,
            state.members(),
            sizes.active_count,
            derive(cfg, &[STREAM_ACTIVE, round, attempt as u64]),
        );
        let trainers: Vec<NodeId> = active
            .iter()
            .copied()
            .filter(|id| !state.members().contains(id))
            .collect();

        accepted = 0;
        rejected = 0;
        poisoned_accepted = 0;
        submissions = 0;
        for &trainer in &trainers {
            if accepted == chain.k() {
                break;
            }
            let tcfg = TrainConfig {
                seed: derive(cfg, &[STREAM_TRAIN, round, trainer.0]),
                ..cfg.train.clone()
            };
            let mut delta = learning::local_train(&global, &node_data[trainer.0 as usize], &tcfg)?;
            let poisoned = cfg.attack.is_some() && malicious.contains(&trainer);
            if poisoned {
                delta = adversary::poison_delta(
                    &delta,
                    sigma,
                    derive(cfg, &[STREAM_POISON, attack_seed, round, trainer.0]),
                )?;
            }

            let candidate = global.add(&delta).map_err(learning::LearnError::from)?;
            let mut member_scores = Vec::with_capacity(members.len());
            for (mi, &member) in members.iter().enumerate() {
                let score = if collusion_on && malicious.contains(&member) {
                    let attack: &AttackConfig = cfg.attack.as_ref().expect("collusion_on");
                    if poisoned || attack.suppress_honest {
                        attack.collusion_score(
                            poisoned,
                            0.0,
                            derive(cfg, &[STREAM_COLLUDE, attack_seed, round, trainer.0, member.0]),
                        )
                    } else {
                        learning::evaluate(&candidate, member_data[mi])?
                    }
                } else {
                    learning::evaluate(&candidate, member_data[mi])?
                };
                member_scores.push(score);
            }

            submissions += 1;
            match state.submit_scored(chain, trainer, delta, &member_scores, global_score)? {
                SubmitOutcome::Accepted { .. } => {
                    accepted += 1;
                    if poisoned {
                        poisoned_accepted += 1;
                    }
                }
                SubmitOutcome::Rejected { .. } => rejected += 1,
                SubmitOutcome::RoundClosed => {
                    submissions -= 1;
                    break;
                }
            }
        }

        if accepted == chain.k() {
            success = true;
            break;
        }
        // round aborted: drop this round's partial blocks and resample
        chain.rollback(round)?;
        state.reset_round();
    }
    if !success {
        return Err(HarnessError::ExperimentFailure {
            round,
            attempts: cfg.retry_cap,
        });
    }

    // capture rejected scores before finalize clears them, for the widened
    // candidate pool on election failure
    let rejected_scores: BTreeMap<NodeId, f64> = state
        .rejected()
        .iter()
        .map(|s| (s.uploader, s.median_score))
        .collect();

    let finalized = state.finalize_round(chain, cfg.aggregator)?;

    let strategy = ElectionStrategy {
        variant: cfg.election,
        committee_size: sizes.committee_size,
        seed: derive(cfg, &[STREAM_ELECT, round]),
    };
    let prev = state.members().clone();
    let elected = match elect_committee(&finalized.round_scores, &strategy, &prev) {
        Ok(set) => set,
        Err(ConsensusError::ElectionFailure { .. }) => {
            // widen the candidate pool to every scored submitter this round
            let mut widened = finalized.round_scores.clone();
            for (id, score) in rejected_scores {
                widened.entry(id).or_insert(score);
            }
            elect_committee(&widened, &strategy, &prev)?
        }
        Err(e) => return Err(e.into()),
    };
    *state = CommitteeState::new(elected, round + 1, cfg.qualification)?;

    community.distribute_rewards(&finalized.round_scores, cfg.reward_pool)?;

    let accuracy = learning::evaluate(&finalized.new_global, test)?;
    Ok(MetricsRow {
        round,
        accuracy,
        accepted,
        rejected,
        poisoned_accepted,
        committee: members,
        cost: RoundCostReport::new(
            sizes.trainers_per_round as u64,
            sizes.committee_size as u64,
            submissions * sizes.committee_size as u64,
        ),
    })
}

/// Basic federated learning and its coordinate-median variant: every
/// active node trains, every update is aggregated, no committee filters.
#[allow(clippy::too_many_arguments)]
fn run_unfiltered(
    cfg: &ExperimentConfig,
    framework: Framework,
    aggregator: Aggregator,
    node_data: &[Dataset],
    test: &Dataset,
    malicious: &BTreeSet<NodeId>,
    shape: &[usize],
    sigma: f64,
) -> Result<FrameworkRun, HarnessError> {
    let sizes = cfg.derived_sizes();
    let attack_seed = cfg.attack.map_or(0, |a| a.seed);
    let mut global = learning::init_model(derive(cfg, &[STREAM_GENESIS_MODEL]), shape)?;
    let mut metrics = Vec::with_capacity(cfg.rounds as usize);
    for round in 0..cfg.rounds {
        let mut rng = seed::rng(derive(cfg, &[STREAM_ACTIVE, round, 0]));
        let active: BTreeSet<NodeId> =
            rand::seq::index::sample(&mut rng, cfg.n_nodes, sizes.active_count)
                .into_iter()
                .map(|i| NodeId(i as u64))
                .collect();

        let mut deltas = Vec::with_capacity(active.len());
        let mut poisoned_count = 0u64;
        for &node in &active {
            let tcfg = TrainConfig {
                seed: derive(cfg, &[STREAM_TRAIN, round, node.0]),
                ..cfg.train.clone()
            };
            let mut delta = learning::local_train(&global, &node_data[node.0 as usize], &tcfg)?;
            if cfg.attack.is_some() && malicious.contains(&node) {
                delta = adversary::poison_delta(
                    &delta,
                    sigma,
                    derive(cfg, &[STREAM_POISON, attack_seed, round, node.0]),
                )?;
                poisoned_count += 1;
            }
            deltas.push(delta);
        }
        global = match aggregator {
            Aggregator::Mean => learning::aggregate_mean(&global, &deltas)?,
            Aggregator::CwMed => learning::aggregate_cwmed(&global, &deltas)?,
        };
        let accuracy = learning::evaluate(&global, test)?;
        metrics.push(MetricsRow {
            round,
            accuracy,
            accepted: active.len() as u64,
            rejected: 0,
            poisoned_accepted: poisoned_count,
            committee: Vec::new(),
            cost: RoundCostReport::new(active.len() as u64, 0, 0),
        });
    }
    Ok(FrameworkRun {
        framework,
        metrics,
        chain: None,
        community: None,
    })
}

/// Centralized reference: one trainer sees the whole (undivided) training
/// split every round.
fn run_standalone(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    shape: &[usize],
) -> Result<FrameworkRun, HarnessError> {
    let mut global = learning::init_model(derive(cfg, &[STREAM_GENESIS_MODEL]), shape)?;
    let mut metrics = Vec::with_capacity(cfg.rounds as usize);
    for round in 0..cfg.rounds {
        let tcfg = TrainConfig {
            seed: derive(cfg, &[STREAM_TRAIN, round, STANDALONE_TAG]),
            ..cfg.train.clone()
        };
        let delta = learning::local_train(&global, train, &tcfg)?;
        global = global.add(&delta).map_err(learning::LearnError::from)?;
        let accuracy = learning::evaluate(&global, test)?;
        metrics.push(MetricsRow {
            round,
            accuracy,
            accepted: 1,
            rejected: 0,
            poisoned_accepted: 0,
            committee: Vec::new(),
            cost: RoundCostReport::new(1, 0, 0),
        });
    }
    Ok(FrameworkRun {
        framework: Framework::StandAlone,
        metrics,
        chain: None,
        community: None,
    })
}
