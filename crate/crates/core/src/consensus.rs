//! The committee consensus mechanism: a small elected node set validates
//! each submitted update against its own local data, the median of the
//! member scores becomes the update's score, qualified updates are packed
//! onto the chain, and the k-th acceptance triggers aggregation. The next
//! committee is elected from the round's accepted uploaders, so consecutive
//! committees never overlap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Chain, ChainError};
use crate::community::NodeId;
use crate::learning::{self, Dataset, LearnError};
use crate::params::ParamVector;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("node {0} is a committee member and may not train this round")]
    Forbidden(NodeId),
    #[error("node {0} already has an accepted update this round")]
    DuplicateSubmission(NodeId),
    #[error("election needs {needed} candidates but only {available} are eligible")]
    ElectionFailure { needed: usize, available: usize },
    #[error("round {round} has {have} of {need} accepted updates")]
    RoundIncomplete { round: u64, have: u64, need: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Rule deciding whether a scored update is packed on-chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QualificationPolicy {
    /// Accept when the median score reaches a fixed threshold.
    AbsoluteThreshold { theta: f64 },
    /// Accept when the median score retains at least `rho` of the
    /// committee-median score of the current global model.
    RelativeToGlobal { rho: f64 },
}

impl Default for QualificationPolicy {
    fn default() -> Self {
        QualificationPolicy::RelativeToGlobal { rho: 0.95 }
    }
}

impl QualificationPolicy {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        let v = match *self {
            QualificationPolicy::AbsoluteThreshold { theta } => theta,
            QualificationPolicy::RelativeToGlobal { rho } => rho,
        };
        if !(v > 0.0 && v <= 1.0) {
            return Err(ConsensusError::InvalidArgument(format!(
                "qualification parameter must lie in (0,1], got {v}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectionVariant {
    Random,
    ByScore,
}

/// How the next committee is chosen from the round's scored providers.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectionStrategy {
    pub variant: ElectionVariant,
    pub committee_size: usize,
    pub seed: u64,
}

/// Aggregation rule applied to the round's accepted deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    #[serde(rename = "cwmed")]
    CwMed,
}

/// Median with the even-count convention (mean of the two middle values).
/// Returns None on an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Scores one update: member `i`'s score is the validation accuracy of the
/// candidate model (global + delta) on member `i`'s own data, and the
/// median of the member scores becomes the update score.
pub fn score_update(
    member_data: &[Dataset],
    global: &ParamVector,
    delta: &ParamVector,
) -> Result<(Vec<f64>, f64), ConsensusError> {
    if member_data.is_empty() {
        return Err(ConsensusError::InvalidArgument(
            "at least one committee member is required".into(),
        ));
    }
    let candidate = global.add(delta).map_err(LearnError::from)?;
    let mut scores = Vec::with_capacity(member_data.len());
    for data in member_data {
        scores.push(learning::evaluate(&candidate, data)?);
    }
    let median_score = median(&scores).expect("nonempty scores");
    Ok((scores, median_score))
}

/// Committee-median validation accuracy of the current global model, the
/// reference point for `RelativeToGlobal` qualification.
pub fn global_median_score(
    member_data: &[Dataset],
    global: &ParamVector,
) -> Result<f64, ConsensusError> {
    if member_data.is_empty() {
        return Err(ConsensusError::InvalidArgument(
            "at least one committee member is required".into(),
        ));
    }
    let mut scores = Vec::with_capacity(member_data.len());
    for data in member_data {
        scores.push(learning::evaluate(global, data)?);
    }
    Ok(median(&scores).expect("nonempty scores"))
}

/// Whether a median score qualifies under the policy. `global_score` is
/// only consulted by `RelativeToGlobal`. Thresholds are inclusive.
pub fn qualify(median_score: f64, policy: &QualificationPolicy, global_score: f64) -> bool {
    match *policy {
        QualificationPolicy::AbsoluteThreshold { theta } => median_score >= theta,
        QualificationPolicy::RelativeToGlobal { rho } => median_score >= rho * global_score,
    }
}

/// One scored submission this round.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSubmission {
    pub uploader: NodeId,
    pub member_scores: Vec<f64>,
    pub median_score: f64,
}

/// Outcome of a submission.
#[derive(Debug, Clone, PartialEq)]
pub enum SubmitOutcome {
    Accepted { index: u64 },
    Rejected { median_score: f64 },
    RoundClosed,
}

/// The sitting committee plus this round's scored submissions.
#[derive(Debug, Clone)]
pub struct CommitteeState {
    members: BTreeSet<NodeId>,
    round: u64,
    accepted: Vec<ScoredSubmission>,
    rejected: Vec<ScoredSubmission>,
    policy: QualificationPolicy,
}

/// What a finalized round hands back to the caller: the new global model
/// and the accepted uploaders' scores (the election candidates).
#[derive(Debug, Clone)]
pub struct FinalizedRound {
    pub round: u64,
    pub new_global: ParamVector,
    pub round_scores: BTreeMap<NodeId, f64>,
}

impl CommitteeState {
    pub fn new(
        members: BTreeSet<NodeId>,
        round: u64,
        policy: QualificationPolicy,
    ) -> Result<Self, ConsensusError> {
        if members.is_empty() {
            return Err(ConsensusError::InvalidArgument(
                "committee must have at least one member".into(),
            ));
        }
        policy.validate()?;
        Ok(Self {
            members,
            round,
            accepted: Vec::new(),
            rejected: Vec::new(),
            policy,
        })
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn policy(&self) -> &QualificationPolicy {
        &self.policy
    }

    pub fn accepted(&self) -> &[ScoredSubmission] {
        &self.accepted
    }

    pub fn rejected(&self) -> &[ScoredSubmission] {
        &self.rejected
    }

    /// Submissions scored so far this round (accepted plus rejected).
    pub fn submissions(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }

    /// Discards this round's pending submissions (after a chain rollback).
    pub fn reset_round(&mut self) {
        self.accepted.clear();
        self.rejected.clear();
    }

    /// Applies an already-scored submission: qualifies the median against
    /// the policy, packs qualified updates onto the chain, and closes the
    /// round at the k-th acceptance. Committee members may not submit, and
    /// an uploader gets at most one accepted update per round.
    pub fn submit_scored(
        &mut self,
        chain: &mut Chain,
        uploader: NodeId,
        delta: ParamVector,
        member_scores: &[f64],
        global_score: f64,
    ) -> Result<SubmitOutcome, ConsensusError> {
        if self.members.contains(&uploader) {
            return Err(ConsensusError::Forbidden(uploader));
        }
        if self.accepted.iter().any(|s| s.uploader == uploader) {
            return Err(ConsensusError::DuplicateSubmission(uploader));
        }
        if member_scores.len() != self.members.len() {
            return Err(ConsensusError::InvalidArgument(format!(
                "expected {} member scores, got {}",
                self.members.len(),
                member_scores.len()
            )));
        }
        for &s in member_scores {
            if !(0.0..=1.0).contains(&s) || !s.is_finite() {
                return Err(ConsensusError::InvalidArgument(format!(
                    "member scores must lie in [0,1], got {s}"
                )));
            }
        }
        if chain.current_round() != self.round {
            return Err(ConsensusError::InvalidArgument(format!(
                "committee is at round {} but the chain is at round {}",
                self.round,
                chain.current_round()
            )));
        }
        if self.accepted.len() as u64 >= chain.k() {
            return Ok(SubmitOutcome::RoundClosed);
        }

        let median_score = median(member_scores).expect("nonempty member scores");
        let record = ScoredSubmission {
            uploader,
            member_scores: member_scores.to_vec(),
            median_score,
        };
        if qualify(median_score, &self.policy, global_score) {
            let index = chain.append_update_block(self.round, delta, uploader, median_score)?;
            self.accepted.push(record);
            Ok(SubmitOutcome::Accepted { index })
        } else {
            self.rejected.push(record);
            Ok(SubmitOutcome::Rejected { median_score })
        }
    }

    /// Honest submission path: scores the update against every member's
    /// data via `score_update`, then applies `submit_scored`.
    pub fn submit_update(
        &mut self,
        chain: &mut Chain,
        member_data: &[Dataset],
        global: &ParamVector,
        uploader: NodeId,
        delta: ParamVector,
    ) -> Result<SubmitOutcome, ConsensusError> {
        if member_data.len() != self.members.len() {
            return Err(ConsensusError::InvalidArgument(format!(
                "expected {} member datasets, got {}",
                self.members.len(),
                member_data.len()
            )));
        }
        let (member_scores, _) = score_update(member_data, global, &delta)?;
        let global_score = match self.policy {
            QualificationPolicy::RelativeToGlobal { .. } => {
                global_median_score(member_data, global)?
            }
            QualificationPolicy::AbsoluteThreshold { .. } => 0.0,
        };
        self.submit_scored(chain, uploader, delta, &member_scores, global_score)
    }

    /// Aggregates the round's k accepted deltas into the next global model
    /// and appends its model block. The state's pending lists are cleared
    /// and the committee advances to the next round.
    pub fn finalize_round(
        &mut self,
        chain: &mut Chain,
        aggregator: Aggregator,
    ) -> Result<FinalizedRound, ConsensusError> {
        if chain.current_round() != self.round {
            return Err(ConsensusError::InvalidArgument(format!(
                "committee is at round {} but the chain is at round {}",
                self.round,
                chain.current_round()
            )));
        }
        let have = chain.updates_in_current_round();
        if have < chain.k() {
            return Err(ConsensusError::RoundIncomplete {
                round: self.round,
                have,
                need: chain.k(),
            });
        }
        let (_, global) = chain.latest_model()?;
        let global = global.clone();
        let deltas: Vec<ParamVector> = chain
            .updates_of_round(self.round)?
            .iter()
            .map(|b| b.as_update().expect("update block").0.clone())
            .collect();
        let new_global = match aggregator {
            Aggregator::Mean => learning::aggregate_mean(&global, &deltas)?,
            Aggregator::CwMed => learning::aggregate_cwmed(&global, &deltas)?,
        };
        chain.append_model_block(self.round + 1, new_global.clone())?;

        let round_scores = self
            .accepted
            .iter()
            .map(|s| (s.uploader, s.median_score))
            .collect();
        let finalized = FinalizedRound {
            round: self.round,
            new_global,
            round_scores,
        };
        self.accepted.clear();
        self.rejected.clear();
        self.round += 1;
        Ok(finalized)
    }
}

/// Elects the next committee from the round's scored providers. Previous
/// members are never eligible (they did not train this round). `Random`
/// draws uniformly with the strategy seed; `ByScore` takes the top scorers,
/// ties broken toward the lower NodeId.
pub fn elect_committee(
    round_scores: &BTreeMap<NodeId, f64>,
    strategy: &ElectionStrategy,
    prev_members: &BTreeSet<NodeId>,
) -> Result<BTreeSet<NodeId>, ConsensusError> {
    if strategy.committee_size == 0 {
        return Err(ConsensusError::InvalidArgument(
            "committee size must be at least 1".into(),
        ));
    }
    let candidates: Vec<(NodeId, f64)> = round_scores
        .iter()
        .filter(|(id, _)| !prev_members.contains(id))
        .map(|(&id, &s)| (id, s))
        .collect();
    if candidates.len() < strategy.committee_size {
        return Err(ConsensusError::ElectionFailure {
            needed: strategy.committee_size,
            available: candidates.len(),
        });
    }
    let elected: BTreeSet<NodeId> = match strategy.variant {
        ElectionVariant::Random => {
            let mut rng = seed::rng(strategy.seed);
            rand::seq::index::sample(&mut rng, candidates.len(), strategy.committee_size)
                .into_iter()
                .map(|i| candidates[i].0)
                .collect()
        }
        ElectionVariant::ByScore => {
            let mut ranked = candidates;
            ranked.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("finite scores")
                    .then(a.0.cmp(&b.0))
            });
            ranked
                .into_iter()
                .take(strategy.committee_size)
                .map(|(id, _)| id)
                .collect()
        }
    };
    debug_assert!(elected.is_disjoint(prev_members));
    Ok(elected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{generate_synthetic, init_model, local_train, model_shape, TrainConfig};

    fn ids(list: &[u64]) -> BTreeSet<NodeId> {
        list.iter().map(|&n| NodeId(n)).collect()
    }

    fn score_map(pairs: &[(u64, f64)]) -> BTreeMap<NodeId, f64> {
        pairs.iter().map(|&(n, s)| (NodeId(n), s)).collect()
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[0.91, 0.33, 0.87]), Some(0.87));
        assert_eq!(median(&[0.42]), Some(0.42));
        assert_eq!(median(&[0.8, 0.6]), Some(0.7));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn qualify_thresholds_are_inclusive() {
        let abs = QualificationPolicy::AbsoluteThreshold { theta: 0.5 };
        assert!(qualify(0.6, &abs, 0.0));
        assert!(qualify(0.5, &abs, 0.0));
        assert!(!qualify(0.49, &abs, 0.0));

        let rel = QualificationPolicy::RelativeToGlobal { rho: 0.95 };
        assert!(!qualify(0.75, &rel, 0.8)); // 0.75 < 0.76
        assert!(qualify(0.76, &rel, 0.8));
    }

    #[test]
    fn score_update_takes_member_median() {
        let member_data: Vec<Dataset> = (0..3)
            .map(|s| generate_synthetic(s, 60, 4, 3, 3.0).unwrap())
            .collect();
        let global = init_model(1, &model_shape(4, 3)).unwrap();
        let delta = local_train(
            &global,
            &member_data[0],
            &TrainConfig {
                epochs: 3,
                learning_rate: 0.3,
                batch_size: 16,
                seed: 7,
            },
        )
        .unwrap();
        let (scores, med) = score_update(&member_data, &global, &delta).unwrap();
        assert_eq!(scores.len(), 3);
        assert_eq!(median(&scores), Some(med));
        // recompute each member score independently
        let candidate = global.add(&delta).unwrap();
        for (score, data) in scores.iter().zip(&member_data) {
            assert_eq!(*score, learning::evaluate(&candidate, data).unwrap());
        }
    }

    fn permissive_state(members: &[u64], round: u64) -> CommitteeState {
        CommitteeState::new(
            ids(members),
            round,
            QualificationPolicy::AbsoluteThreshold { theta: 0.01 },
        )
        .unwrap()
    }

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::flat(values.to_vec()).unwrap()
    }

    #[test]
    fn submission_lifecycle() {
        let mut chain = Chain::new(2, pv(&[0.0, 0.0])).unwrap();
        let mut state = permissive_state(&[1, 2, 3], 0);

        // committee members do not train
        assert_eq!(
            state
                .submit_scored(&mut chain, NodeId(2), pv(&[1.0, 0.0]), &[0.5, 0.5, 0.5], 0.0)
                .unwrap_err(),
            ConsensusError::Forbidden(NodeId(2))
        );

        let out = state
            .submit_scored(&mut chain, NodeId(10), pv(&[1.0, 0.0]), &[0.5, 0.6, 0.7], 0.0)
            .unwrap();
        assert_eq!(out, SubmitOutcome::Accepted { index: 1 });

        assert_eq!(
            state
                .submit_scored(&mut chain, NodeId(10), pv(&[1.0, 0.0]), &[0.5, 0.6, 0.7], 0.0)
                .unwrap_err(),
            ConsensusError::DuplicateSubmission(NodeId(10))
        );

        // an unqualified update stays off-chain
        let mut strict = CommitteeState::new(
            ids(&[1, 2, 3]),
            0,
            QualificationPolicy::AbsoluteThreshold { theta: 0.9 },
        )
        .unwrap();
        strict.accepted = state.accepted.clone();
        let out = strict
            .submit_scored(&mut chain, NodeId(11), pv(&[0.5, 0.5]), &[0.1, 0.2, 0.3], 0.0)
            .unwrap();
        assert_eq!(out, SubmitOutcome::Rejected { median_score: 0.2 });
        assert_eq!(chain.len(), 2);

        let out = state
            .submit_scored(&mut chain, NodeId(12), pv(&[0.0, 1.0]), &[0.8, 0.8, 0.9], 0.0)
            .unwrap();
        assert_eq!(out, SubmitOutcome::Accepted { index: 2 });

        // round is closed at k accepted
        let out = state
            .submit_scored(&mut chain, NodeId(13), pv(&[0.0, 1.0]), &[0.8, 0.8, 0.9], 0.0)
            .unwrap();
        assert_eq!(out, SubmitOutcome::RoundClosed);

        let finalized = state.finalize_round(&mut chain, Aggregator::Mean).unwrap();
        assert_eq!(finalized.round, 0);
        assert_eq!(finalized.new_global.values(), &[0.5, 0.5]);
        assert_eq!(chain.latest_model().unwrap().0, 1);
        assert_eq!(state.round(), 1);
        assert_eq!(
            finalized.round_scores,
            score_map(&[(10, 0.6), (12, 0.8)])
        );
    }

    #[test]
    fn finalize_requires_k_accepted() {
        let mut chain = Chain::new(3, pv(&[0.0])).unwrap();
        let mut state = permissive_state(&[1], 0);
        state
            .submit_scored(&mut chain, NodeId(5), pv(&[1.0]), &[0.5], 0.0)
            .unwrap();
        assert!(matches!(
            state.finalize_round(&mut chain, Aggregator::Mean),
            Err(ConsensusError::RoundIncomplete {
                round: 0,
                have: 1,
                need: 3
            })
        ));
    }

    #[test]
    fn k_one_finalize_applies_single_delta() {
        let mut chain = Chain::new(1, pv(&[1.0, 2.0])).unwrap();
        let mut state = permissive_state(&[1], 0);
        state
            .submit_scored(&mut chain, NodeId(5), pv(&[0.5, -1.0]), &[0.9], 0.0)
            .unwrap();
        let fin = state.finalize_round(&mut chain, Aggregator::Mean).unwrap();
        assert_eq!(fin.new_global.values(), &[1.5, 1.0]);
    }

    #[test]
    fn identical_deltas_mean_is_that_delta() {
        let mut chain = Chain::new(3, pv(&[0.0, 0.0])).unwrap();
        let mut state = permissive_state(&[1], 0);
        for n in 10..13 {
            state
                .submit_scored(&mut chain, NodeId(n), pv(&[2.0, -2.0]), &[0.5], 0.0)
                .unwrap();
        }
        let fin = state.finalize_round(&mut chain, Aggregator::Mean).unwrap();
        assert_eq!(fin.new_global.values(), &[2.0, -2.0]);
    }

    #[test]
    fn mean_and_cwmed_differ_on_outlier() {
        // oracle: elementwise mean vs elementwise median
        let deltas = [
            pv(&[1.0, 1.0]),
            pv(&[1.2, 0.8]),
            pv(&[100.0, -100.0]),
        ];
        let run = |aggregator| {
            let mut chain = Chain::new(3, pv(&[0.0, 0.0])).unwrap();
            let mut state = permissive_state(&[1], 0);
            for (i, delta) in deltas.iter().enumerate() {
                state
                    .submit_scored(&mut chain, NodeId(10 + i as u64), delta.clone(), &[0.5], 0.0)
                    .unwrap();
            }
            state.finalize_round(&mut chain, aggregator).unwrap().new_global
        };
        let mean = run(Aggregator::Mean);
        let med = run(Aggregator::CwMed);
        assert_eq!(med.values(), &[1.2, 0.8]);
        assert!((mean.values()[0] - 102.2 / 3.0).abs() < 1e-12);
        assert_ne!(mean.values(), med.values());
    }

    #[test]
    fn on_chain_score_is_the_member_median() {
        let mut chain = Chain::new(2, pv(&[0.0])).unwrap();
        let mut state = permissive_state(&[1, 2], 0);
        state
            .submit_scored(&mut chain, NodeId(9), pv(&[1.0]), &[0.8, 0.6], 0.0)
            .unwrap();
        let (_, _, score) = chain.updates_of_round(0).unwrap()[0].as_update().unwrap();
        assert_eq!(score, 0.7);
    }

    #[test]
    fn by_score_election_picks_top_scorers() {
        let scores = score_map(&[(1, 0.9), (2, 0.8), (3, 0.85)]);
        let strategy = ElectionStrategy {
            variant: ElectionVariant::ByScore,
            committee_size: 2,
            seed: 0,
        };
        let elected = elect_committee(&scores, &strategy, &BTreeSet::new()).unwrap();
        assert_eq!(elected, ids(&[1, 3]));
    }

    #[test]
    fn by_score_tie_breaks_to_lower_id() {
        let scores = score_map(&[(7, 0.9), (2, 0.9)]);
        let strategy = ElectionStrategy {
            variant: ElectionVariant::ByScore,
            committee_size: 1,
            seed: 0,
        };
        let elected = elect_committee(&scores, &strategy, &BTreeSet::new()).unwrap();
        assert_eq!(elected, ids(&[2]));
    }

    #[test]
    fn by_score_is_scale_invariant() {
        let base = score_map(&[(1, 0.2), (2, 0.5), (3, 0.4), (4, 0.1)]);
        let scaled: BTreeMap<NodeId, f64> =
            base.iter().map(|(&n, &s)| (n, s * 0.37)).collect();
        let strategy = ElectionStrategy {
            variant: ElectionVariant::ByScore,
            committee_size: 2,
            seed: 0,
        };
        assert_eq!(
            elect_committee(&base, &strategy, &BTreeSet::new()).unwrap(),
            elect_committee(&scaled, &strategy, &BTreeSet::new()).unwrap()
        );
    }

    #[test]
    fn random_election_is_seed_reproducible() {
        let scores = score_map(&[(1, 0.5), (2, 0.5), (3, 0.5), (4, 0.5), (5, 0.5)]);
        let strategy = ElectionStrategy {
            variant: ElectionVariant::Random,
            committee_size: 2,
            seed: 31,
        };
        let a = elect_committee(&scores, &strategy, &BTreeSet::new()).unwrap();
        let b = elect_committee(&scores, &strategy, &BTreeSet::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn previous_members_are_excluded() {
        let scores = score_map(&[(1, 0.9), (2, 0.8), (3, 0.7)]);
        let strategy = ElectionStrategy {
            variant: ElectionVariant::ByScore,
            committee_size: 2,
            seed: 0,
        };
        let elected = elect_committee(&scores, &strategy, &ids(&[1])).unwrap();
        assert_eq!(elected, ids(&[2, 3]));
    }

    #[test]
    fn election_failure_when_candidates_short() {
        let scores = score_map(&[(1, 0.9)]);
        let strategy = ElectionStrategy {
            variant: ElectionVariant::Random,
            committee_size: 2,
            seed: 0,
        };
        assert_eq!(
            elect_committee(&scores, &strategy, &BTreeSet::new()).unwrap_err(),
            ConsensusError::ElectionFailure {
                needed: 2,
                available: 1
            }
        );
    }

    #[test]
    fn noisy_delta_scores_no_better_than_clean() {
        // statistical: a large-variance Gaussian delta never beats the
        // unperturbed update's median score on the same committee data
        use crate::adversary::poison_delta;
        let member_data: Vec<Dataset> = (0..5)
            .map(|s| generate_synthetic(100 + s, 80, 6, 3, 3.0).unwrap())
            .collect();
        let global = init_model(4, &model_shape(6, 3)).unwrap();
        let train_data = generate_synthetic(999, 80, 6, 3, 3.0).unwrap();
        let delta = local_train(
            &global,
            &train_data,
            &TrainConfig {
                epochs: 4,
                learning_rate: 0.3,
                batch_size: 16,
                seed: 1,
            },
        )
        .unwrap();
        let (_, clean) = score_update(&member_data, &global, &delta).unwrap();
        for seed_value in 0..5u64 {
            let noisy = poison_delta(&delta, 25.0, seed_value).unwrap();
            let (_, noisy_med) = score_update(&member_data, &global, &noisy).unwrap();
            assert!(
                noisy_med <= clean,
                "noisy median {noisy_med} beat clean {clean} at seed {seed_value}"
            );
        }
    }
}
