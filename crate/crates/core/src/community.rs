//! Node membership with blacklist-mode admission and the token ledger
//! for permission fees and proportional profit sharing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque node identifier, unique within a community.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommunityError {
    #[error("node {0} is blacklisted; admission denied")]
    AdmissionDenied(NodeId),
    #[error("node {node} paid {paid} tokens but the permission fee is {required}")]
    PaymentRequired {
        node: NodeId,
        required: u64,
        paid: u64,
    },
    #[error("node {0} is already a member")]
    AlreadyMember(NodeId),
    #[error("node {0} not found among members")]
    NotFound(NodeId),
    #[error("reward pool {pool} exceeds treasury balance {treasury}")]
    TreasuryExhausted { pool: u64, treasury: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Expulsion {
    node: NodeId,
    reason: String,
}

/// The training community: members, managers, blacklist, and token ledger.
///
/// Single-writer: mutation goes through `&mut self`; reads are free to run
/// concurrently.
#[derive(Debug, Clone)]
pub struct Community {
    members: BTreeSet<NodeId>,
    managers: BTreeSet<NodeId>,
    blacklist: BTreeSet<NodeId>,
    ledger: BTreeMap<NodeId, u64>,
    joined_round: BTreeMap<NodeId, u64>,
    permission_fee: u64,
    treasury: u64,
    expulsions: Vec<Expulsion>,
}

impl Community {
    pub fn new(permission_fee: u64, initial_treasury: u64) -> Self {
        Self {
            members: BTreeSet::new(),
            managers: BTreeSet::new(),
            blacklist: BTreeSet::new(),
            ledger: BTreeMap::new(),
            joined_round: BTreeMap::new(),
            permission_fee,
            treasury: initial_treasury,
            expulsions: Vec::new(),
        }
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn managers(&self) -> &BTreeSet<NodeId> {
        &self.managers
    }

    pub fn is_member(&self, node: NodeId) -> bool {
        self.members.contains(&node)
    }

    pub fn is_blacklisted(&self, node: NodeId) -> bool {
        self.blacklist.contains(&node)
    }

    pub fn balance(&self, node: NodeId) -> u64 {
        self.ledger.get(&node).copied().unwrap_or(0)
    }

    pub fn treasury(&self) -> u64 {
        self.treasury
    }

    pub fn permission_fee(&self) -> u64 {
        self.permission_fee
    }

    /// Total tokens in the system: every ledger balance plus the treasury.
    pub fn total_tokens(&self) -> u64 {
        self.ledger.values().sum::<u64>() + self.treasury
    }

    /// Admits a node in blacklist mode: previously expelled nodes are
    /// rejected, everyone else pays the permission fee and joins.
    pub fn join(&mut self, node: NodeId, fee_paid: u64, round: u64) -> Result<(), CommunityError> {
        if self.members.contains(&node) {
            return Err(CommunityError::AlreadyMember(node));
        }
        if self.blacklist.contains(&node) {
            return Err(CommunityError::AdmissionDenied(node));
        }
        if fee_paid < self.permission_fee {
            return Err(CommunityError::PaymentRequired {
                node,
                required: self.permission_fee,
                paid: fee_paid,
            });
        }
        self.members.insert(node);
        self.treasury += self.permission_fee;
        self.ledger.insert(node, fee_paid - self.permission_fee);
        self.joined_round.insert(node, round);
        Ok(())
    }

    /// Appoints an existing member as a manager.
    pub fn appoint_manager(&mut self, node: NodeId) -> Result<(), CommunityError> {
        if !self.members.contains(&node) {
            return Err(CommunityError::NotFound(node));
        }
        self.managers.insert(node);
        Ok(())
    }

    /// Removes a node for misconduct and blacklists it permanently.
    /// The node's balance stays frozen in the ledger.
    pub fn expel(&mut self, node: NodeId, reason: &str) -> Result<(), CommunityError> {
        if !self.members.remove(&node) {
            return Err(CommunityError::NotFound(node));
        }
        self.managers.remove(&node);
        self.blacklist.insert(node);
        self.expulsions.push(Expulsion {
            node,
            reason: reason.to_string(),
        });
        Ok(())
    }

    pub fn expulsion_reasons(&self) -> impl Iterator<Item = (NodeId, &str)> {
        self.expulsions.iter().map(|e| (e.node, e.reason.as_str()))
    }

    /// Profit sharing by contribution: node i receives
    /// floor(pool × score_i / Σ scores) from the treasury; leftover tokens
    /// go to the highest scorer (ties broken toward the lowest NodeId).
    /// All-zero scores are a no-op.
    pub fn distribute_rewards(
        &mut self,
        round_scores: &BTreeMap<NodeId, f64>,
        pool: u64,
    ) -> Result<(), CommunityError> {
        for (&node, &score) in round_scores {
            if !score.is_finite() || score < 0.0 {
                return Err(CommunityError::InvalidArgument(format!(
                    "score for node {node} must be finite and non-negative, got {score}"
                )));
            }
            if !self.members.contains(&node) {
                return Err(CommunityError::NotFound(node));
            }
        }
        let total: f64 = round_scores.values().sum();
        if total == 0.0 || pool == 0 {
            return Ok(());
        }
        if pool > self.treasury {
            return Err(CommunityError::TreasuryExhausted {
                pool,
                treasury: self.treasury,
            });
        }

        let mut shares: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut distributed: u64 = 0;
        for (&node, &score) in round_scores {
            let share = ((pool as f64) * score / total).floor() as u64;
            shares.insert(node, share);
            distributed += share;
        }
        // Floating-point guard: floors can only undershoot in exact
        // arithmetic, but trim deterministically if rounding overshot.
        while distributed > pool {
            let (&node, _) = shares
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .expect("shares nonempty");
            *shares.get_mut(&node).unwrap() -= 1;
            distributed -= 1;
        }
        let remainder = pool - distributed;
        if remainder > 0 {
            let top = round_scores
                .iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
                .map(|(&node, _)| node)
                .expect("scores nonempty");
            *shares.entry(top).or_insert(0) += remainder;
        }

        for (node, share) in shares {
            *self.ledger.entry(node).or_insert(0) += share;
        }
        self.treasury -= pool;
        Ok(())
    }

    /// Ledger snapshot as CSV: node_id,balance,joined_round,blacklisted.
    pub fn export_ledger_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node_id,balance,joined_round,blacklisted")?;
        for (&node, &balance) in &self.ledger {
            let joined = self.joined_round.get(&node).copied().unwrap_or(0);
            let blacklisted = self.blacklist.contains(&node);
            writeln!(w, "{},{},{},{}", node, balance, joined, blacklisted)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pairs: &[(u64, f64)]) -> BTreeMap<NodeId, f64> {
        pairs.iter().map(|&(n, s)| (NodeId(n), s)).collect()
    }

    #[test]
    fn join_debits_fee() {
        let mut c = Community::new(10, 0);
        c.join(NodeId(1), 25, 0).unwrap();
        assert!(c.is_member(NodeId(1)));
        assert_eq!(c.balance(NodeId(1)), 15);
        assert_eq!(c.treasury(), 10);
    }

    #[test]
    fn join_requires_fee() {
        let mut c = Community::new(10, 0);
        assert_eq!(
            c.join(NodeId(1), 9, 0),
            Err(CommunityError::PaymentRequired {
                node: NodeId(1),
                required: 10,
                paid: 9
            })
        );
        assert!(!c.is_member(NodeId(1)));
    }

    #[test]
    fn blacklisted_node_is_denied() {
        let mut c = Community::new(0, 0);
        c.join(NodeId(1), 0, 0).unwrap();
        c.expel(NodeId(1), "submitting misleading updates").unwrap();
        assert_eq!(
            c.join(NodeId(1), 100, 3),
            Err(CommunityError::AdmissionDenied(NodeId(1)))
        );
    }

    #[test]
    fn expel_removes_manager_role() {
        let mut c = Community::new(0, 0);
        c.join(NodeId(1), 0, 0).unwrap();
        c.appoint_manager(NodeId(1)).unwrap();
        c.expel(NodeId(1), "spreading a private model").unwrap();
        assert!(!c.managers().contains(&NodeId(1)));
        assert!(c.is_blacklisted(NodeId(1)));
        assert_eq!(
            c.expulsion_reasons().next(),
            Some((NodeId(1), "spreading a private model"))
        );
    }

    #[test]
    fn expel_unknown_is_not_found() {
        let mut c = Community::new(0, 0);
        assert_eq!(
            c.expel(NodeId(9), "x"),
            Err(CommunityError::NotFound(NodeId(9)))
        );
    }

    #[test]
    fn rewards_are_proportional() {
        let mut c = Community::new(0, 100);
        c.join(NodeId(1), 0, 0).unwrap();
        c.join(NodeId(2), 0, 0).unwrap();
        c.distribute_rewards(&scores(&[(1, 0.6), (2, 0.4)]), 10)
            .unwrap();
        assert_eq!(c.balance(NodeId(1)), 6);
        assert_eq!(c.balance(NodeId(2)), 4);
        assert_eq!(c.treasury(), 90);
    }

    #[test]
    fn single_scorer_takes_pool() {
        let mut c = Community::new(0, 50);
        c.join(NodeId(3), 0, 0).unwrap();
        c.distribute_rewards(&scores(&[(3, 0.2)]), 50).unwrap();
        assert_eq!(c.balance(NodeId(3)), 50);
        assert_eq!(c.treasury(), 0);
    }

    #[test]
    fn zero_pool_and_zero_scores_are_noops() {
        let mut c = Community::new(0, 100);
        c.join(NodeId(1), 0, 0).unwrap();
        c.distribute_rewards(&scores(&[(1, 0.9)]), 0).unwrap();
        assert_eq!(c.balance(NodeId(1)), 0);
        c.distribute_rewards(&scores(&[(1, 0.0)]), 10).unwrap();
        assert_eq!(c.balance(NodeId(1)), 0);
        assert_eq!(c.treasury(), 100);
    }

    #[test]
    fn remainder_goes_to_top_scorer_lowest_id_on_tie() {
        let mut c = Community::new(0, 100);
        for n in 1..=3 {
            c.join(NodeId(n), 0, 0).unwrap();
        }
        // 10 × 1/3 = 3 each, remainder 1 → tie between 1 and 2 → node 1
        c.distribute_rewards(&scores(&[(1, 0.5), (2, 0.5), (3, 0.5)]), 10)
            .unwrap();
        assert_eq!(c.balance(NodeId(1)), 4);
        assert_eq!(c.balance(NodeId(2)), 3);
        assert_eq!(c.balance(NodeId(3)), 3);
    }

    #[test]
    fn token_conservation() {
        let mut c = Community::new(5, 1000);
        for n in 0..7 {
            c.join(NodeId(n), 12, 0).unwrap();
        }
        let before = c.total_tokens();
        c.distribute_rewards(&scores(&[(0, 0.31), (3, 0.77), (5, 0.12)]), 97)
            .unwrap();
        assert_eq!(c.total_tokens(), before);
    }

    #[test]
    fn reward_monotonicity() {
        let mut c = Community::new(0, 10_000);
        for n in 0..4 {
            c.join(NodeId(n), 0, 0).unwrap();
        }
        c.distribute_rewards(&scores(&[(0, 0.9), (1, 0.7), (2, 0.7), (3, 0.1)]), 1234)
            .unwrap();
        assert!(c.balance(NodeId(0)) >= c.balance(NodeId(1)));
        assert!(c.balance(NodeId(1)) >= c.balance(NodeId(3)));
    }

    #[test]
    fn treasury_exhaustion_is_an_error() {
        let mut c = Community::new(0, 5);
        c.join(NodeId(1), 0, 0).unwrap();
        assert!(matches!(
            c.distribute_rewards(&scores(&[(1, 1.0)]), 10),
            Err(CommunityError::TreasuryExhausted { .. })
        ));
    }

    #[test]
    fn ledger_csv_snapshot() {
        let mut c = Community::new(2, 0);
        c.join(NodeId(5), 7, 1).unwrap();
        c.join(NodeId(2), 2, 0).unwrap();
        c.expel(NodeId(2), "misconduct").unwrap();
        let mut buf = Vec::new();
        c.export_ledger_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "node_id,balance,joined_round,blacklisted\n2,0,0,true\n5,5,1,false\n"
        );
    }
}
