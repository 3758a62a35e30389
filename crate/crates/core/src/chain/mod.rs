//! Hash-linked, append-only storage of model blocks and update blocks.
//!
//! Layout with `k` updates required per round: the round-`t` global model
//! sits at index `t × (k+1)`, and the updates of round `t` occupy
//! `[t × (k+1) + 1, (t+1) × (k+1) − 1]`. Training only needs the latest
//! model block; history is kept for fallback and verification, and local
//! pruning may drop historical payloads while keeping every header.
//!
//! Digests: `payload_digest` is SHA-256 over the payload's canonical binary
//! form, and a block's digest is SHA-256 over its canonical header bytes
//! (which include the payload digest). `prev_digest` of block `i` is the
//! digest of block `i−1`; genesis links to the all-zero digest. Keeping the
//! block digest header-only is what lets a pruned chain still verify its
//! hash links.
//!
//! Concurrency: any number of readers; appends, rollback, and prune take
//! `&mut self` (single-writer contract).

pub mod file;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::community::NodeId;
use crate::params::ParamVector;

pub type BlockDigest = [u8; 32];

/// Digest a genesis block links to.
pub const ZERO_DIGEST: BlockDigest = [0u8; 32];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out-of-order append: chain is at round {expected}, got round {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("round {round} already holds {k} update blocks")]
    RoundFull { round: u64, k: u64 },
    #[error("round {round} incomplete: {have} of {need} updates recorded")]
    RoundIncomplete { round: u64, have: u64, need: u64 },
    #[error("round {round} unavailable: payloads pruned before round {kept_from}")]
    PrunedUnavailable { round: u64, kept_from: u64 },
    #[error("chain file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ChainError {
    fn from(e: std::io::Error) -> Self {
        ChainError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Model,
    Update,
}

impl BlockKind {
    fn tag(self) -> u8 {
        match self {
            BlockKind::Model => 0,
            BlockKind::Update => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockHeader {
    pub index: u64,
    pub prev_digest: BlockDigest,
    pub payload_digest: BlockDigest,
    pub round: u64,
    pub kind: BlockKind,
}

impl BlockHeader {
    /// Canonical header bytes: index, prev digest, payload digest, round,
    /// kind tag — all integers little-endian.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 + 32 + 8 + 1);
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.prev_digest);
        out.extend_from_slice(&self.payload_digest);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.kind.tag());
        out
    }

    /// The digest that the next block's `prev_digest` must match.
    pub fn block_digest(&self) -> BlockDigest {
        sha256(&self.canonical_bytes())
    }
}

/// The learning information a block carries; dropped locally by pruning.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Model {
        model: ParamVector,
    },
    Update {
        delta: ParamVector,
        uploader: NodeId,
        score: f64,
    },
}

impl Payload {
    pub fn kind(&self) -> BlockKind {
        match self {
            Payload::Model { .. } => BlockKind::Model,
            Payload::Update { .. } => BlockKind::Update,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            Payload::Model { model } => {
                let mut out = vec![BlockKind::Model.tag()];
                out.extend_from_slice(&model.canonical_bytes());
                out
            }
            Payload::Update {
                delta,
                uploader,
                score,
            } => {
                let mut out = vec![BlockKind::Update.tag()];
                out.extend_from_slice(&delta.canonical_bytes());
                out.extend_from_slice(&uploader.0.to_le_bytes());
                out.extend_from_slice(&score.to_le_bytes());
                out
            }
        }
    }

    pub fn digest(&self) -> BlockDigest {
        sha256(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    header: BlockHeader,
    payload: Option<Payload>,
}

impl Block {
    pub fn header(&self) -> &BlockHeader {
        &self.header
    }

    pub fn payload(&self) -> Option<&Payload> {
        self.payload.as_ref()
    }

    pub fn is_pruned(&self) -> bool {
        self.payload.is_none()
    }

    pub fn as_model(&self) -> Option<&ParamVector> {
        match &self.payload {
            Some(Payload::Model { model }) => Some(model),
            _ => None,
        }
    }

    pub fn as_update(&self) -> Option<(&ParamVector, NodeId, f64)> {
        match &self.payload {
            Some(Payload::Update {
                delta,
                uploader,
                score,
            }) => Some((delta, *uploader, *score)),
            _ => None,
        }
    }
}

/// Outcome of `Chain::verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainCheck {
    Valid,
    Invalid { first_bad_index: u64 },
}

impl ChainCheck {
    pub fn is_valid(self) -> bool {
        matches!(self, ChainCheck::Valid)
    }
}

/// Append-only block sequence with round arithmetic parameterized by `k`.
///
/// ```
/// use bflc_core::chain::Chain;
/// use bflc_core::{NodeId, ParamVector};
///
/// let genesis = ParamVector::flat(vec![0.0, 0.0]).unwrap();
/// let mut chain = Chain::new(2, genesis).unwrap();
/// for (node, update) in [(7u64, 0.1), (9, 0.2)] {
///     let delta = ParamVector::flat(vec![update, -update]).unwrap();
///     chain.append_update_block(0, delta, NodeId(node), 0.5).unwrap();
/// }
/// let next = ParamVector::flat(vec![0.15, -0.15]).unwrap();
/// assert_eq!(chain.append_model_block(1, next).unwrap(), 3); // 1 × (k+1)
/// assert!(chain.verify().is_valid());
/// assert_eq!(chain.latest_model().unwrap().0, 1);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    k: u64,
    blocks: Vec<Block>,
    pruned_before: u64,
}

impl Chain {
    /// Starts a chain by placing the genesis model into block #0 (round 0).
    pub fn new(k: u64, genesis_model: ParamVector) -> Result<Self, ChainError> {
        if k == 0 {
            return Err(ChainError::InvalidArgument(
                "k (updates per round) must be at least 1".into(),
            ));
        }
        if genesis_model.is_empty() {
            return Err(ChainError::InvalidArgument(
                "genesis model must be non-empty".into(),
            ));
        }
        let payload = Payload::Model {
            model: genesis_model,
        };
        let header = BlockHeader {
            index: 0,
            prev_digest: ZERO_DIGEST,
            payload_digest: payload.digest(),
            round: 0,
            kind: BlockKind::Model,
        };
        Ok(Self {
            k,
            blocks: vec![Block {
                header,
                payload: Some(payload),
            }],
            pruned_before: 0,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn len(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// First round whose payloads are all retained (0 when unpruned).
    pub fn pruned_before(&self) -> u64 {
        self.pruned_before
    }

    fn tail_index(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    /// Round of the latest model block; the round currently collecting
    /// updates.
    pub fn current_round(&self) -> u64 {
        self.tail_index() / (self.k + 1)
    }

    /// Update blocks recorded so far for the current round.
    pub fn updates_in_current_round(&self) -> u64 {
        self.tail_index() - self.current_round() * (self.k + 1)
    }

    fn model_index(&self, round: u64) -> u64 {
        round * (self.k + 1)
    }

    fn push(&mut self, round: u64, payload: Payload) -> u64 {
        let prev_digest = self
            .blocks
            .last()
            .map(|b| b.header.block_digest())
            .unwrap_or(ZERO_DIGEST);
        let header = BlockHeader {
            index: self.blocks.len() as u64,
            prev_digest,
            payload_digest: payload.digest(),
            round,
            kind: payload.kind(),
        };
        let index = header.index;
        self.blocks.push(Block {
            header,
            payload: Some(payload),
        });
        index
    }

    /// Appends a verified local update to the current round. Returns the
    /// new block's index.
    pub fn append_update_block(
        &mut self,
        round: u64,
        delta: ParamVector,
        uploader: NodeId,
        score: f64,
    ) -> Result<u64, ChainError> {
        if !(0.0..=1.0).contains(&score) || !score.is_finite() {
            return Err(ChainError::InvalidArgument(format!(
                "score must lie in [0,1], got {score}"
            )));
        }
        let current = self.current_round();
        if round != current {
            return Err(ChainError::OutOfOrder {
                expected: current,
                got: round,
            });
        }
        if self.updates_in_current_round() >= self.k {
            return Err(ChainError::RoundFull {
                round,
                k: self.k,
            });
        }
        Ok(self.push(
            round,
            Payload::Update {
                delta,
                uploader,
                score,
            },
        ))
    }

    /// Appends the aggregated model of `round`, which requires exactly `k`
    /// update blocks recorded for `round − 1`. Returns the new index,
    /// always `round × (k+1)`.
    pub fn append_model_block(
        &mut self,
        round: u64,
        model: ParamVector,
    ) -> Result<u64, ChainError> {
        let current = self.current_round();
        if round != current + 1 {
            return Err(ChainError::OutOfOrder {
                expected: current + 1,
                got: round,
            });
        }
        let have = self.updates_in_current_round();
        if have < self.k {
            return Err(ChainError::RoundIncomplete {
                round: current,
                have,
                need: self.k,
            });
        }
        let index = self.push(round, Payload::Model { model });
        debug_assert_eq!(index, self.model_index(round));
        Ok(index)
    }

    /// The highest-round global model, found in O(1) by tail index
    /// arithmetic.
    pub fn latest_model(&self) -> Result<(u64, &ParamVector), ChainError> {
        let round = self.current_round();
        let pos = self.model_index(round) as usize;
        match self.blocks[pos].as_model() {
            Some(model) => Ok((round, model)),
            None => Err(ChainError::PrunedUnavailable {
                round,
                kept_from: self.pruned_before,
            }),
        }
    }

    /// The update blocks of round `t`, in index order (≤ k of them when the
    /// round is still filling).
    pub fn updates_of_round(&self, t: u64) -> Result<&[Block], ChainError> {
        if t < self.pruned_before {
            return Err(ChainError::PrunedUnavailable {
                round: t,
                kept_from: self.pruned_before,
            });
        }
        let start = (self.model_index(t) + 1).min(self.len());
        let end = (self.model_index(t + 1)).min(self.len());
        Ok(&self.blocks[start as usize..end as usize])
    }

    /// Checks every retained block: hash links, payload digests, and the
    /// round-indexed layout. Returns the first offending index on failure.
    pub fn verify(&self) -> ChainCheck {
        let mut prev_digest = ZERO_DIGEST;
        for (pos, block) in self.blocks.iter().enumerate() {
            let bad = ChainCheck::Invalid {
                first_bad_index: block.header.index,
            };
            let index = pos as u64;
            let round = index / (self.k + 1);
            let kind = if index == self.model_index(round) {
                BlockKind::Model
            } else {
                BlockKind::Update
            };
            if block.header.index != index
                || block.header.round != round
                || block.header.kind != kind
                || block.header.prev_digest != prev_digest
            {
                return bad;
            }
            match &block.payload {
                Some(payload) => {
                    if payload.kind() != kind || payload.digest() != block.header.payload_digest {
                        return bad;
                    }
                    if let Payload::Update { score, .. } = payload {
                        if !(0.0..=1.0).contains(score) || !score.is_finite() {
                            return bad;
                        }
                    }
                }
                None => {
                    // Only payloads strictly before the kept-from model
                    // block may be missing.
                    if index >= self.model_index(self.pruned_before) {
                        return bad;
                    }
                }
            }
            prev_digest = block.header.block_digest();
        }
        ChainCheck::Valid
    }

    /// Truncates so the highest block is the model block of `to_round`
    /// (failure fallback). Partial updates of later rounds are dropped.
    pub fn rollback(&mut self, to_round: u64) -> Result<(), ChainError> {
        if to_round > self.current_round() {
            return Err(ChainError::InvalidArgument(format!(
                "cannot roll back to round {to_round}: chain is at round {}",
                self.current_round()
            )));
        }
        if to_round < self.pruned_before {
            return Err(ChainError::PrunedUnavailable {
                round: to_round,
                kept_from: self.pruned_before,
            });
        }
        self.blocks.truncate(self.model_index(to_round) as usize + 1);
        Ok(())
    }

    /// Local storage optimization: drops the payloads of every block before
    /// `keep_from_round`'s model block. Headers (and so digests) stay, so
    /// link verification of the retained payloads still works.
    pub fn prune(&mut self, keep_from_round: u64) -> Result<(), ChainError> {
        if keep_from_round > self.current_round() {
            return Err(ChainError::InvalidArgument(format!(
                "cannot keep from round {keep_from_round}: chain is at round {}",
                self.current_round()
            )));
        }
        let boundary = self.model_index(keep_from_round) as usize;
        for block in &mut self.blocks[..boundary] {
            block.payload = None;
        }
        self.pruned_before = self.pruned_before.max(keep_from_round);
        Ok(())
    }
}

fn sha256(bytes: &[u8]) -> BlockDigest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}
