//! Per-round metrics and consensus-cost accounting.

use std::io::Write;

use crate::community::NodeId;

/// Consensus cost of one round: P training submitters, Q committee
/// members. Committee validation costs at most P×Q model evaluations,
/// against (P+Q)² for a broadcast agreement among the active nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundCostReport {
    pub training_submitters: u64,
    pub committee_size: u64,
    pub validations: u64,
    pub broadcast_equiv: u64,
}

impl RoundCostReport {
    pub fn new(training_submitters: u64, committee_size: u64, validations: u64) -> Self {
        let active = training_submitters + committee_size;
        Self {
            training_submitters,
            committee_size,
            validations,
            broadcast_equiv: active * active,
        }
    }

    /// The P×Q ceiling on committee validations.
    pub fn validation_bound(&self) -> u64 {
        self.training_submitters * self.committee_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub round: u64,
    /// Global-model accuracy on the held-out test set.
    pub accuracy: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub poisoned_accepted: u64,
    pub committee: Vec<NodeId>,
    pub cost: RoundCostReport,
}

/// Metrics CSV. Committee ids are joined with '|'; floats use the shortest
/// round-trip decimal form, so identical runs serialize byte-identically.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "round,accuracy,accepted,rejected,poisoned_accepted,committee,\
         submitters,committee_size,validations,broadcast_equiv"
    )?;
    for row in rows {
        let committee = row
            .committee
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join("|");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            row.round,
            row.accuracy,
            row.accepted,
            row.rejected,
            row.poisoned_accepted,
            committee,
            row.cost.training_submitters,
            row.cost.committee_size,
            row.cost.validations,
            row.cost.broadcast_equiv
        )?;
    }
    Ok(())
}
