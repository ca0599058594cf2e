//! Replication-factor decisions and the price of enacting them.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::{Block, PlacementError, PlacementPolicy, ReplicaMap, Transfer};
use crate::topology::{ClusterTopology, LocalityLevel};

/// Slack applied before rounding a predicted load up to whole replicas, so
/// that e.g. 10.000000000001 / 2 does not become 6.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplicationError {
    #[error("transfer of {block} from {host:?} to itself")]
    SelfTransfer { block: crate::placement::BlockId, host: String },
    #[error("block {block} holds {actual} replicas, decision expects {expected}")]
    StaleDecision {
        block: crate::placement::BlockId,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub min_rf: usize,
    pub max_rf: usize,
    pub accesses_per_replica: f64,
    pub hysteresis: usize,
}

impl ReplicationConfig {
    /// Defaults with `max_rf` equal to the number of eligible nodes.
    pub fn for_nodes(eligible_nodes: usize) -> Self {
        Self {
            min_rf: 1,
            max_rf: eligible_nodes.max(1),
            accesses_per_replica: 2.0,
            hysteresis: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.min_rf < 1 {
            return Err("min_rf must be at least 1".into());
        }
        if self.min_rf > self.max_rf {
            return Err(format!("min_rf {} exceeds max_rf {}", self.min_rf, self.max_rf));
        }
        if !(self.accesses_per_replica > 0.0 && self.accesses_per_replica.is_finite()) {
            return Err("accesses_per_replica must be a positive number".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionReason {
    ScaleUp,
    ScaleDown,
    Hold,
}

impl DecisionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ScaleUp => "ScaleUp",
            Self::ScaleDown => "ScaleDown",
            Self::Hold => "Hold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationDecision {
    pub file_id: u64,
    pub rf_old: usize,
    pub rf_new: usize,
    pub predicted_count: f64,
    pub reason: DecisionReason,
}

/// Network figures used to price block copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// bytes/s between two nodes of the same rack
    pub bw_in_rack: f64,
    /// bytes/s between racks
    pub bw_cross_rack: f64,
    pub per_transfer_latency_in_rack: f64,
    pub per_transfer_latency_cross: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            bw_in_rack: 100e6,
            bw_cross_rack: 12.5e6,
            per_transfer_latency_in_rack: 0.001,
            per_transfer_latency_cross: 0.005,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), String> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.bw_in_rack) || !finite_pos(self.bw_cross_rack) {
            return Err("bandwidths must be positive".into());
        }
        if self.bw_in_rack < self.bw_cross_rack {
            return Err("bw_in_rack must be at least bw_cross_rack".into());
        }
        if !(self.per_transfer_latency_in_rack >= 0.0 && self.per_transfer_latency_cross >= 0.0) {
            return Err("latencies must be non-negative".into());
        }
        Ok(())
    }

    /// Seconds to move `size_bytes` at the given locality; zero when local.
    pub fn transfer_seconds(&self, size_bytes: u64, locality: LocalityLevel) -> f64 {
        match locality {
            LocalityLevel::NodeLocal => 0.0,
            LocalityLevel::RackLocal => size_bytes as f64 / self.bw_in_rack + self.per_transfer_latency_in_rack,
            LocalityLevel::OffRack => size_bytes as f64 / self.bw_cross_rack + self.per_transfer_latency_cross,
        }
    }
}

/// Maps a predicted access count to a target replication factor.
///
/// `target = clamp(ceil(predicted / accesses_per_replica), min_rf, max_rf)`;
/// the target is adopted only when it differs from the current factor by
/// more than the hysteresis band.
pub fn decide_rf(
    file_id: u64,
    predicted_count: f64,
    rf_current: usize,
    cfg: &ReplicationConfig,
) -> ReplicationDecision {
    let predicted = if predicted_count.is_finite() { predicted_count.max(0.0) } else { 0.0 };
    let raw = (predicted / cfg.accesses_per_replica - CEIL_SLACK).ceil().max(0.0);
    let target = (raw.min(cfg.max_rf as f64) as usize).clamp(cfg.min_rf, cfg.max_rf);
    let rf_new = if target.abs_diff(rf_current) > cfg.hysteresis {
        target
    } else {
        rf_current
    };
    let reason = match rf_new.cmp(&rf_current) {
        std::cmp::Ordering::Greater => DecisionReason::ScaleUp,
        std::cmp::Ordering::Less => DecisionReason::ScaleDown,
        std::cmp::Ordering::Equal => DecisionReason::Hold,
    };
    ReplicationDecision {
        file_id,
        rf_old: rf_current,
        rf_new,
        predicted_count: predicted,
        reason,
    }
}

/// Sum of per-transfer prices. Each transfer pays size / bandwidth plus a
/// fixed latency, with in-rack or cross-rack figures by locality.
pub fn update_cost(
    plan: &[Transfer],
    topo: &ClusterTopology,
    cost: &CostModel,
) -> Result<f64, ReplicationError> {
    plan.iter().try_fold(0.0, |acc, t| {
        let loc = topo.locality(&t.src, &t.dst);
        if loc == LocalityLevel::NodeLocal {
            return Err(ReplicationError::SelfTransfer {
                block: t.block,
                host: t.src.clone(),
            });
        }
        Ok(acc + cost.transfer_seconds(t.size_bytes, loc))
    })
}

/// Brings every block of a file to `decision.rf_new` replicas and returns
/// the update cost in seconds. Removals are free.
pub fn apply_decision<R: Rng + ?Sized>(
    policy: &PlacementPolicy,
    replicas: &mut ReplicaMap,
    blocks: &[Block],
    cost: &CostModel,
    decision: &ReplicationDecision,
    rng: &mut R,
) -> Result<(f64, Vec<Transfer>), ReplicationError> {
    for b in blocks {
        let actual = replicas.replication(b.block_id);
        if actual != decision.rf_old {
            return Err(ReplicationError::StaleDecision {
                block: b.block_id,
                expected: decision.rf_old,
                actual,
            });
        }
    }
    let mut plan = Vec::new();
    match decision.reason {
        DecisionReason::Hold => {}
        DecisionReason::ScaleUp => {
            let k = decision.rf_new - decision.rf_old;
            for b in blocks {
                plan.extend(policy.add_replicas(replicas, b.block_id, b.size_bytes, k, rng)?);
            }
        }
        DecisionReason::ScaleDown => {
            let k = decision.rf_old - decision.rf_new;
            for b in blocks {
                policy.remove_replicas(replicas, b.block_id, k)?;
            }
        }
    }
    let seconds = update_cost(&plan, policy.topology(), cost)?;
    Ok((seconds, plan))
}
