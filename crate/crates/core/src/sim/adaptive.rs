//! Epoch-driven adaptive replication over an access trace.
//!
//! At the end of every epoch each known file gets a new cumulative-count
//! sample. Once a file has two samples, its next-epoch access count is
//! predicted (interpolated cumulative count minus the current one), turned
//! into a replication decision, and the decision is applied immediately.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Cluster, LocalityHistogram, SimError, SimResult, MIB};
use crate::placement::{Block, BlockId};
use crate::prediction::{predict_next, AccessHistory, AccessSample, PredictionError, DEFAULT_WINDOW};
use crate::replication::{apply_decision, decide_rf, ReplicationConfig, ReplicationDecision};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub t: f64,
    pub file_id: u64,
    pub accesses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub epoch_seconds: f64,
    pub window: usize,
    /// Replication factor a file gets when it first shows up in the trace.
    pub initial_rf: usize,
    pub file_size_bytes: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            epoch_seconds: 60.0,
            window: DEFAULT_WINDOW,
            initial_rf: 3,
            file_size_bytes: 64 * MIB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub epoch: u64,
    pub decision: ReplicationDecision,
    pub update_cost_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: u64,
    /// Map phase over one pass of every file touched in the epoch; the
    /// update cost is the sum of that epoch's replication changes.
    pub result: SimResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveReport {
    pub decisions: Vec<DecisionRecord>,
    pub epochs: Vec<EpochReport>,
}

struct FileState {
    blocks: Vec<Block>,
    history: AccessHistory,
    cumulative: u64,
    rf: usize,
}

fn validate_trace(trace: &[AccessEvent]) -> Result<(), SimError> {
    let mut last = 0.0;
    for (i, ev) in trace.iter().enumerate() {
        if !ev.t.is_finite() || ev.t < 0.0 {
            return Err(SimError::InvalidTrace(format!("event {i}: time {} is not a finite non-negative number", ev.t)));
        }
        if ev.t < last {
            return Err(SimError::InvalidTrace(format!("event {i}: time {} goes backwards", ev.t)));
        }
        last = ev.t;
    }
    Ok(())
}

pub fn run_adaptive<R: Rng + ?Sized>(
    cluster: &mut Cluster,
    trace: &[AccessEvent],
    cfg: &AdaptiveConfig,
    rep_cfg: &ReplicationConfig,
    rng: &mut R,
) -> Result<AdaptiveReport, SimError> {
    validate_trace(trace)?;
    rep_cfg.validate().map_err(SimError::InvalidConfig)?;
    if !(cfg.epoch_seconds.is_finite() && cfg.epoch_seconds > 0.0) {
        return Err(SimError::InvalidConfig("epoch_seconds must be positive".into()));
    }
    if cfg.window < 2 {
        return Err(SimError::InvalidConfig("window must be at least 2".into()));
    }
    let eligible = cluster.compute_nodes().len();
    if rep_cfg.max_rf > eligible {
        return Err(SimError::RfRangeExceedsNodes {
            rf_max: rep_cfg.max_rf,
            eligible,
        });
    }
    let Some(last) = trace.last() else {
        return Ok(AdaptiveReport::default());
    };
    let initial_rf = cfg.initial_rf.clamp(rep_cfg.min_rf, rep_cfg.max_rf);
    let last_epoch = (last.t / cfg.epoch_seconds).floor() as u64;

    let mut files: BTreeMap<u64, FileState> = BTreeMap::new();
    let mut report = AdaptiveReport::default();
    let mut next = 0;

    for epoch in 0..=last_epoch {
        let end = (epoch + 1) as f64 * cfg.epoch_seconds;
        let mut touched = BTreeSet::new();
        while next < trace.len() && trace[next].t < end {
            let ev = trace[next];
            next += 1;
            if !files.contains_key(&ev.file_id) {
                let nodes = cluster.compute_nodes();
                let writer = nodes[rng.gen_range(0..nodes.len())].clone();
                let ing = cluster.ingest_file(cfg.file_size_bytes, &writer, initial_rf, rng)?;
                files.insert(
                    ev.file_id,
                    FileState {
                        blocks: ing.blocks,
                        history: AccessHistory::new(ev.file_id),
                        cumulative: 0,
                        rf: initial_rf,
                    },
                );
            }
            let st = files.get_mut(&ev.file_id).expect("inserted above");
            st.cumulative += ev.accesses;
            if ev.accesses > 0 {
                touched.insert(ev.file_id);
            }
        }

        let read: Vec<BlockId> = touched
            .iter()
            .flat_map(|f| files[f].blocks.iter().map(|b| b.block_id))
            .collect();
        let mut result = if read.is_empty() {
            SimResult {
                completion_seconds: 0.0,
                locality_histogram: LocalityHistogram::default(),
                ingest_update_cost_seconds: 0.0,
                tasks_total: 0,
            }
        } else {
            cluster.schedule_blocks(&read)?
        };

        let mut epoch_cost = 0.0;
        for (&label, st) in files.iter_mut() {
            st.history.push(AccessSample {
                t: end,
                count: st.cumulative as f64,
            })?;
            let predicted = match predict_next(&st.history, cfg.window) {
                Ok(p) => (p.count_next - st.cumulative as f64).max(0.0),
                Err(PredictionError::InsufficientHistory { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            let decision = decide_rf(label, predicted, st.rf, rep_cfg);
            let (cost, _) = apply_decision(
                &cluster.policy,
                &mut cluster.replicas,
                &st.blocks,
                &cluster.cfg.cost,
                &decision,
                rng,
            )?;
            st.rf = decision.rf_new;
            epoch_cost += cost;
            report.decisions.push(DecisionRecord {
                epoch,
                decision,
                update_cost_s: cost,
            });
        }
        result.ingest_update_cost_seconds = epoch_cost;
        report.epochs.push(EpochReport { epoch, result });
        cluster.clock = end;
    }
    Ok(report)
}
