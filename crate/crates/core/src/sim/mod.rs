//! Discrete-event simulation of the map phase.
//!
//! A run builds a fresh [`Cluster`], ingests the job's input with a fixed
//! replication factor and list-schedules one map task per block onto the
//! nodes' map slots.

mod adaptive;
mod cluster;
mod scheduler;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::{FileId, PlacementError};
use crate::prediction::PredictionError;
use crate::replication::{CostModel, ReplicationError};
use crate::topology::LocalityLevel;

pub use adaptive::{run_adaptive, AccessEvent, AdaptiveConfig, AdaptiveReport, DecisionRecord, EpochReport};
pub use cluster::{Cluster, Ingest};
pub use sweep::{derive_seed, run_once, run_sweep, SweepResult, SweepRow};

pub const MIB: u64 = 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("topology has no eligible compute nodes")]
    NoEligibleNodes,
    #[error("file {0} has not been ingested")]
    FileNotIngested(FileId),
    #[error("data-heavy job needs an ingested input file")]
    MissingInput,
    #[error("{0} map tasks cannot run on any compute node")]
    Unschedulable(usize),
    #[error("rf_max {rf_max} exceeds the {eligible} eligible nodes")]
    RfRangeExceedsNodes { rf_max: usize, eligible: usize },
    #[error("invalid replication range {rf_min}..={rf_max}")]
    InvalidRfRange { rf_min: usize, rf_max: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Replication(#[from] ReplicationError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub block_size_bytes: u64,
    pub map_slots_per_node: usize,
    /// bytes/s a map task chews through
    pub compute_rate: f64,
    pub fixed_task_compute_seconds: f64,
    pub cost: CostModel,
    pub seed: u64,
    pub runs_per_point: usize,
    pub exclude_master: bool,
    /// Add the ingest update cost to data-heavy completion times.
    pub include_ingest_cost: bool,
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            block_size_bytes: 64 * MIB,
            map_slots_per_node: 2,
            compute_rate: 50e6,
            fixed_task_compute_seconds: 10.0,
            cost: CostModel::default(),
            seed,
            runs_per_point: 8,
            exclude_master: true,
            include_ingest_cost: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.block_size_bytes == 0 {
            return bad("block_size_bytes must be positive");
        }
        if self.map_slots_per_node == 0 {
            return bad("map_slots_per_node must be at least 1");
        }
        if !(self.compute_rate.is_finite() && self.compute_rate > 0.0) {
            return bad("compute_rate must be positive");
        }
        if !(self.fixed_task_compute_seconds.is_finite() && self.fixed_task_compute_seconds > 0.0) {
            return bad("fixed_task_compute_seconds must be positive");
        }
        if self.runs_per_point == 0 {
            return bad("runs_per_point must be at least 1");
        }
        self.cost.validate().map_err(SimError::InvalidConfig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JobSpec {
    /// One map task per block of a single input file.
    DataHeavy { file_size_bytes: u64 },
    /// Tasks with negligible input splits and a fixed compute time. A task
    /// may only run on a node holding a copy of its split.
    ComputeHeavy { num_tasks: usize, task_seconds: f64 },
}

impl JobSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            JobSpec::DataHeavy { file_size_bytes } if file_size_bytes == 0 => {
                Err(SimError::InvalidConfig("file_size_bytes must be at least 1".into()))
            }
            JobSpec::ComputeHeavy { num_tasks, .. } if num_tasks == 0 => {
                Err(SimError::InvalidConfig("num_tasks must be at least 1".into()))
            }
            JobSpec::ComputeHeavy { task_seconds, .. } if !(task_seconds.is_finite() && task_seconds > 0.0) => {
                Err(SimError::InvalidConfig("task_seconds must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_data_heavy(&self) -> bool {
        matches!(self, JobSpec::DataHeavy { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityHistogram {
    pub node_local: u64,
    pub rack_local: u64,
    pub off_rack: u64,
}

impl LocalityHistogram {
    pub fn record(&mut self, level: LocalityLevel) {
        match level {
            LocalityLevel::NodeLocal => self.node_local += 1,
            LocalityLevel::RackLocal => self.rack_local += 1,
            LocalityLevel::OffRack => self.off_rack += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.node_local + self.rack_local + self.off_rack
    }

    pub fn merge(&mut self, other: &LocalityHistogram) {
        self.node_local += other.node_local;
        self.rack_local += other.rack_local;
        self.off_rack += other.off_rack;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Map-phase makespan, seconds.
    pub completion_seconds: f64,
    pub locality_histogram: LocalityHistogram,
    pub ingest_update_cost_seconds: f64,
    pub tasks_total: u64,
}
