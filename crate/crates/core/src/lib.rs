//! Deterministic simulator of a rack-aware, HDFS-style cluster.
//!
//! The crate models the default three-way block placement policy, map-phase
//! scheduling with data locality, access-count prediction by Lagrange
//! interpolation, and adaptive replication driven by those predictions.

pub mod placement;
pub mod prediction;
pub mod replication;
pub mod sim;
pub mod stats;
pub mod topology;

pub use placement::{Block, BlockId, FileId, PlacementError, PlacementPolicy, ReplicaMap, Transfer, Violation};
pub use prediction::{
    average_interval, lagrange_eval, predict_next, AccessHistory, AccessSample, PredictedAccess, PredictionError,
};
pub use replication::{
    apply_decision, decide_rf, update_cost, CostModel, DecisionReason, ReplicationConfig, ReplicationDecision,
    ReplicationError,
};
pub use sim::{
    run_adaptive, run_sweep, AccessEvent, AdaptiveConfig, AdaptiveReport, Cluster, JobSpec, SimConfig, SimError,
    SimResult, SweepResult, SweepRow,
};
pub use topology::{parse_topology, ClusterTopology, LocalityLevel, NodeName, NodeRole, RackPath, TopologyError};
