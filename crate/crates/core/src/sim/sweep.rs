//! Replication sweep: the same job at every replication factor in a range,
//! repeated over independently seeded runs.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cluster, JobSpec, LocalityHistogram, SimConfig, SimError, SimResult};
use crate::stats;
use crate::topology::ClusterTopology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rf: usize,
    pub mean_completion_s: f64,
    pub stddev_s: f64,
    pub node_local_frac: f64,
    pub rack_local_frac: f64,
    pub off_rack_frac: f64,
    pub mean_update_cost_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, rf: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.rf == rf)
    }

    /// Replication factor with the lowest mean completion (first on ties).
    pub fn argmin_rf(&self) -> Option<usize> {
        self.rows
            .iter()
            .min_by(|a, b| a.mean_completion_s.total_cmp(&b.mean_completion_s))
            .map(|r| r.rf)
    }
}

/// Per-run seed: the base seed XOR-folded with a splitmix64 mix of
/// `(rf << 32) | run`. The mix is a bijection, so points never share a seed,
/// and neighbouring base seeds do not just permute each other's runs.
pub fn derive_seed(base: u64, rf: usize, run: usize) -> u64 {
    base ^ splitmix64(((rf as u64) << 32) | run as u64)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent replication: fresh cluster, a uniformly drawn writer,
/// ingest at `rf`, then the map phase.
pub fn run_once(
    topo: &Arc<ClusterTopology>,
    cfg: &SimConfig,
    job: &JobSpec,
    rf: usize,
    seed: u64,
) -> Result<SimResult, SimError> {
    let mut cluster = Cluster::build(Arc::clone(topo), cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = cluster.compute_nodes();
    let writer = nodes[rng.gen_range(0..nodes.len())].clone();
    match *job {
        JobSpec::DataHeavy { file_size_bytes } => {
            let ing = cluster.ingest_file(file_size_bytes, &writer, rf, &mut rng)?;
            cluster.schedule_and_run(job, Some(ing.file))
        }
        JobSpec::ComputeHeavy { num_tasks, .. } => {
            // Splits are tiny; their copies are not priced.
            let ing = cluster.ingest_splits(num_tasks, &writer, rf, &mut rng)?;
            let mut res = cluster.schedule_and_run(job, Some(ing.file))?;
            res.ingest_update_cost_seconds = 0.0;
            Ok(res)
        }
    }
}

pub fn run_sweep(
    topo: &Arc<ClusterTopology>,
    cfg: &SimConfig,
    job: &JobSpec,
    rf_min: usize,
    rf_max: usize,
) -> Result<SweepResult, SimError> {
    cfg.validate()?;
    job.validate()?;
    if rf_min == 0 || rf_min > rf_max {
        return Err(SimError::InvalidRfRange { rf_min, rf_max });
    }
    let eligible = Cluster::build(Arc::clone(topo), cfg.clone())?.compute_nodes().len();
    if rf_max > eligible {
        return Err(SimError::RfRangeExceedsNodes { rf_max, eligible });
    }

    let runs = cfg.runs_per_point;
    let keys: Vec<(usize, usize)> = (rf_min..=rf_max)
        .flat_map(|rf| (0..runs).map(move |run| (rf, run)))
        .collect();
    // Runs are independent; collect() keeps key order so aggregation is
    // identical regardless of thread interleaving.
    let results: Vec<SimResult> = keys
        .par_iter()
        .map(|&(rf, run)| run_once(topo, cfg, job, rf, derive_seed(cfg.seed, rf, run)))
        .collect::<Result<_, _>>()?;

    let rows = results
        .chunks(runs)
        .zip(rf_min..=rf_max)
        .map(|(chunk, rf)| aggregate(rf, chunk, cfg.include_ingest_cost && job.is_data_heavy()))
        .collect();
    Ok(SweepResult { rows })
}

fn aggregate(rf: usize, runs: &[SimResult], include_ingest: bool) -> SweepRow {
    let completions: Vec<f64> = runs
        .iter()
        .map(|r| {
            if include_ingest {
                r.completion_seconds + r.ingest_update_cost_seconds
            } else {
                r.completion_seconds
            }
        })
        .collect();
    let costs: Vec<f64> = runs.iter().map(|r| r.ingest_update_cost_seconds).collect();
    let mut hist = LocalityHistogram::default();
    for r in runs {
        hist.merge(&r.locality_histogram);
    }
    let total = hist.total().max(1) as f64;
    SweepRow {
        rf,
        mean_completion_s: stats::mean(&completions),
        stddev_s: stats::sample_stddev(&completions),
        node_local_frac: hist.node_local as f64 / total,
        rack_local_frac: hist.rack_local as f64 / total,
        off_rack_frac: hist.off_rack as f64 / total,
        mean_update_cost_s: stats::mean(&costs),
    }
}
