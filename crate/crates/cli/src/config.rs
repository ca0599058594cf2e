//! Flat `key=value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed=42
//! topology=topology.data
//! job.kind=data_heavy
//! job.file_size_bytes=1073741824
//! cost.bw_cross_rack=12500000
//! ```
//!
//! Every key is optional except `seed`. Unknown or repeated keys are
//! rejected. `topology` is resolved relative to the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rackrep::{AdaptiveConfig, CostModel, JobSpec, SimConfig};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "seed",
    "topology",
    "sim.block_size_bytes",
    "sim.map_slots_per_node",
    "sim.compute_rate",
    "sim.fixed_task_compute_seconds",
    "sim.runs_per_point",
    "sim.exclude_master",
    "sim.include_ingest_cost",
    "job.kind",
    "job.file_size_bytes",
    "job.num_tasks",
    "sweep.rf_min",
    "sweep.rf_max",
    "cost.bw_in_rack",
    "cost.bw_cross_rack",
    "cost.per_transfer_latency_in_rack",
    "cost.per_transfer_latency_cross",
    "replication.min_rf",
    "replication.max_rf",
    "replication.accesses_per_replica",
    "replication.hysteresis",
    "adaptive.epoch_seconds",
    "adaptive.window",
    "adaptive.initial_rf",
    "adaptive.file_size_bytes",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: PathBuf,
    pub sim: SimConfig,
    pub job: JobSpec,
    pub rf_min: usize,
    /// `None` means every eligible node.
    pub rf_max: Option<usize>,
    pub min_rf: usize,
    pub max_rf: Option<usize>,
    pub accesses_per_replica: f64,
    pub hysteresis: usize,
    pub adaptive: AdaptiveConfig,
}

struct Raw {
    values: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|(line, v)| {
                v.parse()
                    .map_err(|_| CliError::input(format!("config line {line}: invalid value {v:?} for {key}")))
            })
            .transpose()
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }
}

pub fn parse_config(text: &str, config_path: &Path) -> Result<RunConfig, CliError> {
    let mut values = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::input(format!("config line {lineno}: expected key=value")));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(CliError::input(format!("config line {lineno}: unknown key {k:?}")));
        }
        if values.insert(k.to_string(), (lineno, v.to_string())).is_some() {
            return Err(CliError::input(format!("config line {lineno}: duplicate key {k:?}")));
        }
    }
    let raw = Raw { values };

    let seed: u64 = match raw.opt("seed")? {
        Some(s) => s,
        None => return Err(CliError::input("config: missing required key \"seed\"")),
    };
    let base = config_path.parent().unwrap_or(Path::new(""));
    let topology = base.join(raw.get("topology", String::from("topology.data"))?);

    let d = SimConfig::with_seed(seed);
    let dc = CostModel::default();
    let sim = SimConfig {
        block_size_bytes: raw.get("sim.block_size_bytes", d.block_size_bytes)?,
        map_slots_per_node: raw.get("sim.map_slots_per_node", d.map_slots_per_node)?,
        compute_rate: raw.get("sim.compute_rate", d.compute_rate)?,
        fixed_task_compute_seconds: raw.get("sim.fixed_task_compute_seconds", d.fixed_task_compute_seconds)?,
        cost: CostModel {
            bw_in_rack: raw.get("cost.bw_in_rack", dc.bw_in_rack)?,
            bw_cross_rack: raw.get("cost.bw_cross_rack", dc.bw_cross_rack)?,
            per_transfer_latency_in_rack: raw.get("cost.per_transfer_latency_in_rack", dc.per_transfer_latency_in_rack)?,
            per_transfer_latency_cross: raw.get("cost.per_transfer_latency_cross", dc.per_transfer_latency_cross)?,
        },
        seed,
        runs_per_point: raw.get("sim.runs_per_point", d.runs_per_point)?,
        exclude_master: raw.get("sim.exclude_master", d.exclude_master)?,
        include_ingest_cost: raw.get("sim.include_ingest_cost", d.include_ingest_cost)?,
    };
    sim.validate().map_err(|e| CliError::input(format!("config: {e}")))?;

    let kind: String = raw.get("job.kind", String::from("data_heavy"))?;
    let job = match kind.as_str() {
        "data_heavy" => JobSpec::DataHeavy {
            file_size_bytes: raw.get("job.file_size_bytes", 1024 * rackrep::sim::MIB)?,
        },
        "compute_heavy" => JobSpec::ComputeHeavy {
            num_tasks: raw.get("job.num_tasks", 70)?,
            task_seconds: sim.fixed_task_compute_seconds,
        },
        other => {
            return Err(CliError::input(format!(
                "config: job.kind must be data_heavy or compute_heavy, got {other:?}"
            )))
        }
    };
    job.validate().map_err(|e| CliError::input(format!("config: {e}")))?;

    let da = AdaptiveConfig::default();
    let adaptive = AdaptiveConfig {
        epoch_seconds: raw.get("adaptive.epoch_seconds", da.epoch_seconds)?,
        window: raw.get("adaptive.window", da.window)?,
        initial_rf: raw.get("adaptive.initial_rf", da.initial_rf)?,
        file_size_bytes: raw.get("adaptive.file_size_bytes", da.file_size_bytes)?,
    };

    Ok(RunConfig {
        topology,
        sim,
        job,
        rf_min: raw.get("sweep.rf_min", 1)?,
        rf_max: raw.opt("sweep.rf_max")?,
        min_rf: raw.get("replication.min_rf", 1)?,
        max_rf: raw.opt("replication.max_rf")?,
        accesses_per_replica: raw.get("replication.accesses_per_replica", 2.0)?,
        hysteresis: raw.get("replication.hysteresis", 1)?,
        adaptive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        parse_config(text, Path::new("/cfg/run.conf"))
    }

    #[test]
    fn defaults_and_relative_topology() {
        let c = parse("seed=5\n").unwrap();
        assert_eq!(c.sim.seed, 5);
        assert_eq!(c.topology, PathBuf::from("/cfg/topology.data"));
        assert_eq!(c.job, JobSpec::DataHeavy { file_size_bytes: 1 << 30 });
        assert_eq!(c.rf_max, None);
        assert_eq!(c.sim, SimConfig::with_seed(5));
    }

    #[test]
    fn overrides() {
        let c = parse(
            "# sweep\nseed = 1\n\njob.kind=compute_heavy\njob.num_tasks=28\nsim.fixed_task_compute_seconds=3.5\nsweep.rf_max=4\ncost.bw_cross_rack=1e6\n",
        )
        .unwrap();
        assert_eq!(
            c.job,
            JobSpec::ComputeHeavy {
                num_tasks: 28,
                task_seconds: 3.5
            }
        );
        assert_eq!(c.rf_max, Some(4));
        assert_eq!(c.sim.cost.bw_cross_rack, 1e6);
    }

    #[test]
    fn errors() {
        let msg = |t: &str| parse(t).unwrap_err().message;
        assert!(msg("topology=x\n").contains("seed"));
        assert!(msg("seed=1\nbogus=2\n").contains("line 2"));
        assert!(msg("seed=1\nseed=2\n").contains("duplicate"));
        assert!(msg("seed=x\n").contains("seed"));
        assert!(msg("seed=1\njunk\n").contains("line 2"));
        assert!(msg("seed=1\njob.kind=pi\n").contains("job.kind"));
        assert!(msg("seed=1\nsim.map_slots_per_node=0\n").contains("map_slots_per_node"));
        assert_eq!(parse("seed=1\nsim.compute_rate=-1\n").unwrap_err().code, 2);
    }
}
