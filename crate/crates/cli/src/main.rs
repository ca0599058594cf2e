//! `rackrep`: command-line runner for the rack-aware replication simulator.
//!
//! Exit codes: 0 success, 2 input/config error, 3 simulation precondition
//! violated.

mod chart;
mod config;
mod trace;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rackrep::{
    parse_topology, predict_next, run_adaptive, run_sweep, AccessHistory, AdaptiveReport, Cluster, ClusterTopology,
    JobSpec, ReplicationConfig, SimError, SweepResult,
};
use serde_json::{json, Value};

use config::RunConfig;

pub const RESULTS_HEADER: &str = "rf,mean_completion_s,stddev_s,node_local_frac,rack_local_frac,off_rack_frac,mean_update_cost_s";
pub const DECISIONS_HEADER: &str = "epoch,file_id,rf_old,rf_new,predicted_count,reason,update_cost_s";
const EPOCHS_HEADER: &str = "epoch,completion_s,node_local,rack_local,off_rack,tasks_total,update_cost_s";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::InvalidTrace(_) | SimError::Prediction(_) => Self::input(e.to_string()),
            _ => Self::precondition(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "rackrep", version, about = "Rack-aware replication simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Topology file utilities.
    Topology {
        #[command(subcommand)]
        cmd: TopologyCmd,
    },
    /// Sweep a job over a range of replication factors.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Predict the next access time and cumulative count from a trace.
    Predict {
        /// CSV with columns t_seconds,count
        #[arg(short = 'i', long)]
        trace: PathBuf,
        #[arg(short, long, default_value_t = rackrep::prediction::DEFAULT_WINDOW)]
        window: usize,
    },
    /// Run the adaptive replication loop over an access trace.
    Adaptive {
        #[arg(short, long)]
        config: PathBuf,
        /// CSV with columns t_seconds,file_id,accesses
        #[arg(short = 'i', long)]
        trace: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TopologyCmd {
    /// Print the rack of each host, each followed by one space.
    Resolve {
        #[arg(short, long)]
        topology: PathBuf,
        hosts: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Topology {
            cmd: TopologyCmd::Resolve { topology, hosts },
        } => cmd_resolve(&topology, &hosts),
        Cmd::Sweep { config, out } => cmd_sweep(&config, &out),
        Cmd::Predict { trace, window } => cmd_predict(&trace, window),
        Cmd::Adaptive { config, trace, out } => cmd_adaptive(&config, &trace, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rackrep: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path) -> Result<ClusterTopology, CliError> {
    parse_topology(&read(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_resolve(topology: &Path, hosts: &[String]) -> Result<(), CliError> {
    let topo = load_topology(topology)?;
    print!("{}", topo.emit_mapping_output(hosts));
    Ok(())
}

fn cmd_predict(trace_path: &Path, window: usize) -> Result<(), CliError> {
    let samples = trace::read_samples(&read(trace_path)?)?;
    let history = AccessHistory::from_samples(0, &samples).map_err(|e| CliError::input(e.to_string()))?;
    let p = predict_next(&history, window).map_err(|e| CliError::input(e.to_string()))?;
    println!("{},{},{}", p.t_next, p.count_next, p.window_used);
    Ok(())
}

struct Loaded {
    cfg: RunConfig,
    topo: Arc<ClusterTopology>,
    eligible: usize,
}

fn load(config_path: &Path) -> Result<Loaded, CliError> {
    let cfg = config::parse_config(&read(config_path)?, config_path)?;
    let topo = Arc::new(load_topology(&cfg.topology)?);
    let eligible = Cluster::build(Arc::clone(&topo), cfg.sim.clone())?.compute_nodes().len();
    Ok(Loaded { cfg, topo, eligible })
}

fn base_params(cfg: &RunConfig) -> Vec<(&'static str, Value)> {
    let s = &cfg.sim;
    vec![
        ("sim.block_size_bytes", json!(s.block_size_bytes)),
        ("sim.map_slots_per_node", json!(s.map_slots_per_node)),
        ("sim.compute_rate", json!(s.compute_rate)),
        ("sim.fixed_task_compute_seconds", json!(s.fixed_task_compute_seconds)),
        ("sim.runs_per_point", json!(s.runs_per_point)),
        ("sim.exclude_master", json!(s.exclude_master)),
        ("sim.include_ingest_cost", json!(s.include_ingest_cost)),
        ("cost.bw_in_rack", json!(s.cost.bw_in_rack)),
        ("cost.bw_cross_rack", json!(s.cost.bw_cross_rack)),
        ("cost.per_transfer_latency_in_rack", json!(s.cost.per_transfer_latency_in_rack)),
        ("cost.per_transfer_latency_cross", json!(s.cost.per_transfer_latency_cross)),
    ]
}

fn manifest(
    command: &str,
    config_path: &Path,
    cfg: &RunConfig,
    params: Vec<(&'static str, Value)>,
    extra: Vec<(&'static str, Value)>,
) -> String {
    let params: serde_json::Map<String, Value> = params.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config_path".into(), json!(config_path.display().to_string()));
    m.insert("topology_path".into(), json!(cfg.topology.display().to_string()));
    m.insert("seed".into(), json!(cfg.sim.seed));
    m.insert("tool_version".into(), json!(concat!("rackrep ", env!("CARGO_PKG_VERSION"))));
    m.insert("params".into(), Value::Object(params));
    for (k, v) in extra {
        m.insert(k.into(), v);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("manifest serializes");
    s.push('\n');
    s
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(','))
        .map_err(|e| CliError::input(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn results_csv(res: &SweepResult) -> Result<String, CliError> {
    csv_text(
        RESULTS_HEADER,
        res.rows.iter().map(|r| {
            vec![
                r.rf.to_string(),
                r.mean_completion_s.to_string(),
                r.stddev_s.to_string(),
                r.node_local_frac.to_string(),
                r.rack_local_frac.to_string(),
                r.off_rack_frac.to_string(),
                r.mean_update_cost_s.to_string(),
            ]
        }),
    )
}

fn cmd_sweep(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let Loaded { cfg, topo, eligible } = load(config_path)?;
    let rf_min = cfg.rf_min;
    let rf_max = cfg.rf_max.unwrap_or(eligible);
    if rf_min == 0 || rf_min > rf_max {
        return Err(CliError::input(format!(
            "invalid range sweep.rf_min={rf_min} sweep.rf_max={rf_max}"
        )));
    }
    if rf_max > eligible {
        return Err(CliError::precondition(format!(
            "sweep.rf_max={rf_max} exceeds the {eligible} eligible nodes"
        )));
    }
    let res = run_sweep(&topo, &cfg.sim, &cfg.job, rf_min, rf_max)?;

    let mut params = base_params(&cfg);
    match cfg.job {
        JobSpec::DataHeavy { file_size_bytes } => {
            params.push(("job.kind", json!("data_heavy")));
            params.push(("job.file_size_bytes", json!(file_size_bytes)));
        }
        JobSpec::ComputeHeavy { num_tasks, .. } => {
            params.push(("job.kind", json!("compute_heavy")));
            params.push(("job.num_tasks", json!(num_tasks)));
        }
    }
    params.push(("sweep.rf_min", json!(rf_min)));
    params.push(("sweep.rf_max", json!(rf_max)));
    let completion = if cfg.job.is_data_heavy() && cfg.sim.include_ingest_cost {
        "map_makespan + ingest_update_cost"
    } else {
        "map_makespan"
    };
    let manifest = manifest(
        "sweep",
        config_path,
        &cfg,
        params,
        vec![("model", json!({ "completion": completion }))],
    );

    fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    let points: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.rf as f64, r.mean_completion_s)).collect();
    let compact: Value = serde_json::from_str(&manifest).expect("manifest is json");
    let svg = chart::line_chart(
        "Mean completion time vs replication factor",
        "replication factor",
        "mean completion (s)",
        &points,
        &compact.to_string(),
    );
    write(&out.join("results.csv"), &results_csv(&res)?)?;
    write(&out.join("results.svg"), &svg)?;
    write(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} rows to {}", res.rows.len(), out.join("results.csv").display());
    Ok(())
}

pub fn decisions_csv(report: &AdaptiveReport) -> Result<String, CliError> {
    csv_text(
        DECISIONS_HEADER,
        report.decisions.iter().map(|d| {
            vec![
                d.epoch.to_string(),
                d.decision.file_id.to_string(),
                d.decision.rf_old.to_string(),
                d.decision.rf_new.to_string(),
                d.decision.predicted_count.to_string(),
                d.decision.reason.as_str().to_string(),
                d.update_cost_s.to_string(),
            ]
        }),
    )
}

fn epochs_csv(report: &AdaptiveReport) -> Result<String, CliError> {
    csv_text(
        EPOCHS_HEADER,
        report.epochs.iter().map(|e| {
            let r = &e.result;
            vec![
                e.epoch.to_string(),
                r.completion_seconds.to_string(),
                r.locality_histogram.node_local.to_string(),
                r.locality_histogram.rack_local.to_string(),
                r.locality_histogram.off_rack.to_string(),
                r.tasks_total.to_string(),
                r.ingest_update_cost_seconds.to_string(),
            ]
        }),
    )
}

fn cmd_adaptive(config_path: &Path, trace_path: &Path, out: &Path) -> Result<(), CliError> {
    let Loaded { cfg, topo, eligible } = load(config_path)?;
    let events = trace::read_events(&read(trace_path)?)?;
    let rep = ReplicationConfig {
        min_rf: cfg.min_rf,
        max_rf: cfg.max_rf.unwrap_or(eligible),
        accesses_per_replica: cfg.accesses_per_replica,
        hysteresis: cfg.hysteresis,
    };
    rep.validate().map_err(|e| CliError::input(format!("replication: {e}")))?;
    if rep.max_rf > eligible {
        return Err(CliError::precondition(format!(
            "replication.max_rf={} exceeds the {eligible} eligible nodes",
            rep.max_rf
        )));
    }
    let mut cluster = Cluster::build(topo, cfg.sim.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
    let report = run_adaptive(&mut cluster, &events, &cfg.adaptive, &rep, &mut rng)?;

    let mut params = base_params(&cfg);
    params.extend([
        ("replication.min_rf", json!(rep.min_rf)),
        ("replication.max_rf", json!(rep.max_rf)),
        ("replication.accesses_per_replica", json!(rep.accesses_per_replica)),
        ("replication.hysteresis", json!(rep.hysteresis)),
        ("adaptive.epoch_seconds", json!(cfg.adaptive.epoch_seconds)),
        ("adaptive.window", json!(cfg.adaptive.window)),
        ("adaptive.initial_rf", json!(cfg.adaptive.initial_rf)),
        ("adaptive.file_size_bytes", json!(cfg.adaptive.file_size_bytes)),
    ]);
    let manifest = manifest(
        "adaptive",
        config_path,
        &cfg,
        params,
        vec![("trace_path", json!(trace_path.display().to_string()))],
    );

    fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    write(&out.join("decisions.csv"), &decisions_csv(&report)?)?;
    write(&out.join("epochs.csv"), &epochs_csv(&report)?)?;
    write(&out.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} decisions over {} epochs to {}",
        report.decisions.len(),
        report.epochs.len(),
        out.join("decisions.csv").display()
    );
    Ok(())
}
