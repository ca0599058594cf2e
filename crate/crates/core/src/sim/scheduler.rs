//! Greedy list scheduling of map tasks onto map slots.
//!
//! Whenever slots become free they are visited in host-name order (then slot
//! order), and each takes the unscheduled task with the best locality for
//! its node; ties go to the lowest task index. A slot that cannot run any
//! remaining task stays idle for the rest of the phase.

use super::{Cluster, JobSpec, LocalityHistogram, SimError, SimResult};
use crate::placement::{BlockId, FileId};
use crate::topology::LocalityLevel;

struct MapTask<'a> {
    holders: &'a [String],
    bytes: u64,
    /// Fixed compute time; `None` means size / compute_rate.
    fixed_seconds: Option<f64>,
    /// Only runnable where a copy of the input lives.
    pinned: bool,
}

#[derive(Clone, Copy)]
struct Slot {
    node: usize,
    free_at: f64,
    used: bool,
    retired: bool,
}

impl Cluster {
    /// Runs the map phase of `job`. Data-heavy jobs read `input`; compute-heavy
    /// jobs are pinned to the holders of `input`'s splits when given and may
    /// run anywhere otherwise.
    pub fn schedule_and_run(&self, job: &JobSpec, input: Option<FileId>) -> Result<SimResult, SimError> {
        job.validate()?;
        match *job {
            JobSpec::DataHeavy { .. } => {
                let file = input.ok_or(SimError::MissingInput)?;
                let ids = self.files.get(&file).ok_or(SimError::FileNotIngested(file))?;
                let mut res = self.schedule_blocks(ids)?;
                res.ingest_update_cost_seconds = self.ingest_costs.get(&file).copied().unwrap_or(0.0);
                Ok(res)
            }
            JobSpec::ComputeHeavy { num_tasks, task_seconds } => {
                let splits: Option<&Vec<BlockId>> = match input {
                    Some(file) => Some(self.files.get(&file).ok_or(SimError::FileNotIngested(file))?),
                    None => None,
                };
                let all = self.compute_nodes();
                let tasks: Vec<MapTask> = (0..num_tasks)
                    .map(|i| {
                        let split = splits.and_then(|s| s.get(i));
                        MapTask {
                            holders: split.and_then(|b| self.replicas.get(*b)).unwrap_or(all),
                            bytes: 0,
                            fixed_seconds: Some(task_seconds),
                            pinned: true,
                        }
                    })
                    .collect();
                self.run_tasks(&tasks)
            }
        }
    }

    /// One data-reading map task per block, in the given order.
    pub fn schedule_blocks(&self, blocks: &[BlockId]) -> Result<SimResult, SimError> {
        let tasks: Vec<MapTask> = blocks
            .iter()
            .map(|b| {
                let block = &self.blocks[b];
                MapTask {
                    holders: self.replicas.get(*b).unwrap_or(&[]),
                    bytes: block.size_bytes,
                    fixed_seconds: None,
                    pinned: false,
                }
            })
            .collect();
        self.run_tasks(&tasks)
    }

    fn run_tasks(&self, tasks: &[MapTask]) -> Result<SimResult, SimError> {
        let nodes = self.compute_nodes();
        let topo = self.topology();
        let cost = &self.cfg.cost;

        // locality[node][task]; None when the task may not run there.
        let locality: Vec<Vec<Option<LocalityLevel>>> = nodes
            .iter()
            .map(|n| {
                tasks
                    .iter()
                    .map(|t| {
                        let best = topo.best_locality(n, t.holders).unwrap_or(LocalityLevel::OffRack);
                        (!t.pinned || best == LocalityLevel::NodeLocal).then_some(best)
                    })
                    .collect()
            })
            .collect();

        let mut slots: Vec<Slot> = (0..nodes.len())
            .flat_map(|node| {
                std::iter::repeat(Slot {
                    node,
                    free_at: 0.0,
                    used: false,
                    retired: false,
                })
                .take(self.cfg.map_slots_per_node)
            })
            .collect();

        let mut done = vec![false; tasks.len()];
        let mut remaining = tasks.len();
        let mut hist = LocalityHistogram::default();

        while remaining > 0 {
            let Some(now) = slots
                .iter()
                .filter(|s| !s.retired)
                .map(|s| s.free_at)
                .min_by(f64::total_cmp)
            else {
                return Err(SimError::Unschedulable(remaining));
            };
            let mut free: Vec<usize> = (0..slots.len())
                .filter(|&i| !slots[i].retired && slots[i].free_at <= now)
                .collect();
            free.sort_by(|&a, &b| nodes[slots[a].node].cmp(&nodes[slots[b].node]).then(a.cmp(&b)));

            for si in free {
                if remaining == 0 {
                    break;
                }
                let node = slots[si].node;
                let best = locality[node]
                    .iter()
                    .enumerate()
                    .filter(|&(ti, _)| !done[ti])
                    .filter_map(|(ti, loc)| loc.map(|l| (l, ti)))
                    .min();
                let Some((loc, ti)) = best else {
                    slots[si].retired = true;
                    continue;
                };
                let task = &tasks[ti];
                let duration = match task.fixed_seconds {
                    Some(s) => s,
                    None => task.bytes as f64 / self.cfg.compute_rate + cost.transfer_seconds(task.bytes, loc),
                };
                let slot = &mut slots[si];
                slot.free_at = now + duration;
                slot.used = true;
                done[ti] = true;
                remaining -= 1;
                hist.record(loc);
            }
        }

        let completion = slots
            .iter()
            .filter(|s| s.used)
            .map(|s| s.free_at)
            .fold(0.0, f64::max);
        Ok(SimResult {
            completion_seconds: completion,
            locality_histogram: hist,
            ingest_update_cost_seconds: 0.0,
            tasks_total: tasks.len() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{SimConfig, MIB};
    use crate::topology::parse_topology;
    use crate::topology::tests::SAMPLE_TOPOLOGY;
    use crate::ClusterTopology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn cluster(topo: &str, slots: usize) -> Cluster {
        let cfg = SimConfig {
            map_slots_per_node: slots,
            ..SimConfig::with_seed(0)
        };
        Cluster::build(Arc::new(parse_topology(topo).unwrap()), cfg).unwrap()
    }

    fn compute(n: usize, secs: f64) -> JobSpec {
        JobSpec::ComputeHeavy {
            num_tasks: n,
            task_seconds: secs,
        }
    }

    #[test]
    fn compute_heavy_one_wave() {
        let c = cluster(SAMPLE_TOPOLOGY, 2);
        let r = c.schedule_and_run(&compute(14, 10.0), None).unwrap();
        assert_eq!(r.completion_seconds, 10.0);
        assert_eq!(r.locality_histogram.node_local, 14);
        assert_eq!(r.tasks_total, 14);
    }

    #[test]
    fn compute_heavy_pigeonhole_second_wave() {
        let c = cluster(SAMPLE_TOPOLOGY, 2);
        let r = c.schedule_and_run(&compute(15, 10.0), None).unwrap();
        assert_eq!(r.completion_seconds, 20.0);
    }

    #[test]
    fn compute_heavy_pinned_to_split_holders() {
        let mut c = cluster(SAMPLE_TOPOLOGY, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ing = c.ingest_splits(14, "Machine3.pc", 1, &mut rng).unwrap();
        let r = c.schedule_and_run(&compute(14, 10.0), Some(ing.file)).unwrap();
        // All splits on one node with two slots: seven waves.
        assert_eq!(r.completion_seconds, 70.0);
        assert_eq!(r.locality_histogram.node_local, 14);
    }

    #[test]
    fn local_slot_beats_off_rack_slot() {
        // Node a holds the only copy; b sits on another rack. Both have a
        // free slot at t=0.
        let mut c = cluster("a /r1\nb /r2", 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ing = c.ingest_file(64 * MIB, "a", 1, &mut rng).unwrap();
        let r = c
            .schedule_and_run(&JobSpec::DataHeavy { file_size_bytes: 64 * MIB }, Some(ing.file))
            .unwrap();
        assert_eq!(r.locality_histogram.node_local, 1);
        assert!((r.completion_seconds - 67108864.0 / 50e6).abs() < 1e-12);
        assert!((r.completion_seconds - 1.342).abs() < 1e-3);
    }

    /// With every slot free, a lone task goes to the first slot in host-name
    /// order and runs at whatever locality that node has.
    #[test]
    fn single_task_goes_to_first_host_by_name() {
        for seed in 0..20 {
            let mut c = cluster(SAMPLE_TOPOLOGY, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let writer = c.compute_nodes()[seed as usize % 7].clone();
            let ing = c.ingest_file(64 * MIB, &writer, 1 + seed as usize % 3, &mut rng).unwrap();
            let holders = c.replicas().get(ing.blocks[0].block_id).unwrap().to_vec();
            let first = c.compute_nodes().iter().min().unwrap();
            let loc = holders.iter().map(|h| c.topology().locality(first, h)).min().unwrap();
            let expected = 64.0 * MIB as f64 / 50e6 + c.config().cost.transfer_seconds(64 * MIB, loc);
            let r = c
                .schedule_and_run(&JobSpec::DataHeavy { file_size_bytes: 1 }, Some(ing.file))
                .unwrap();
            assert_eq!(r.completion_seconds, expected);
        }
    }

    /// A free slot on the holder beats a free off-rack slot: both orders of
    /// the two candidate slots are enumerated and the local one is cheaper.
    #[test]
    fn local_choice_is_the_cheaper_assignment() {
        let mut c = cluster("a /r1\nb /r2", 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ing = c.ingest_file(64 * MIB, "a", 1, &mut rng).unwrap();
        let r = c
            .schedule_and_run(&JobSpec::DataHeavy { file_size_bytes: 64 * MIB }, Some(ing.file))
            .unwrap();
        let cost = &c.config().cost;
        let on_a = 64.0 * MIB as f64 / 50e6;
        let on_b = on_a + cost.transfer_seconds(64 * MIB, crate::LocalityLevel::OffRack);
        assert_eq!(r.completion_seconds, on_a.min(on_b));
    }

    #[test]
    fn data_heavy_errors() {
        let c = cluster(SAMPLE_TOPOLOGY, 2);
        let job = JobSpec::DataHeavy { file_size_bytes: MIB };
        assert_eq!(c.schedule_and_run(&job, None), Err(SimError::MissingInput));
        assert_eq!(
            c.schedule_and_run(&job, Some(FileId(4))),
            Err(SimError::FileNotIngested(FileId(4)))
        );
        let empty = Cluster::build(Arc::new(ClusterTopology::default()), SimConfig::with_seed(0));
        assert!(empty.is_err());
    }

    #[test]
    fn makespan_respects_lower_bounds() {
        for seed in 0..30u64 {
            let mut c = cluster(SAMPLE_TOPOLOGY, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rf = 1 + (seed as usize % 7);
            let writer = c.compute_nodes()[(seed as usize * 3) % 7].clone();
            let size = (1 + seed % 5) * 300 * MIB;
            let ing = c.ingest_file(size, &writer, rf, &mut rng).unwrap();
            let r = c
                .schedule_and_run(&JobSpec::DataHeavy { file_size_bytes: size }, Some(ing.file))
                .unwrap();
            let work: f64 = ing.blocks.iter().map(|b| b.size_bytes as f64 / 50e6).sum();
            let longest = ing.blocks.iter().map(|b| b.size_bytes as f64 / 50e6).fold(0.0, f64::max);
            assert!(r.completion_seconds + 1e-9 >= work / 14.0);
            assert!(r.completion_seconds + 1e-9 >= longest);
            assert_eq!(r.locality_histogram.total(), r.tasks_total);
            assert_eq!(r.tasks_total, ing.blocks.len() as u64);
        }
    }
}
