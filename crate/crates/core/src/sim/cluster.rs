use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::{SimConfig, SimError};
use crate::placement::{Block, BlockId, FileId, PlacementPolicy, ReplicaMap, Transfer};
use crate::replication::update_cost;
use crate::topology::ClusterTopology;

/// Size given to the placeholder splits of compute-heavy jobs.
pub(crate) const SPLIT_BYTES: u64 = 1;

/// Namenode-side state of one simulation: blocks, files and replicas.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub(crate) cfg: SimConfig,
    pub(crate) policy: PlacementPolicy,
    pub(crate) replicas: ReplicaMap,
    pub(crate) blocks: BTreeMap<BlockId, Block>,
    pub(crate) files: BTreeMap<FileId, Vec<BlockId>>,
    pub(crate) ingest_costs: BTreeMap<FileId, f64>,
    next_block: u64,
    next_file: u64,
    pub(crate) clock: f64,
}

/// Outcome of writing one file into the cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingest {
    pub file: FileId,
    pub blocks: Vec<Block>,
    pub transfers: Vec<Transfer>,
    pub cost_seconds: f64,
}

impl Cluster {
    pub fn build(topo: Arc<ClusterTopology>, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let policy = PlacementPolicy::new(topo, cfg.exclude_master);
        if policy.eligible().is_empty() {
            return Err(SimError::NoEligibleNodes);
        }
        Ok(Self {
            cfg,
            policy,
            replicas: ReplicaMap::new(),
            blocks: BTreeMap::new(),
            files: BTreeMap::new(),
            ingest_costs: BTreeMap::new(),
            next_block: 0,
            next_file: 0,
            clock: 0.0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &PlacementPolicy {
        &self.policy
    }

    pub fn topology(&self) -> &ClusterTopology {
        self.policy.topology()
    }

    pub fn compute_nodes(&self) -> &[String] {
        self.policy.eligible()
    }

    pub fn replicas(&self) -> &ReplicaMap {
        &self.replicas
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn file_blocks(&self, file: FileId) -> Option<Vec<&Block>> {
        self.files
            .get(&file)
            .map(|ids| ids.iter().map(|id| &self.blocks[id]).collect())
    }

    /// Splits a file into blocks, places each with `rf` copies and prices
    /// the copies made off the writer.
    pub fn ingest_file<R: Rng + ?Sized>(
        &mut self,
        file_size_bytes: u64,
        writer: &str,
        rf: usize,
        rng: &mut R,
    ) -> Result<Ingest, SimError> {
        if file_size_bytes == 0 {
            return Err(SimError::InvalidConfig("file size must be at least 1 byte".into()));
        }
        let bs = self.cfg.block_size_bytes;
        let full = file_size_bytes / bs;
        let mut sizes = vec![bs; full as usize];
        if file_size_bytes % bs != 0 {
            sizes.push(file_size_bytes % bs);
        }
        self.ingest_blocks(&sizes, writer, rf, rng)
    }

    /// Writes `num_tasks` placeholder splits, one block each, for a
    /// compute-heavy job.
    pub fn ingest_splits<R: Rng + ?Sized>(
        &mut self,
        num_tasks: usize,
        writer: &str,
        rf: usize,
        rng: &mut R,
    ) -> Result<Ingest, SimError> {
        self.ingest_blocks(&vec![SPLIT_BYTES; num_tasks], writer, rf, rng)
    }

    fn ingest_blocks<R: Rng + ?Sized>(
        &mut self,
        sizes: &[u64],
        writer: &str,
        rf: usize,
        rng: &mut R,
    ) -> Result<Ingest, SimError> {
        let file = FileId(self.next_file);
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut placed = Vec::with_capacity(sizes.len());
        let mut transfers = Vec::new();
        for (i, &size) in sizes.iter().enumerate() {
            let hosts = self.policy.place_block(writer, rf, rng)?;
            let block = Block {
                block_id: BlockId(self.next_block + i as u64),
                file_id: file,
                size_bytes: size,
                index_in_file: i as u32,
            };
            transfers.extend(hosts[1..].iter().map(|dst| Transfer {
                block: block.block_id,
                size_bytes: size,
                src: writer.to_string(),
                dst: dst.clone(),
            }));
            placed.push(hosts);
            blocks.push(block);
        }
        let cost_seconds = update_cost(&transfers, self.policy.topology(), &self.cfg.cost)?;

        self.next_file += 1;
        self.next_block += sizes.len() as u64;
        for (b, hosts) in blocks.iter().zip(placed) {
            self.replicas.insert(b.block_id, hosts);
            self.blocks.insert(b.block_id, b.clone());
        }
        self.files.insert(file, blocks.iter().map(|b| b.block_id).collect());
        self.ingest_costs.insert(file, cost_seconds);
        Ok(Ingest {
            file,
            blocks,
            transfers,
            cost_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MIB;
    use crate::topology::parse_topology;
    use crate::topology::tests::SAMPLE_TOPOLOGY;
    use crate::CostModel;
    use crate::LocalityLevel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Arc<ClusterTopology> {
        Arc::new(parse_topology(SAMPLE_TOPOLOGY).unwrap())
    }

    #[test]
    fn build_counts_compute_nodes() {
        let c = Cluster::build(sample(), SimConfig::with_seed(0)).unwrap();
        assert_eq!(c.compute_nodes().len(), 7);
        assert!(c.replicas().is_empty());
        assert_eq!(c.clock(), 0.0);
        let cfg = SimConfig {
            exclude_master: false,
            ..SimConfig::with_seed(0)
        };
        assert_eq!(Cluster::build(sample(), cfg).unwrap().compute_nodes().len(), 8);
        assert_eq!(
            Cluster::build(Arc::new(ClusterTopology::default()), SimConfig::with_seed(0)).unwrap_err(),
            SimError::NoEligibleNodes
        );
        let only_master = Arc::new(parse_topology("(master)m /r").unwrap());
        assert_eq!(
            Cluster::build(only_master, SimConfig::with_seed(0)).unwrap_err(),
            SimError::NoEligibleNodes
        );
    }

    #[test]
    fn ingest_single_local_copy_is_free() {
        let mut c = Cluster::build(sample(), SimConfig::with_seed(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ing = c.ingest_file(64 * MIB, "Machine4.pc", 1, &mut rng).unwrap();
        assert_eq!(ing.blocks.len(), 1);
        assert_eq!(ing.cost_seconds, 0.0);
        assert!(ing.transfers.is_empty());
    }

    #[test]
    fn ingest_splits_last_block() {
        let mut c = Cluster::build(sample(), SimConfig::with_seed(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ing = c.ingest_file(200 * MIB, "Machine4.pc", 2, &mut rng).unwrap();
        let sizes: Vec<u64> = ing.blocks.iter().map(|b| b.size_bytes).collect();
        assert_eq!(sizes, [64 * MIB, 64 * MIB, 64 * MIB, 8 * MIB]);
        assert_eq!(c.file_blocks(ing.file).unwrap().len(), 4);
        assert_eq!(c.replicas().total_replicas(), 8);
    }

    #[test]
    fn ingest_three_copies_costs_two_cross_rack_transfers() {
        let mut c = Cluster::build(sample(), SimConfig::with_seed(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ing = c.ingest_file(64 * MIB, "Machine2.pc", 3, &mut rng).unwrap();
        assert_eq!(ing.transfers.len(), 2);
        let per = CostModel::default().transfer_seconds(64 * MIB, LocalityLevel::OffRack);
        assert!((ing.cost_seconds - 2.0 * per).abs() < 1e-12);
    }

    #[test]
    fn ingest_propagates_placement_errors() {
        let mut c = Cluster::build(sample(), SimConfig::with_seed(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            c.ingest_file(MIB, "Machine2.pc", 8, &mut rng),
            Err(SimError::Placement(_))
        ));
        assert!(c.replicas().is_empty());
    }
}
