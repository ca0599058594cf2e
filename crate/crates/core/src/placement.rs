//! Default block placement policy and the replica add/remove actions used
//! when a file's replication factor changes.
//!
//! The writer keeps the first copy. Copies two and three go to a single rack
//! other than the writer's, and anything beyond that is spread uniformly over
//! the remaining eligible nodes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{ClusterTopology, NodeRole, RackPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "blk_{}", self.0)
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub block_id: BlockId,
    pub file_id: FileId,
    pub size_bytes: u64,
    pub index_in_file: u32,
}

/// A single block copy between two distinct nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub block: BlockId,
    pub size_bytes: u64,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("replication factor {requested} exceeds {available} eligible nodes")]
    ReplicationFactorTooLarge { requested: usize, available: usize },
    #[error("replication factor must be at least 1")]
    ZeroReplicationFactor,
    #[error("writer {0:?} is not an eligible node of the cluster")]
    WriterNotInCluster(String),
    #[error("cannot remove {requested} of {current} replicas: at least one must remain")]
    CannotRemoveLastReplica { current: usize, requested: usize },
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
}

/// One violated clause of the placement policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    CountMismatch { expected: usize, actual: usize },
    DuplicateHost(String),
    UnknownHost(String),
    IneligibleHost(String),
    /// Second copy shares the writer's rack although a remote rack exists.
    SecondReplicaNotRemote,
    /// Third copy shares the writer's rack although a remote copy was possible.
    ThirdReplicaNotRemote,
    /// Copies two and three sit on different racks although some remote
    /// rack could have held both.
    RemoteRackSplit,
}

/// Block id to ordered replica hosts. Index 0 is the writer's copy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaMap {
    placements: BTreeMap<BlockId, Vec<String>>,
}

impl ReplicaMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, block: BlockId) -> Option<&[String]> {
        self.placements.get(&block).map(Vec::as_slice)
    }

    pub fn insert(&mut self, block: BlockId, hosts: Vec<String>) {
        self.placements.insert(block, hosts);
    }

    pub fn replication(&self, block: BlockId) -> usize {
        self.placements.get(&block).map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &[String])> {
        self.placements.iter().map(|(b, hs)| (*b, hs.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    /// Total number of block copies held across the cluster.
    pub fn total_replicas(&self) -> usize {
        self.placements.values().map(Vec::len).sum()
    }
}

/// The placement policy bound to one topology and its eligible nodes.
#[derive(Debug, Clone)]
pub struct PlacementPolicy {
    topo: Arc<ClusterTopology>,
    exclude_master: bool,
    eligible: Vec<String>,
    racks: IndexMap<RackPath, Vec<String>>,
}

impl PlacementPolicy {
    /// Builds the policy. With `exclude_master` set, `(master)` nodes never
    /// hold blocks.
    pub fn new(topo: Arc<ClusterTopology>, exclude_master: bool) -> Self {
        let mut eligible = Vec::new();
        let mut racks: IndexMap<RackPath, Vec<String>> = IndexMap::new();
        for e in topo.entries() {
            if exclude_master && e.node.role == NodeRole::Master {
                continue;
            }
            eligible.push(e.node.host.clone());
            racks.entry(e.rack.clone()).or_default().push(e.node.host.clone());
        }
        Self {
            topo,
            exclude_master,
            eligible,
            racks,
        }
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topo
    }

    pub fn topology_arc(&self) -> &Arc<ClusterTopology> {
        &self.topo
    }

    pub fn excludes_master(&self) -> bool {
        self.exclude_master
    }

    /// Eligible hosts in topology order.
    pub fn eligible(&self) -> &[String] {
        &self.eligible
    }

    pub fn is_eligible(&self, host: &str) -> bool {
        self.eligible.iter().any(|h| h == host)
    }

    fn rack_of(&self, host: &str) -> Option<&RackPath> {
        self.topo.get(host).map(|e| &e.rack)
    }

    fn remote_racks(&self, writer_rack: &RackPath) -> Vec<(&RackPath, &[String])> {
        self.racks
            .iter()
            .filter(|(r, _)| *r != writer_rack)
            .map(|(r, hs)| (r, hs.as_slice()))
            .collect()
    }

    /// Chooses `rf` distinct hosts for a new block written by `writer`.
    pub fn place_block<R: Rng + ?Sized>(
        &self,
        writer: &str,
        rf: usize,
        rng: &mut R,
    ) -> Result<Vec<String>, PlacementError> {
        if !self.is_eligible(writer) {
            return Err(PlacementError::WriterNotInCluster(writer.to_string()));
        }
        if rf == 0 {
            return Err(PlacementError::ZeroReplicationFactor);
        }
        if rf > self.eligible.len() {
            return Err(PlacementError::ReplicationFactorTooLarge {
                requested: rf,
                available: self.eligible.len(),
            });
        }

        let mut hosts = vec![writer.to_string()];
        if rf >= 2 {
            let writer_rack = self.rack_of(writer).expect("eligible host is in topology");
            let remote = self.remote_racks(writer_rack);
            if !remote.is_empty() {
                if rf == 2 {
                    let (_, nodes) = remote.choose(rng).expect("non-empty");
                    hosts.push(nodes.choose(rng).expect("rack has nodes").clone());
                } else {
                    let roomy: Vec<&[String]> =
                        remote.iter().map(|(_, hs)| *hs).filter(|hs| hs.len() >= 2).collect();
                    if let Some(nodes) = roomy.choose(rng) {
                        hosts.extend(nodes.choose_multiple(rng, 2).cloned());
                    } else {
                        // Every remote rack holds a single node: split the
                        // remote copies over two racks when possible.
                        let first = rng.gen_range(0..remote.len());
                        hosts.push(remote[first].1[0].clone());
                        if remote.len() >= 2 {
                            let mut second = rng.gen_range(0..remote.len() - 1);
                            if second >= first {
                                second += 1;
                            }
                            hosts.push(remote[second].1[0].clone());
                        }
                    }
                }
            }
        }

        if hosts.len() < rf {
            let chosen: HashSet<&str> = hosts.iter().map(String::as_str).collect();
            let rest: Vec<&String> = self
                .eligible
                .iter()
                .filter(|h| !chosen.contains(h.as_str()))
                .collect();
            let picks = index::sample(rng, rest.len(), rf - hosts.len());
            let extra: Vec<String> = picks.iter().map(|i| rest[i].clone()).collect();
            hosts.extend(extra);
        }
        Ok(hosts)
    }

    /// Lists every policy clause `hosts` violates; empty when conformant.
    pub fn validate_placement(&self, hosts: &[String], rf_expected: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        if hosts.len() != rf_expected {
            out.push(Violation::CountMismatch {
                expected: rf_expected,
                actual: hosts.len(),
            });
        }
        let mut seen = HashSet::new();
        for h in hosts {
            if !seen.insert(h.as_str()) {
                out.push(Violation::DuplicateHost(h.clone()));
            }
            if !self.topo.contains(h) {
                out.push(Violation::UnknownHost(h.clone()));
            } else if !self.is_eligible(h) {
                out.push(Violation::IneligibleHost(h.clone()));
            }
        }
        let Some(writer_rack) = hosts.first().and_then(|w| self.rack_of(w)) else {
            return out;
        };
        let remote = self.remote_racks(writer_rack);
        let remote_nodes: usize = remote.iter().map(|(_, hs)| hs.len()).sum();
        let rack = |i: usize| hosts.get(i).and_then(|h| self.rack_of(h));

        if let Some(r1) = rack(1) {
            if remote_nodes >= 1 && r1 == writer_rack {
                out.push(Violation::SecondReplicaNotRemote);
            }
        }
        if let Some(r2) = rack(2) {
            if remote_nodes >= 2 && r2 == writer_rack {
                out.push(Violation::ThirdReplicaNotRemote);
            }
            let roomy = remote.iter().any(|(_, hs)| hs.len() >= 2);
            if roomy && rack(1).is_some_and(|r1| r1 != r2) {
                out.push(Violation::RemoteRackSplit);
            }
        }
        out
    }

    /// Adds `k` replicas of `block` on uniformly drawn nodes that do not yet
    /// hold it. Each new copy is sourced from the nearest pre-existing replica.
    pub fn add_replicas<R: Rng + ?Sized>(
        &self,
        map: &mut ReplicaMap,
        block: BlockId,
        size_bytes: u64,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<Transfer>, PlacementError> {
        let current = map
            .placements
            .get(&block)
            .ok_or(PlacementError::UnknownBlock(block))?;
        if current.len() + k > self.eligible.len() {
            return Err(PlacementError::ReplicationFactorTooLarge {
                requested: current.len() + k,
                available: self.eligible.len(),
            });
        }
        let held: HashSet<&str> = current.iter().map(String::as_str).collect();
        let free: Vec<&String> = self
            .eligible
            .iter()
            .filter(|h| !held.contains(h.as_str()))
            .collect();
        let picks = index::sample(rng, free.len(), k);
        let mut transfers = Vec::with_capacity(k);
        for i in picks.iter() {
            let dst = free[i];
            let src = current
                .iter()
                .min_by_key(|src| self.topo.locality(src, dst))
                .expect("block has at least one replica");
            transfers.push(Transfer {
                block,
                size_bytes,
                src: src.clone(),
                dst: dst.clone(),
            });
        }
        let hosts = map.placements.get_mut(&block).expect("checked above");
        hosts.extend(transfers.iter().map(|t| t.dst.clone()));
        Ok(transfers)
    }

    /// Drops `k` replicas of `block`, keeping as many distinct racks as
    /// possible among the survivors. The writer copy is kept. Returns the
    /// updated host list.
    pub fn remove_replicas(
        &self,
        map: &mut ReplicaMap,
        block: BlockId,
        k: usize,
    ) -> Result<Vec<String>, PlacementError> {
        let hosts = map
            .placements
            .get_mut(&block)
            .ok_or(PlacementError::UnknownBlock(block))?;
        if k >= hosts.len() {
            return Err(PlacementError::CannotRemoveLastReplica {
                current: hosts.len(),
                requested: k,
            });
        }
        for _ in 0..k {
            let victim = {
                let rack_count = |r: &RackPath| {
                    hosts
                        .iter()
                        .filter(|h| self.topo.resolve_rack(h) == *r)
                        .count()
                };
                // (loses a rack, host name) -- smallest wins.
                hosts
                    .iter()
                    .enumerate()
                    .skip(1)
                    .min_by(|(_, a), (_, b)| {
                        let ka = rack_count(&self.topo.resolve_rack(a)) < 2;
                        let kb = rack_count(&self.topo.resolve_rack(b)) < 2;
                        ka.cmp(&kb).then_with(|| a.cmp(b))
                    })
                    .map(|(i, _)| i)
                    .expect("k < len leaves a non-writer candidate")
            };
            hosts.remove(victim);
        }
        Ok(hosts.clone())
    }
}
