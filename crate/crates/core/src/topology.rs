//! Rack-aware cluster topology.
//!
//! Parses the two-column `topology.data` format (node, rack path) and
//! reproduces the stdout contract of the classic rack-mapping shell script:
//! one rack path per argument, each followed by a single space, with
//! `/default/rack` for anything that is not mapped.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rack returned for hosts that have no entry in the topology.
pub const DEFAULT_RACK: &str = "/default/rack";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {line}: malformed entry: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: invalid rack path {path:?}")]
    InvalidRackPath { line: usize, path: String },
    #[error("line {line}: duplicate node {host:?}")]
    DuplicateNode { line: usize, host: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Master,
    Slave,
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeName {
    pub host: String,
    pub role: NodeRole,
}

impl NodeName {
    /// Parses a node token such as `(slave)Machine3.pc` or `Machine3.pc`.
    pub fn parse(token: &str) -> Result<Self, String> {
        let (role, host) = match token.strip_prefix('(') {
            Some(rest) => {
                let close = rest
                    .find(')')
                    .ok_or_else(|| format!("unterminated role prefix in {token:?}"))?;
                let role = match &rest[..close] {
                    "master" => NodeRole::Master,
                    "slave" => NodeRole::Slave,
                    other => return Err(format!("unknown role {other:?}")),
                };
                (role, &rest[close + 1..])
            }
            None => (NodeRole::Unspecified, token),
        };
        if host.is_empty() {
            return Err(format!("empty host in {token:?}"));
        }
        if host.chars().any(char::is_whitespace) {
            return Err(format!("host contains whitespace: {host:?}"));
        }
        Ok(Self {
            host: host.to_string(),
            role,
        })
    }
}

impl fmt::Display for NodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            NodeRole::Master => write!(f, "(master){}", self.host),
            NodeRole::Slave => write!(f, "(slave){}", self.host),
            NodeRole::Unspecified => f.write_str(&self.host),
        }
    }
}

/// Hierarchical rack identifier such as `/dc1/rack1` or `/top-switch/rack-7`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RackPath {
    components: Vec<String>,
}

impl RackPath {
    pub fn default_rack() -> Self {
        Self {
            components: vec!["default".to_string(), "rack".to_string()],
        }
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn is_default(&self) -> bool {
        self.components.len() == 2 && self.components[0] == "default" && self.components[1] == "rack"
    }
}

impl FromStr for RackPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| "rack path must start with '/'".to_string())?;
        let components: Vec<String> = rest.split('/').map(str::to_string).collect();
        if components.iter().any(|c| c.is_empty()) {
            return Err("rack path has an empty segment".to_string());
        }
        Ok(Self { components })
    }
}

impl fmt::Display for RackPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

/// Data-locality of a reader relative to a block holder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocalityLevel {
    NodeLocal = 0,
    RackLocal = 1,
    OffRack = 2,
}

impl LocalityLevel {
    pub const ALL: [LocalityLevel; 3] = [Self::NodeLocal, Self::RackLocal, Self::OffRack];

    pub fn distance(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyEntry {
    pub node: NodeName,
    pub rack: RackPath,
}

/// Node to rack mapping, in file order. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterTopology {
    entries: IndexMap<String, TopologyEntry>,
    racks: IndexMap<RackPath, Vec<String>>,
}

impl ClusterTopology {
    pub fn from_entries<I>(entries: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = TopologyEntry>,
    {
        let mut topo = Self::default();
        for (i, entry) in entries.into_iter().enumerate() {
            topo.insert(i + 1, entry)?;
        }
        Ok(topo)
    }

    fn insert(&mut self, line: usize, entry: TopologyEntry) -> Result<(), TopologyError> {
        if self.entries.contains_key(&entry.node.host) {
            return Err(TopologyError::DuplicateNode {
                line,
                host: entry.node.host,
            });
        }
        self.racks
            .entry(entry.rack.clone())
            .or_default()
            .push(entry.node.host.clone());
        self.entries.insert(entry.node.host.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TopologyEntry> {
        self.entries.values()
    }

    pub fn hosts(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, host: &str) -> Option<&TopologyEntry> {
        self.entries.get(host)
    }

    pub fn contains(&self, host: &str) -> bool {
        self.entries.contains_key(host)
    }

    /// Racks in order of first appearance, each with its hosts in file order.
    pub fn racks(&self) -> impl Iterator<Item = (&RackPath, &[String])> {
        self.racks.iter().map(|(r, hs)| (r, hs.as_slice()))
    }

    pub fn rack_count(&self) -> usize {
        self.racks.len()
    }

    /// Rack of `host`, falling back to `/default/rack` for unmapped hosts.
    pub fn resolve_rack(&self, host: &str) -> RackPath {
        self.entries
            .get(host)
            .map(|e| e.rack.clone())
            .unwrap_or_else(RackPath::default_rack)
    }

    fn rack_ref(&self, host: &str) -> Option<&RackPath> {
        self.entries.get(host).map(|e| &e.rack)
    }

    /// Byte-exact equivalent of the mapping script's stdout.
    pub fn emit_mapping_output<S: AsRef<str>>(&self, hosts: &[S]) -> String {
        let mut out = String::new();
        for h in hosts {
            match self.rack_ref(h.as_ref()) {
                Some(rack) => out.push_str(&rack.to_string()),
                None => out.push_str(DEFAULT_RACK),
            }
            out.push(' ');
        }
        out
    }

    pub fn locality(&self, a: &str, b: &str) -> LocalityLevel {
        if a == b {
            return LocalityLevel::NodeLocal;
        }
        let same_rack = match (self.rack_ref(a), self.rack_ref(b)) {
            (Some(ra), Some(rb)) => ra == rb,
            (None, None) => true,
            (Some(r), None) | (None, Some(r)) => r.is_default(),
        };
        if same_rack {
            LocalityLevel::RackLocal
        } else {
            LocalityLevel::OffRack
        }
    }

    /// Nearest locality between `host` and any of `holders`.
    pub fn best_locality(&self, host: &str, holders: &[String]) -> Option<LocalityLevel> {
        holders.iter().map(|h| self.locality(host, h)).min()
    }

    /// Serializes back to the two-column `topology.data` format, tab separated.
    pub fn to_topology_data(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            out.push_str(&format!("{}\t{}\n", e.node, e.rack));
        }
        out
    }
}

impl FromStr for ClusterTopology {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_topology(s)
    }
}

/// Parses `topology.data`. Tabs and runs of spaces both separate fields;
/// blank lines and `#` comments are skipped.
pub fn parse_topology(text: &str) -> Result<ClusterTopology, TopologyError> {
    let mut topo = ClusterTopology::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(TopologyError::MalformedLine {
                line,
                reason: format!("expected 2 fields, found {}", tokens.len()),
            });
        }
        let node =
            NodeName::parse(tokens[0]).map_err(|reason| TopologyError::MalformedLine { line, reason })?;
        let rack: RackPath = tokens[1].parse().map_err(|_| TopologyError::InvalidRackPath {
            line,
            path: tokens[1].to_string(),
        })?;
        topo.insert(line, TopologyEntry { node, rack })?;
    }
    Ok(topo)
}
