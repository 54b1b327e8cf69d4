//! Media-graph construction and analysis: level expansion from fixture
//! neighbor sources, node merging by normalized domain, LLM response
//! parsing, article-link filtering, component statistics, and the canonical
//! edge-list format.

mod expand;
mod features;
mod io;
mod links;
mod stats;

pub use expand::expand_levels;
pub use features::{node_feature_matrix, FeatureSpec};
pub use io::{
    load_edge_list, load_llm_responses, load_neighbor_source, load_node_records, save_edge_list,
    save_node_records,
};
pub use links::{filter_article_links, parse_llm_response};
pub use stats::{graph_stats, GraphStats, UnionFind};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::normalize_domain;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no <s>...</s> tags with a usable domain in response")]
    EmptyResponse,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Domain(#[from] crate::core::CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Which construction produced a graph. Hyperlink graphs count each
/// observed link twice (one per direction), folded into the undirected
/// edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Alexa,
    Hyperlink,
    Llm,
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Alexa => "alexa",
            GraphKind::Hyperlink => "hyperlink",
            GraphKind::Llm => "llm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alexa" => Some(GraphKind::Alexa),
            "hyperlink" => Some(GraphKind::Hyperlink),
            "llm" => Some(GraphKind::Llm),
            _ => None,
        }
    }

    /// Weight contributed by one observed neighbor occurrence.
    pub fn edge_increment(&self) -> u64 {
        match self {
            GraphKind::Hyperlink => 2,
            _ => 1,
        }
    }
}

/// Audience attributes for a node, when the source provides them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub site_rank: f64,
    pub total_linked_sites: f64,
    pub bounce_rate: f64,
    pub daily_time: f64,
}

impl NodeFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [self.site_rank, self.total_linked_sites, self.bounce_rate, self.daily_time]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// A graph node: the expansion round that introduced it (first introduction
/// wins) and optional audience features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub domain: String,
    pub level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<NodeFeatures>,
}

/// Weighted undirected graph over normalized domains. Node identity is the
/// normalized domain, so occurrences of the same site merge automatically;
/// edges are stored once under the lexicographically ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaGraph {
    pub kind: GraphKind,
    nodes: BTreeMap<String, NodeRecord>,
    edges: BTreeMap<(String, String), u64>,
}

impl MediaGraph {
    pub fn new(kind: GraphKind) -> Self {
        Self { kind, nodes: BTreeMap::new(), edges: BTreeMap::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_node(&self, domain: &str) -> bool {
        self.nodes.contains_key(domain)
    }

    pub fn node(&self, domain: &str) -> Option<&NodeRecord> {
        self.nodes.get(domain)
    }

    /// Nodes in sorted domain order (the canonical node order everywhere).
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(|s| s.as_str())
    }

    /// Edges as `((src, dst), weight)` with `src < dst`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&(String, String), u64)> {
        self.edges.iter().map(|(k, &w)| (k, w))
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> Option<u64> {
        let key = Self::pair(a, b)?;
        self.edges.get(&key).copied()
    }

    /// Insert a node if new; an existing node keeps its original level.
    /// The domain must already be normalized.
    pub fn add_node(&mut self, domain: &str, level: u32, features: Option<NodeFeatures>) {
        debug_assert_eq!(normalize_domain(domain).ok().as_deref(), Some(domain));
        let entry = self.nodes.entry(domain.to_string()).or_insert_with(|| NodeRecord {
            domain: domain.to_string(),
            level,
            features: None,
        });
        if entry.features.is_none() {
            entry.features = features;
        }
    }

    /// Add weight to the undirected edge `(a, b)`. Self-loops are ignored.
    /// Endpoints must already exist as nodes.
    pub fn add_edge_weight(&mut self, a: &str, b: &str, weight: u64) {
        debug_assert!(self.nodes.contains_key(a) && self.nodes.contains_key(b));
        if let Some(key) = Self::pair(a, b) {
            *self.edges.entry(key).or_insert(0) += weight;
        }
    }

    /// Overwrite a node's level and features (used when re-attaching a node
    /// sidecar to a graph loaded from a plain edge list).
    pub fn set_node_record(&mut self, domain: &str, level: u32, features: Option<NodeFeatures>) {
        let entry = self.nodes.entry(domain.to_string()).or_insert_with(|| NodeRecord {
            domain: domain.to_string(),
            level,
            features: None,
        });
        entry.level = level;
        entry.features = features;
    }

    fn pair(a: &str, b: &str) -> Option<(String, String)> {
        match a.cmp(b) {
            std::cmp::Ordering::Less => Some((a.to_string(), b.to_string())),
            std::cmp::Ordering::Greater => Some((b.to_string(), a.to_string())),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Degree = number of distinct neighbors.
    pub fn degree(&self, domain: &str) -> usize {
        self.edges
            .keys()
            .filter(|(a, b)| a == domain || b == domain)
            .count()
    }

    /// Adjacency in canonical node order: for each node index, the sorted
    /// `(neighbor_index, weight)` list.
    pub fn adjacency(&self) -> (Vec<String>, Vec<Vec<(usize, f64)>>) {
        let order: Vec<String> = self.nodes.keys().cloned().collect();
        let index: BTreeMap<&str, usize> =
            order.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); order.len()];
        for ((a, b), &w) in &self.edges {
            let (ia, ib) = (index[a.as_str()], index[b.as_str()]);
            adj[ia].push((ib, w as f64));
            adj[ib].push((ia, w as f64));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(i, _)| i);
        }
        (order, adj)
    }
}

/// Deterministic fixture-backed neighbor lookup: each domain maps to an
/// ordered list of at most five neighbors; unknown domains return nothing.
#[derive(Debug, Clone, Default)]
pub struct NeighborSource {
    map: BTreeMap<String, Vec<String>>,
    features: BTreeMap<String, NodeFeatures>,
}

pub const MAX_NEIGHBORS: usize = 5;

impl NeighborSource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register neighbors for a domain; entries are normalized, deduped
    /// preserving first occurrence, and truncated to five.
    pub fn insert(&mut self, domain: &str, neighbors: &[String]) -> Result<()> {
        let domain = normalize_domain(domain)?;
        let mut list: Vec<String> = Vec::new();
        for n in neighbors {
            let n = normalize_domain(n)?;
            if !list.contains(&n) {
                list.push(n);
            }
            if list.len() == MAX_NEIGHBORS {
                break;
            }
        }
        self.map.insert(domain, list);
        Ok(())
    }

    pub fn insert_features(&mut self, domain: &str, features: NodeFeatures) -> Result<()> {
        let domain = normalize_domain(domain)?;
        self.features.insert(domain, features);
        Ok(())
    }

    pub fn neighbors(&self, domain: &str) -> &[String] {
        self.map.get(domain).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn features(&self, domain: &str) -> Option<NodeFeatures> {
        self.features.get(domain).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Seeded stochastic block model over synthetic domains, for experiments
/// and acceptance fixtures. Returns the graph and the block label of each
/// node in canonical (sorted domain) order; domains are named so that
/// sorted order equals generation order.
pub fn synthetic_sbm(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (MediaGraph, Vec<usize>) {
    let mut rng = crate::numkit::Rng::new(seed);
    let mut g = MediaGraph::new(GraphKind::Llm);
    let mut names = Vec::new();
    let mut blocks = Vec::new();
    for (b, &size) in block_sizes.iter().enumerate() {
        for i in 0..size {
            let name = format!("b{b}n{i:04}.sbm");
            g.add_node(&name, 0, None);
            names.push(name);
            blocks.push(b);
        }
    }
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let p = if blocks[i] == blocks[j] { p_in } else { p_out };
            if rng.uniform() < p {
                g.add_edge_weight(&names[i], &names[j], 1);
            }
        }
    }
    (g, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbm_is_seeded_and_assortative() {
        let (a, blocks) = synthetic_sbm(&[25, 25], 0.2, 0.02, 42);
        let (b, _) = synthetic_sbm(&[25, 25], 0.2, 0.02, 42);
        assert_eq!(a, b);
        assert_eq!(blocks.iter().filter(|&&x| x == 0).count(), 25);
        let (within, between) = a.edges().fold((0u32, 0u32), |(w, x), ((s, d), _)| {
            if s.as_bytes()[1] == d.as_bytes()[1] {
                (w + 1, x)
            } else {
                (w, x + 1)
            }
        });
        assert!(within > 3 * between, "within={within} between={between}");
    }

    #[test]
    fn node_level_first_introduction_wins() {
        let mut g = MediaGraph::new(GraphKind::Alexa);
        g.add_node("a.com", 0, None);
        g.add_node("a.com", 3, None);
        assert_eq!(g.node("a.com").unwrap().level, 0);
    }

    #[test]
    fn edges_are_canonical_and_self_loops_ignored() {
        let mut g = MediaGraph::new(GraphKind::Llm);
        g.add_node("b.com", 0, None);
        g.add_node("a.com", 0, None);
        g.add_edge_weight("b.com", "a.com", 1);
        g.add_edge_weight("a.com", "b.com", 2);
        g.add_edge_weight("a.com", "a.com", 5);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edge_weight("a.com", "b.com"), Some(3));
        assert_eq!(g.edge_weight("b.com", "a.com"), Some(3));
    }

    #[test]
    fn neighbor_source_dedups_and_truncates_to_five() {
        let mut src = NeighborSource::new();
        let ns: Vec<String> = ["x.com", "https://www.x.com/", "a.com", "b.com", "c.com", "d.com", "e.com"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        src.insert("seed.com", &ns).unwrap();
        let got = src.neighbors("seed.com");
        assert_eq!(got, ["x.com", "a.com", "b.com", "c.com", "d.com"]);
        assert!(src.neighbors("unknown.com").is_empty());
    }

    #[test]
    fn degree_counts_distinct_neighbors() {
        let mut g = MediaGraph::new(GraphKind::Alexa);
        for d in ["a.com", "b.com", "c.com"] {
            g.add_node(d, 0, None);
        }
        g.add_edge_weight("a.com", "b.com", 4);
        g.add_edge_weight("a.com", "c.com", 1);
        assert_eq!(g.degree("a.com"), 2);
        assert_eq!(g.degree("b.com"), 1);
    }
}
