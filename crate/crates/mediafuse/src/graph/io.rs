use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    parse_llm_response, GraphError, GraphKind, MediaGraph, NeighborSource, NodeFeatures,
    NodeRecord, Result,
};
use crate::core::normalize_domain;

/// Write a graph as canonical TSV: one `src<TAB>dst<TAB>weight` line per
/// edge, `src < dst`, sorted lexicographically by pair. Isolated nodes are
/// listed afterwards as `domain<TAB><TAB>0` so the node set round-trips.
/// An optional `# key=value` comment line (e.g. the config hash) may be
/// prepended; loaders skip it.
pub fn save_edge_list(path: &Path, g: &MediaGraph, comment: Option<&str>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(f, "# {c}")?;
    }
    for ((a, b), w) in g.edges() {
        writeln!(f, "{a}\t{b}\t{w}")?;
    }
    for node in g.nodes() {
        if g.degree(&node.domain) == 0 {
            writeln!(f, "{}\t\t0", node.domain)?;
        }
    }
    Ok(())
}

/// Load a canonical edge list. Header lines (`#` comments or a literal
/// `src<TAB>dst<TAB>weight`) are skipped; duplicate pairs sum their
/// weights; `b<TAB>a` is stored as `(a, b)`. Loaded nodes carry level 0.
pub fn load_edge_list(path: &Path, kind: GraphKind) -> Result<MediaGraph> {
    let text = fs::read_to_string(path)?;
    let mut g = MediaGraph::new(kind);
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') || line == "src\tdst\tweight" {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphError::Parse {
                line: line_no,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let src = normalize_domain(fields[0])
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        let weight: u64 = fields[2]
            .parse()
            .map_err(|e| GraphError::Parse { line: line_no, msg: format!("bad weight: {e}") })?;
        if fields[1].is_empty() {
            // isolated node row
            g.add_node(&src, 0, None);
            continue;
        }
        let dst = normalize_domain(fields[1])
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        if weight == 0 {
            return Err(GraphError::Parse { line: line_no, msg: "edge weight must be >= 1".into() });
        }
        g.add_node(&src, 0, None);
        g.add_node(&dst, 0, None);
        g.add_edge_weight(&src, &dst, weight);
    }
    Ok(g)
}

#[derive(Debug, Deserialize)]
struct NeighborRow {
    domain: String,
    neighbors: Vec<String>,
    #[serde(default)]
    features: Option<NodeFeatures>,
}

/// Load a neighbor-source fixture: JSONL rows
/// `{"domain": str, "neighbors": [str, ...]}` with an optional `features`
/// object per row. Metadata lines without a `domain` field are skipped.
pub fn load_neighbor_source(path: &Path) -> Result<NeighborSource> {
    let text = fs::read_to_string(path)?;
    let mut src = NeighborSource::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        if value.get("domain").is_none() {
            continue;
        }
        let row: NeighborRow = serde_json::from_value(value)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        src.insert(&row.domain, &row.neighbors)?;
        if let Some(f) = row.features {
            if !f.is_finite() {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: "non-finite node feature".into(),
                });
            }
            src.insert_features(&row.domain, f)?;
        }
    }
    Ok(src)
}

#[derive(Debug, Deserialize)]
struct ResponseRow {
    domain: String,
    response: String,
}

/// Load raw LLM replies (`{"domain": str, "response": str}` JSONL) into a
/// neighbor source by parsing each reply's `<s>` tags. Replies with no
/// usable tag yield an empty neighbor list rather than an error, so one bad
/// generation does not sink a whole fixture.
pub fn load_llm_responses(path: &Path) -> Result<NeighborSource> {
    let text = fs::read_to_string(path)?;
    let mut src = NeighborSource::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        if value.get("domain").is_none() {
            continue;
        }
        let row: ResponseRow = serde_json::from_value(value)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        let neighbors = match parse_llm_response(&row.response) {
            Ok(ns) => ns,
            Err(GraphError::EmptyResponse) => {
                log::warn!("line {line_no}: no usable <s> tags for {}", row.domain);
                Vec::new()
            }
            Err(e) => return Err(e),
        };
        src.insert(&row.domain, &neighbors)?;
    }
    Ok(src)
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow<'a> {
    domain: &'a str,
    level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<NodeFeatures>,
}

/// Sidecar with per-node levels and features, which the edge-list TSV does
/// not carry.
pub fn save_node_records(path: &Path, g: &MediaGraph) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for node in g.nodes() {
        let row =
            NodeRow { domain: &node.domain, level: node.level, features: node.features };
        writeln!(f, "{}", serde_json::to_string(&row).expect("node row serializes"))?;
    }
    Ok(())
}

/// Re-attach levels and features from a node sidecar onto a loaded graph.
pub fn load_node_records(path: &Path, g: &mut MediaGraph) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let mut records: Vec<NodeRecord> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        if value.get("domain").is_none() {
            continue;
        }
        let rec: NodeRecord = serde_json::from_value(value)
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        records.push(rec);
    }
    for rec in records {
        let domain = normalize_domain(&rec.domain)?;
        g.set_node_record(&domain, rec.level, rec.features);
    }
    Ok(())
}
