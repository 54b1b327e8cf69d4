use super::{GraphKind, MediaGraph};
use crate::numkit::Tensor2;

/// How GNN input features are derived from a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    /// Decide from the graph kind: audience-overlap graphs use the four
    /// node attributes z-scored over the graph (nodes without attributes
    /// sit at the mean, i.e. zero); hyperlink and LLM graphs lack rich
    /// attributes and use a constant 1.0 plus the node degree.
    Auto,
    /// Force the 2-dim constant + degree features.
    ConstantDegree,
    /// Supply an explicit matrix, rows in canonical (sorted domain) order.
    Custom(Tensor2),
}

/// Build the node-feature matrix, rows in canonical node order.
pub fn node_feature_matrix(g: &MediaGraph, spec: &FeatureSpec) -> Tensor2 {
    match spec {
        FeatureSpec::Custom(t) => {
            assert_eq!(t.rows(), g.node_count(), "custom feature matrix must cover every node");
            t.clone()
        }
        FeatureSpec::ConstantDegree => constant_degree(g),
        FeatureSpec::Auto => match g.kind {
            GraphKind::Alexa if g.nodes().any(|n| n.features.is_some()) => zscored_attributes(g),
            _ => constant_degree(g),
        },
    }
}

fn constant_degree(g: &MediaGraph) -> Tensor2 {
    let (order, adj) = g.adjacency();
    let mut t = Tensor2::zeros(order.len(), 2);
    for (i, neighbors) in adj.iter().enumerate() {
        t.row_mut(i)[0] = 1.0;
        t.row_mut(i)[1] = neighbors.len() as f64;
    }
    t
}

fn zscored_attributes(g: &MediaGraph) -> Tensor2 {
    let nodes: Vec<_> = g.nodes().collect();
    let present: Vec<[f64; 4]> =
        nodes.iter().filter_map(|n| n.features.map(|f| f.as_array())).collect();
    let mut mean = [0.0f64; 4];
    let mut std = [0.0f64; 4];
    let m = present.len().max(1) as f64;
    for row in &present {
        for c in 0..4 {
            mean[c] += row[c];
        }
    }
    for c in 0..4 {
        mean[c] /= m;
    }
    for row in &present {
        for c in 0..4 {
            std[c] += (row[c] - mean[c]).powi(2);
        }
    }
    for c in 0..4 {
        std[c] = (std[c] / m).sqrt();
    }
    let mut t = Tensor2::zeros(nodes.len(), 4);
    for (i, node) in nodes.iter().enumerate() {
        if let Some(f) = node.features {
            let row = f.as_array();
            for c in 0..4 {
                // zero std (or absent feature) lands at the mean -> 0
                t.row_mut(i)[c] = if std[c] > 0.0 { (row[c] - mean[c]) / std[c] } else { 0.0 };
            }
        }
    }
    t
}
