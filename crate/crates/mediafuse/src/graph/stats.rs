use serde::{Deserialize, Serialize};

use super::MediaGraph;

/// Union-find with path halving and union by size.
#[derive(Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n], components: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
    }

    pub fn component_count(&self) -> usize {
        self.components
    }
}

/// The per-level statistics row: nodes, edges, connected components, and
/// average nodes per component (0 for the empty graph).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub avg_nodes_per_component: f64,
}

/// Component statistics via union-find; isolated nodes count as singleton
/// components.
pub fn graph_stats(g: &MediaGraph) -> GraphStats {
    let (order, _) = g.adjacency();
    let index: std::collections::BTreeMap<&str, usize> =
        order.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut uf = UnionFind::new(order.len());
    for ((a, b), _) in g.edges() {
        uf.union(index[a.as_str()], index[b.as_str()]);
    }
    let nodes = g.node_count();
    let components = if nodes == 0 { 0 } else { uf.component_count() };
    let avg = if components == 0 { 0.0 } else { nodes as f64 / components as f64 };
    GraphStats { nodes, edges: g.edge_count(), components, avg_nodes_per_component: avg }
}
