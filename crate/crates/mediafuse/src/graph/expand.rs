use super::{GraphKind, MediaGraph, NeighborSource, Result};

/// Build a media graph by iterative level expansion.
///
/// Level 0 is the seed set. Each round `r` queries every node introduced at
/// level `r - 1`; returned neighbors join as level-`r` nodes when new, and
/// every occurrence adds the kind's weight increment to the undirected
/// `(querier, neighbor)` edge. Node identity is the normalized domain, so
/// the same site reached from different seeds merges into one node.
/// Queriers are visited in sorted domain order, which makes the result
/// deterministic.
pub fn expand_levels(
    seeds: &[String],
    source: &NeighborSource,
    max_level: u32,
    kind: GraphKind,
) -> Result<MediaGraph> {
    let mut g = MediaGraph::new(kind);
    let mut frontier: Vec<String> = Vec::new();
    for seed in seeds {
        let seed = crate::core::normalize_domain(seed)?;
        if !g.has_node(&seed) {
            frontier.push(seed.clone());
        }
        let features = source.features(&seed);
        g.add_node(&seed, 0, features);
    }
    frontier.sort_unstable();
    frontier.dedup();

    let increment = kind.edge_increment();
    for level in 1..=max_level {
        let mut next_frontier: Vec<String> = Vec::new();
        for querier in &frontier {
            for neighbor in source.neighbors(querier) {
                if neighbor == querier {
                    continue;
                }
                if !g.has_node(neighbor) {
                    g.add_node(neighbor, level, source.features(neighbor));
                    next_frontier.push(neighbor.clone());
                }
                g.add_edge_weight(querier, neighbor, increment);
            }
        }
        next_frontier.sort_unstable();
        next_frontier.dedup();
        frontier = next_frontier;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(g)
}
