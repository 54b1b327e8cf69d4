use std::collections::BTreeSet;

use crate::graph::MediaGraph;
use crate::numkit::{dot, log_sigmoid, sigmoid, Rng, Tensor2};

use super::{GnnError, Result};

/// Edge-contrastive objective with negative sampling: for each edge
/// `(u, v)`, pull `z_u . z_v` up and push `q` uniformly sampled
/// non-neighbors of `u` away. Returns the batch-mean loss and its gradient
/// w.r.t. the embeddings.
///
/// Negatives are drawn per edge (in the order given) by rejection sampling
/// over the node set, skipping `u` and its neighbors; a node adjacent to
/// everything contributes only its positive term.
pub fn contrastive_batch(
    z: &Tensor2,
    edges: &[(usize, usize)],
    neighbor_sets: &[BTreeSet<usize>],
    rng: &mut Rng,
    q: usize,
) -> Result<(f64, Tensor2)> {
    if edges.is_empty() {
        return Err(GnnError::NoPositivePairs);
    }
    let n = z.rows();
    let mut grad = Tensor2::zeros(n, z.cols());
    let mut loss = 0.0;
    let scale = 1.0 / edges.len() as f64;
    for &(u, v) in edges {
        let zu = z.row(u).to_vec();
        let pos = dot(&zu, z.row(v));
        loss += -log_sigmoid(pos) * scale;
        let coeff = (sigmoid(pos) - 1.0) * scale;
        axpy(grad.row_mut(u), coeff, z.row(v));
        axpy(grad.row_mut(v), coeff, &zu);

        let excluded = neighbor_sets[u].len() + 1; // neighbors plus u itself
        if excluded >= n {
            continue;
        }
        for _ in 0..q {
            let neg = loop {
                let cand = rng.below(n);
                if cand != u && !neighbor_sets[u].contains(&cand) {
                    break cand;
                }
            };
            let s = dot(&zu, z.row(neg));
            loss += -log_sigmoid(-s) * scale;
            let coeff = sigmoid(s) * scale;
            axpy(grad.row_mut(u), coeff, z.row(neg));
            axpy(grad.row_mut(neg), coeff, &zu);
        }
    }
    if !loss.is_finite() {
        return Err(GnnError::Numeric("non-finite contrastive loss".into()));
    }
    Ok((loss, grad))
}

fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Canonical edge index pairs `(u, v)` with `u < v`, in sorted order, plus
/// per-node neighbor sets.
pub fn edge_index(g: &MediaGraph) -> (Vec<(usize, usize)>, Vec<BTreeSet<usize>>) {
    let (order, adj) = g.adjacency();
    let index: std::collections::BTreeMap<&str, usize> =
        order.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut edges = Vec::with_capacity(g.edge_count());
    for ((a, b), _) in g.edges() {
        let (ia, ib) = (index[a.as_str()], index[b.as_str()]);
        edges.push((ia.min(ib), ia.max(ib)));
    }
    edges.sort_unstable();
    let neighbor_sets: Vec<BTreeSet<usize>> =
        adj.iter().map(|list| list.iter().map(|&(u, _)| u).collect()).collect();
    (edges, neighbor_sets)
}

/// The whole-graph contrastive loss over every edge as one batch (the
/// spec-level entry point; training batches edges itself).
pub fn contrastive_loss(z: &Tensor2, g: &MediaGraph, rng: &mut Rng, q: usize) -> Result<f64> {
    let (edges, neighbor_sets) = edge_index(g);
    if z.rows() != g.node_count() {
        return Err(GnnError::Shape(format!(
            "{} embedding rows for {} nodes",
            z.rows(),
            g.node_count()
        )));
    }
    Ok(contrastive_batch(z, &edges, &neighbor_sets, rng, q)?.0)
}
