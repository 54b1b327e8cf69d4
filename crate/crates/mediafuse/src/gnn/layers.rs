use crate::numkit::{sigmoid, Activation, Rng, Tensor2};

use super::{GnnError, Result};

/// Neighbor lists in canonical node order: `lists[v]` holds
/// `(neighbor, edge_weight)` pairs sorted by neighbor index.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub lists: Vec<Vec<(usize, f64)>>,
}

impl Adjacency {
    pub fn node_count(&self) -> usize {
        self.lists.len()
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Tensor2 {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor2::from_vec_unchecked(rows, cols, (0..rows * cols).map(|_| rng.uniform_in(-a, a)).collect())
}

fn check_input(h: &Tensor2, expected_cols: usize, adj: &Adjacency) -> Result<()> {
    if h.cols() != expected_cols {
        return Err(GnnError::Shape(format!(
            "layer expects input dim {expected_cols}, got {}",
            h.cols()
        )));
    }
    if h.rows() != adj.node_count() {
        return Err(GnnError::Shape(format!(
            "feature matrix has {} rows but graph has {} nodes",
            h.rows(),
            adj.node_count()
        )));
    }
    Ok(())
}

/// `h'_v = act(W_self h_v + W_neigh * sum_{u in N(v)} w_uv h_u)`
#[derive(Debug, Clone)]
pub struct GraphConvLayer {
    pub w_self: Tensor2,
    pub w_neigh: Tensor2,
    pub activation: Activation,
}

#[derive(Debug)]
pub struct GraphConvCache {
    input: Tensor2,
    neigh_sum: Tensor2,
    pre: Tensor2,
    pub out: Tensor2,
}

impl GraphConvLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        Self {
            w_self: glorot(out_dim, in_dim, rng),
            w_neigh: glorot(out_dim, in_dim, rng),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_self.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w_self.rows()
    }

    pub fn forward(&self, h: &Tensor2, adj: &Adjacency) -> Result<GraphConvCache> {
        check_input(h, self.in_dim(), adj)?;
        let n = h.rows();
        let mut neigh_sum = Tensor2::zeros(n, self.in_dim());
        for v in 0..n {
            for &(u, w) in &adj.lists[v] {
                let src = h.row(u);
                let dst = neigh_sum.row_mut(v);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        let mut pre = Tensor2::zeros(n, self.out_dim());
        for v in 0..n {
            let own = self.w_self.matvec(h.row(v))?;
            let agg = self.w_neigh.matvec(neigh_sum.row(v))?;
            for (p, (a, b)) in pre.row_mut(v).iter_mut().zip(own.iter().zip(&agg)) {
                *p = a + b;
            }
        }
        let mut out = Tensor2::zeros(n, self.out_dim());
        for v in 0..n {
            let o = self.activation.apply(pre.row(v));
            out.row_mut(v).copy_from_slice(&o);
        }
        Ok(GraphConvCache { input: h.clone(), neigh_sum, pre, out })
    }

    /// Returns `(g_w_self, g_w_neigh, g_input)`.
    pub fn backward(
        &self,
        cache: &GraphConvCache,
        adj: &Adjacency,
        g_out: &Tensor2,
    ) -> Result<(Tensor2, Tensor2, Tensor2)> {
        let n = cache.input.rows();
        let mut g_w_self = Tensor2::zeros(self.out_dim(), self.in_dim());
        let mut g_w_neigh = Tensor2::zeros(self.out_dim(), self.in_dim());
        let mut g_input = Tensor2::zeros(n, self.in_dim());
        // t_v = W_neigh^T g_pre_v, then scattered over neighbors
        let mut t = Tensor2::zeros(n, self.in_dim());
        for v in 0..n {
            let g_pre = self.activation.grad_pre(cache.pre.row(v), cache.out.row(v), g_out.row(v));
            g_w_self.add_outer(1.0, &g_pre, cache.input.row(v))?;
            g_w_neigh.add_outer(1.0, &g_pre, cache.neigh_sum.row(v))?;
            let own = self.w_self.matvec_t(&g_pre)?;
            for (g, o) in g_input.row_mut(v).iter_mut().zip(own) {
                *g += o;
            }
            t.row_mut(v).copy_from_slice(&self.w_neigh.matvec_t(&g_pre)?);
        }
        for v in 0..n {
            for &(u, w) in &adj.lists[v] {
                // h_v feeds u's neighbor sum with weight w_uv
                let src = t.row(u);
                let dst = g_input.row_mut(v);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        Ok((g_w_self, g_w_neigh, g_input))
    }
}

/// `h'_v = act(W_self h_v + W_neigh * mean_{u in S(v)} h_u)` with optional
/// per-row L2 normalization on the output (the final layer).
#[derive(Debug, Clone)]
pub struct SageLayer {
    pub w_self: Tensor2,
    pub w_neigh: Tensor2,
    pub activation: Activation,
    pub normalize: bool,
}

#[derive(Debug)]
pub struct SageCache {
    input: Tensor2,
    mean: Tensor2,
    pre: Tensor2,
    act_out: Tensor2,
    norms: Vec<f64>,
    pub out: Tensor2,
}

const NORM_EPS: f64 = 1e-12;

impl SageLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        normalize: bool,
        rng: &mut Rng,
    ) -> Self {
        Self {
            w_self: glorot(out_dim, in_dim, rng),
            w_neigh: glorot(out_dim, in_dim, rng),
            activation,
            normalize,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_self.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w_self.rows()
    }

    /// `sampled[v]` is the neighborhood to aggregate this pass (the whole
    /// neighborhood at inference, a subsample during training).
    pub fn forward(&self, h: &Tensor2, sampled: &[Vec<usize>]) -> Result<SageCache> {
        if h.rows() != sampled.len() {
            return Err(GnnError::Shape(format!(
                "feature matrix has {} rows but sample lists cover {} nodes",
                h.rows(),
                sampled.len()
            )));
        }
        if h.cols() != self.in_dim() {
            return Err(GnnError::Shape(format!(
                "layer expects input dim {}, got {}",
                self.in_dim(),
                h.cols()
            )));
        }
        let n = h.rows();
        let mut mean = Tensor2::zeros(n, self.in_dim());
        for v in 0..n {
            if sampled[v].is_empty() {
                continue;
            }
            let inv = 1.0 / sampled[v].len() as f64;
            for &u in &sampled[v] {
                let src = h.row(u);
                let dst = mean.row_mut(v);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += inv * s;
                }
            }
        }
        let mut pre = Tensor2::zeros(n, self.out_dim());
        for v in 0..n {
            let own = self.w_self.matvec(h.row(v))?;
            let agg = self.w_neigh.matvec(mean.row(v))?;
            for (p, (a, b)) in pre.row_mut(v).iter_mut().zip(own.iter().zip(&agg)) {
                *p = a + b;
            }
        }
        let mut act_out = Tensor2::zeros(n, self.out_dim());
        for v in 0..n {
            act_out.row_mut(v).copy_from_slice(&self.activation.apply(pre.row(v)));
        }
        let mut out = act_out.clone();
        let mut norms = vec![0.0; n];
        if self.normalize {
            for v in 0..n {
                let r = act_out.row(v).iter().map(|x| x * x).sum::<f64>().sqrt();
                norms[v] = r;
                if r > NORM_EPS {
                    for x in out.row_mut(v) {
                        *x /= r;
                    }
                }
            }
        }
        Ok(SageCache { input: h.clone(), mean, pre, act_out, norms, out })
    }

    /// Returns `(g_w_self, g_w_neigh, g_input)`.
    pub fn backward(
        &self,
        cache: &SageCache,
        sampled: &[Vec<usize>],
        g_out: &Tensor2,
    ) -> Result<(Tensor2, Tensor2, Tensor2)> {
        let n = cache.input.rows();
        let mut g_w_self = Tensor2::zeros(self.out_dim(), self.in_dim());
        let mut g_w_neigh = Tensor2::zeros(self.out_dim(), self.in_dim());
        let mut g_input = Tensor2::zeros(n, self.in_dim());
        let mut t = Tensor2::zeros(n, self.in_dim());
        for v in 0..n {
            let g_act: Vec<f64> = if self.normalize && cache.norms[v] > NORM_EPS {
                // d(y/r)/dy with r = ||y||: (g - (g . z) z) / r
                let r = cache.norms[v];
                let z = cache.out.row(v);
                let g = g_out.row(v);
                let dot: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
                g.iter().zip(z).map(|(gi, zi)| (gi - dot * zi) / r).collect()
            } else {
                g_out.row(v).to_vec()
            };
            let g_pre = self.activation.grad_pre(cache.pre.row(v), cache.act_out.row(v), &g_act);
            g_w_self.add_outer(1.0, &g_pre, cache.input.row(v))?;
            g_w_neigh.add_outer(1.0, &g_pre, cache.mean.row(v))?;
            let own = self.w_self.matvec_t(&g_pre)?;
            for (g, o) in g_input.row_mut(v).iter_mut().zip(own) {
                *g += o;
            }
            t.row_mut(v).copy_from_slice(&self.w_neigh.matvec_t(&g_pre)?);
        }
        for v in 0..n {
            if sampled[v].is_empty() {
                continue;
            }
            let inv = 1.0 / sampled[v].len() as f64;
            for &u in &sampled[v] {
                let src = t.row(v);
                let dst = g_input.row_mut(u);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += inv * s;
                }
            }
        }
        Ok((g_w_self, g_w_neigh, g_input))
    }
}

/// Residual gated layer (square, `in == out`):
/// `h'_v = h_v + relu(W1 h_v + sum_{u in N(v)} gate_uv ⊙ (W2 h_u))` with
/// `gate_uv = sigmoid(W3 h_v + W4 h_u)`.
#[derive(Debug, Clone)]
pub struct ResGatedLayer {
    pub w1: Tensor2,
    pub w2: Tensor2,
    pub w3: Tensor2,
    pub w4: Tensor2,
}

#[derive(Debug)]
pub struct ResGatedCache {
    input: Tensor2,
    /// W2 h, W3 h, W4 h rows per node
    q2: Tensor2,
    p3: Tensor2,
    p4: Tensor2,
    a: Tensor2,
    pub out: Tensor2,
}

impl ResGatedLayer {
    pub fn new(dim: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(dim, dim, rng),
            w2: glorot(dim, dim, rng),
            w3: glorot(dim, dim, rng),
            w4: glorot(dim, dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn forward(&self, h: &Tensor2, adj: &Adjacency) -> Result<ResGatedCache> {
        if h.cols() != self.dim() {
            return Err(GnnError::Shape(format!(
                "residual layer needs input dim {} == output dim, got {}",
                self.dim(),
                h.cols()
            )));
        }
        check_input(h, self.dim(), adj)?;
        let n = h.rows();
        let d = self.dim();
        let mut q2 = Tensor2::zeros(n, d);
        let mut p3 = Tensor2::zeros(n, d);
        let mut p4 = Tensor2::zeros(n, d);
        for v in 0..n {
            q2.row_mut(v).copy_from_slice(&self.w2.matvec(h.row(v))?);
            p3.row_mut(v).copy_from_slice(&self.w3.matvec(h.row(v))?);
            p4.row_mut(v).copy_from_slice(&self.w4.matvec(h.row(v))?);
        }
        let mut a = Tensor2::zeros(n, d);
        for v in 0..n {
            let own = self.w1.matvec(h.row(v))?;
            a.row_mut(v).copy_from_slice(&own);
            for &(u, _) in &adj.lists[v] {
                for c in 0..d {
                    let gate = sigmoid(p3.at(v, c) + p4.at(u, c));
                    *a.at_mut(v, c) += gate * q2.at(u, c);
                }
            }
        }
        let mut out = Tensor2::zeros(n, d);
        for v in 0..n {
            for c in 0..d {
                *out.at_mut(v, c) = h.at(v, c) + a.at(v, c).max(0.0);
            }
        }
        Ok(ResGatedCache { input: h.clone(), q2, p3, p4, a, out })
    }

    /// Returns `(g_w1, g_w2, g_w3, g_w4, g_input)`.
    pub fn backward(
        &self,
        cache: &ResGatedCache,
        adj: &Adjacency,
        g_out: &Tensor2,
    ) -> Result<(Tensor2, Tensor2, Tensor2, Tensor2, Tensor2)> {
        let n = cache.input.rows();
        let d = self.dim();
        let mut g_w1 = Tensor2::zeros(d, d);
        let mut g_w2 = Tensor2::zeros(d, d);
        let mut g_w3 = Tensor2::zeros(d, d);
        let mut g_w4 = Tensor2::zeros(d, d);
        // residual path
        let mut g_input = g_out.clone();
        // accumulated pre-map gradients, mapped back through W2/W3/W4 at the end
        let mut g_q2 = Tensor2::zeros(n, d);
        let mut g_p3 = Tensor2::zeros(n, d);
        let mut g_p4 = Tensor2::zeros(n, d);
        for v in 0..n {
            let g_a: Vec<f64> = (0..d)
                .map(|c| if cache.a.at(v, c) > 0.0 { g_out.at(v, c) } else { 0.0 })
                .collect();
            g_w1.add_outer(1.0, &g_a, cache.input.row(v))?;
            let own = self.w1.matvec_t(&g_a)?;
            for (g, o) in g_input.row_mut(v).iter_mut().zip(own) {
                *g += o;
            }
            for &(u, _) in &adj.lists[v] {
                for c in 0..d {
                    let gate = sigmoid(cache.p3.at(v, c) + cache.p4.at(u, c));
                    let ga = g_a[c];
                    if ga == 0.0 {
                        continue;
                    }
                    *g_q2.at_mut(u, c) += ga * gate;
                    let g_gate_pre = ga * cache.q2.at(u, c) * gate * (1.0 - gate);
                    *g_p3.at_mut(v, c) += g_gate_pre;
                    *g_p4.at_mut(u, c) += g_gate_pre;
                }
            }
        }
        for v in 0..n {
            g_w2.add_outer(1.0, g_q2.row(v), cache.input.row(v))?;
            g_w3.add_outer(1.0, g_p3.row(v), cache.input.row(v))?;
            g_w4.add_outer(1.0, g_p4.row(v), cache.input.row(v))?;
            let b2 = self.w2.matvec_t(g_q2.row(v))?;
            let b3 = self.w3.matvec_t(g_p3.row(v))?;
            let b4 = self.w4.matvec_t(g_p4.row(v))?;
            for (g, ((x, y), z)) in
                g_input.row_mut(v).iter_mut().zip(b2.iter().zip(&b3).zip(&b4))
            {
                *g += x + y + z;
            }
        }
        Ok((g_w1, g_w2, g_w3, g_w4, g_input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path_adjacency(edges: &[(usize, usize, f64)], n: usize) -> Adjacency {
        let mut lists = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            lists[a].push((b, w));
            lists[b].push((a, w));
        }
        for l in &mut lists {
            l.sort_unstable_by_key(|&(i, _)| i);
        }
        Adjacency { lists }
    }

    #[test]
    fn graphconv_identity_weights_single_edge() {
        let mut layer = GraphConvLayer::new(2, 2, Activation::Identity, &mut Rng::new(1));
        layer.w_self = Tensor2::identity(2);
        layer.w_neigh = Tensor2::identity(2);
        let h = Tensor2::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let adj = path_adjacency(&[(0, 1, 1.0)], 2);
        let cache = layer.forward(&h, &adj).unwrap();
        assert_eq!(cache.out.row(0), &[1.0, 1.0]);
        assert_eq!(cache.out.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn graphconv_isolated_node_keeps_self_term_only() {
        let mut rng = Rng::new(2);
        let layer = GraphConvLayer::new(3, 2, Activation::Identity, &mut rng);
        let h = Tensor2::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let adj = path_adjacency(&[], 1);
        let cache = layer.forward(&h, &adj).unwrap();
        let want = layer.w_self.matvec(h.row(0)).unwrap();
        assert_eq!(cache.out.row(0), &want[..]);
    }

    #[test]
    fn graphconv_zero_input_zero_output() {
        let mut rng = Rng::new(3);
        let layer = GraphConvLayer::new(2, 2, Activation::Relu, &mut rng);
        let h = Tensor2::zeros(3, 2);
        let adj = path_adjacency(&[(0, 1, 1.0), (1, 2, 2.0)], 3);
        let cache = layer.forward(&h, &adj).unwrap();
        assert!(cache.out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sage_identity_weights_single_edge() {
        let mut layer = SageLayer::new(2, 2, Activation::Identity, false, &mut Rng::new(4));
        layer.w_self = Tensor2::identity(2);
        layer.w_neigh = Tensor2::identity(2);
        let h = Tensor2::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let sampled = vec![vec![1], vec![0]];
        let cache = layer.forward(&h, &sampled).unwrap();
        assert_eq!(cache.out.row(0), &[1.0, 1.0]);
    }

    #[test]
    fn sage_empty_neighborhood_mean_is_zero() {
        let mut rng = Rng::new(5);
        let layer = SageLayer::new(2, 2, Activation::Identity, false, &mut rng);
        let h = Tensor2::from_vec(1, 2, vec![3.0, -1.0]).unwrap();
        let cache = layer.forward(&h, &[vec![]]).unwrap();
        let want = layer.w_self.matvec(h.row(0)).unwrap();
        assert_eq!(cache.out.row(0), &want[..]);
    }

    #[test]
    fn sage_final_layer_rows_are_unit_norm() {
        let mut rng = Rng::new(6);
        let layer = SageLayer::new(3, 4, Activation::Identity, true, &mut rng);
        let h = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap();
        let cache = layer.forward(&h, &[vec![1], vec![0]]).unwrap();
        for v in 0..2 {
            let norm: f64 = cache.out.row(v).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resgated_zero_input_stays_zero() {
        let mut rng = Rng::new(7);
        let layer = ResGatedLayer::new(3, &mut rng);
        let h = Tensor2::zeros(2, 3);
        let adj = path_adjacency(&[(0, 1, 1.0)], 2);
        let cache = layer.forward(&h, &adj).unwrap();
        assert!(cache.out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resgated_isolated_node_with_zero_w1_is_pure_residual() {
        let mut rng = Rng::new(8);
        let mut layer = ResGatedLayer::new(3, &mut rng);
        layer.w1.fill(0.0);
        let h = Tensor2::from_vec(1, 3, vec![1.5, -2.0, 0.25]).unwrap();
        let adj = path_adjacency(&[], 1);
        let cache = layer.forward(&h, &adj).unwrap();
        assert_eq!(cache.out.row(0), h.row(0));
    }

    /// Scalar step-by-step evaluation of a 2-node res-gated layer, written
    /// independently of the matrix code.
    #[test]
    fn resgated_two_node_graph_matches_scalar_oracle() {
        let mut rng = Rng::new(9);
        let d = 3;
        let layer = ResGatedLayer::new(d, &mut rng);
        let h = Tensor2::from_vec(2, d, (0..2 * d).map(|i| 0.3 * (i as f64) - 0.5).collect())
            .unwrap();
        let adj = path_adjacency(&[(0, 1, 1.0)], 2);
        let cache = layer.forward(&h, &adj).unwrap();

        let mv = |m: &Tensor2, row: &[f64]| -> Vec<f64> {
            (0..d).map(|r| (0..d).map(|c| m.at(r, c) * row[c]).sum()).collect()
        };
        for (v, u) in [(0usize, 1usize), (1, 0)] {
            let w1h = mv(&layer.w1, h.row(v));
            let w2h = mv(&layer.w2, h.row(u));
            let w3h = mv(&layer.w3, h.row(v));
            let w4h = mv(&layer.w4, h.row(u));
            for c in 0..d {
                let gate = 1.0 / (1.0 + (-(w3h[c] + w4h[c])).exp());
                let a = w1h[c] + gate * w2h[c];
                let want = h.at(v, c) + a.max(0.0);
                assert!(
                    (cache.out.at(v, c) - want).abs() < 1e-12,
                    "node {v} coord {c}: {} vs {want}",
                    cache.out.at(v, c)
                );
            }
        }
    }

    #[test]
    fn resgated_all_zero_gates_are_half() {
        // zero input, zero maps: gate = sigmoid(0) = 0.5, sum contributes 0
        let mut rng = Rng::new(10);
        let layer = ResGatedLayer::new(2, &mut rng);
        let h = Tensor2::zeros(2, 2);
        let adj = path_adjacency(&[(0, 1, 1.0)], 2);
        let cache = layer.forward(&h, &adj).unwrap();
        for c in 0..2 {
            assert_eq!(sigmoid(cache.p3.at(0, c) + cache.p4.at(1, c)), 0.5);
        }
        assert!(cache.out.as_slice().iter().all(|&v| v == 0.0));
    }
}
