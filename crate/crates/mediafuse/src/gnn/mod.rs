//! Unsupervised GNN node embeddings: GraphConv, GraphSAGE, and
//! ResGatedGCN encoders trained with an edge-contrastive objective, all
//! with manual backpropagation.

mod layers;
mod loss;
mod train;

pub use layers::{
    Adjacency, GraphConvCache, GraphConvLayer, ResGatedCache, ResGatedLayer, SageCache, SageLayer,
};
pub use loss::{contrastive_batch, contrastive_loss, edge_index};
pub use train::{
    embed_outlets, embed_with_features, load_gnn, save_gnn, train_gnn, train_gnn_with_features,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{Activation, DenseCache, DenseLayer, NumKitError, Rng, Tensor2};

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("graph has no edges to form positive pairs")]
    NoPositivePairs,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Num(#[from] NumKitError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, GnnError>;

/// Neighborhood cap per node per epoch for GraphSAGE training.
pub const SAGE_SAMPLE_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    GraphConv,
    Sage,
    ResGated,
}

impl EncoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            EncoderKind::GraphConv => "graphconv",
            EncoderKind::Sage => "sage",
            EncoderKind::ResGated => "resgated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "graphconv" => Some(EncoderKind::GraphConv),
            "sage" => Some(EncoderKind::Sage),
            "resgated" => Some(EncoderKind::ResGated),
            _ => None,
        }
    }
}

/// Training configuration. The defaults are the shared GNN hyperparameters:
/// 50 epochs, 4 layers, hidden 128, batch 128 (edges), learning rate 1e-4,
/// dropout 0.5, 64-dim output embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub encoder: EncoderKind,
    pub epochs: usize,
    pub layers: usize,
    pub hidden: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub out_dim: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl GnnConfig {
    pub fn new(encoder: EncoderKind, seed: u64) -> Self {
        Self {
            encoder,
            epochs: 50,
            layers: 4,
            hidden: 128,
            batch: 128,
            learning_rate: 1e-4,
            dropout: 0.5,
            out_dim: 64,
            negatives_per_positive: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum EncoderLayers {
    GraphConv(Vec<GraphConvLayer>),
    Sage(Vec<SageLayer>),
    ResGated { input: DenseLayer, blocks: Vec<ResGatedLayer>, output: DenseLayer },
}

/// A trained (or freshly initialized) encoder.
#[derive(Debug, Clone)]
pub struct GnnModel {
    pub cfg: GnnConfig,
    pub input_dim: usize,
    pub(crate) layers: EncoderLayers,
    /// Mean contrastive loss per epoch, filled by training.
    pub epoch_losses: Vec<f64>,
}

pub(crate) enum ForwardCaches {
    GraphConv(Vec<GraphConvCache>),
    Sage(Vec<SageCache>),
    ResGated { input: Vec<DenseCache>, blocks: Vec<ResGatedCache>, output: Vec<DenseCache> },
}

pub(crate) struct GnnForward {
    pub caches: ForwardCaches,
    /// One mask per hidden stage when training with dropout.
    pub masks: Vec<Option<Tensor2>>,
    pub out: Tensor2,
}

pub(crate) enum EncoderGrads {
    GraphConv(Vec<(Tensor2, Tensor2)>),
    Sage(Vec<(Tensor2, Tensor2)>),
    ResGated {
        input: (Tensor2, Vec<f64>),
        blocks: Vec<[Tensor2; 4]>,
        output: (Tensor2, Vec<f64>),
    },
}

impl EncoderGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        match self {
            EncoderGrads::GraphConv(gs) | EncoderGrads::Sage(gs) => {
                for (a, b) in gs {
                    out.push(a.as_slice());
                    out.push(b.as_slice());
                }
            }
            EncoderGrads::ResGated { input, blocks, output } => {
                out.push(input.0.as_slice());
                out.push(&input.1);
                for ws in blocks {
                    for w in ws {
                        out.push(w.as_slice());
                    }
                }
                out.push(output.0.as_slice());
                out.push(&output.1);
            }
        }
        out
    }
}

/// Layer widths for the non-residual encoders:
/// `input -> hidden x (layers - 1) -> out_dim`, relu between layers,
/// identity on the last.
fn taper(input_dim: usize, cfg: &GnnConfig) -> Vec<(usize, usize, Activation)> {
    let mut dims = Vec::with_capacity(cfg.layers);
    let mut prev = input_dim;
    for li in 0..cfg.layers {
        let last = li + 1 == cfg.layers;
        let out = if last { cfg.out_dim } else { cfg.hidden };
        dims.push((prev, out, if last { Activation::Identity } else { Activation::Relu }));
        prev = out;
    }
    dims
}

impl GnnModel {
    /// Seeded initialization; dims depend only on `(cfg, input_dim)`.
    pub fn init(cfg: &GnnConfig, input_dim: usize) -> Self {
        let mut rng = Rng::new(cfg.seed).derive("gnn-init");
        let layers = match cfg.encoder {
            EncoderKind::GraphConv => EncoderLayers::GraphConv(
                taper(input_dim, cfg)
                    .into_iter()
                    .map(|(i, o, act)| GraphConvLayer::new(i, o, act, &mut rng))
                    .collect(),
            ),
            EncoderKind::Sage => {
                let dims = taper(input_dim, cfg);
                let last = dims.len() - 1;
                EncoderLayers::Sage(
                    dims.into_iter()
                        .enumerate()
                        .map(|(li, (i, o, act))| SageLayer::new(i, o, act, li == last, &mut rng))
                        .collect(),
                )
            }
            EncoderKind::ResGated => {
                // residual blocks need in == out, so project in and out
                let input =
                    DenseLayer::glorot(input_dim, cfg.hidden, Activation::Identity, &mut rng);
                let blocks =
                    (0..cfg.layers).map(|_| ResGatedLayer::new(cfg.hidden, &mut rng)).collect();
                let output =
                    DenseLayer::glorot(cfg.hidden, cfg.out_dim, Activation::Identity, &mut rng);
                EncoderLayers::ResGated { input, blocks, output }
            }
        };
        Self { cfg: cfg.clone(), input_dim, layers, epoch_losses: Vec::new() }
    }

    /// Full neighborhoods for inference; SAGE training passes a subsample.
    pub(crate) fn full_neighborhoods(adj: &Adjacency) -> Vec<Vec<usize>> {
        adj.lists.iter().map(|l| l.iter().map(|&(u, _)| u).collect()).collect()
    }

    /// Per-epoch SAGE neighborhood subsample (at most [`SAGE_SAMPLE_SIZE`]
    /// neighbors per node), drawn without replacement.
    pub(crate) fn sample_neighborhoods(adj: &Adjacency, rng: &mut Rng) -> Vec<Vec<usize>> {
        adj.lists
            .iter()
            .map(|list| {
                let mut ids: Vec<usize> = list.iter().map(|&(u, _)| u).collect();
                if ids.len() > SAGE_SAMPLE_SIZE {
                    rng.shuffle(&mut ids);
                    ids.truncate(SAGE_SAMPLE_SIZE);
                    ids.sort_unstable();
                }
                ids
            })
            .collect()
    }

    /// Forward pass over the whole graph. `dropout_rng` enables training
    /// mode: inverted dropout after every hidden stage output.
    pub(crate) fn forward(
        &self,
        features: &Tensor2,
        adj: &Adjacency,
        sampled: &[Vec<usize>],
        mut dropout_rng: Option<&mut Rng>,
    ) -> Result<GnnForward> {
        if features.cols() != self.input_dim {
            return Err(GnnError::Shape(format!(
                "model expects input dim {}, features have {}",
                self.input_dim,
                features.cols()
            )));
        }
        let mut masks: Vec<Option<Tensor2>> = Vec::new();
        let mut dropout = |h: &mut Tensor2, rng: &mut Option<&mut Rng>| {
            if let Some(rng) = rng.as_deref_mut() {
                let mask = Tensor2::from_vec_unchecked(
                    h.rows(),
                    h.cols(),
                    crate::numkit::dropout_mask(rng, h.rows() * h.cols(), self.cfg.dropout),
                );
                for (v, m) in h.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v *= m;
                }
                masks.push(Some(mask));
            } else {
                masks.push(None);
            }
        };

        match &self.layers {
            EncoderLayers::GraphConv(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                let mut h = features.clone();
                for (li, layer) in layers.iter().enumerate() {
                    let cache = layer.forward(&h, adj)?;
                    h = cache.out.clone();
                    caches.push(cache);
                    if li + 1 < layers.len() {
                        dropout(&mut h, &mut dropout_rng);
                    }
                }
                Ok(GnnForward { caches: ForwardCaches::GraphConv(caches), masks, out: h })
            }
            EncoderLayers::Sage(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                let mut h = features.clone();
                for (li, layer) in layers.iter().enumerate() {
                    let cache = layer.forward(&h, sampled)?;
                    h = cache.out.clone();
                    caches.push(cache);
                    if li + 1 < layers.len() {
                        dropout(&mut h, &mut dropout_rng);
                    }
                }
                Ok(GnnForward { caches: ForwardCaches::Sage(caches), masks, out: h })
            }
            EncoderLayers::ResGated { input, blocks, output } => {
                let (in_caches, mut h) = dense_rows(input, features)?;
                dropout(&mut h, &mut dropout_rng);
                let mut block_caches = Vec::with_capacity(blocks.len());
                for block in blocks {
                    let cache = block.forward(&h, adj)?;
                    h = cache.out.clone();
                    block_caches.push(cache);
                    dropout(&mut h, &mut dropout_rng);
                }
                let (out_caches, out) = dense_rows(output, &h)?;
                Ok(GnnForward {
                    caches: ForwardCaches::ResGated {
                        input: in_caches,
                        blocks: block_caches,
                        output: out_caches,
                    },
                    masks,
                    out,
                })
            }
        }
    }

    pub(crate) fn backward(
        &self,
        fwd: &GnnForward,
        adj: &Adjacency,
        sampled: &[Vec<usize>],
        g_out: &Tensor2,
    ) -> Result<EncoderGrads> {
        let mut mask_iter = fwd.masks.iter().rev();
        let mut apply_mask = |g: &mut Tensor2| {
            if let Some(Some(mask)) = mask_iter.next() {
                for (v, m) in g.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *v *= m;
                }
            }
        };
        match (&self.layers, &fwd.caches) {
            (EncoderLayers::GraphConv(layers), ForwardCaches::GraphConv(caches)) => {
                let mut grads = vec![];
                let mut g = g_out.clone();
                for (li, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
                    if li + 1 < layers.len() {
                        apply_mask(&mut g);
                    }
                    let (gw_self, gw_neigh, g_in) = layer.backward(cache, adj, &g)?;
                    grads.push((gw_self, gw_neigh));
                    g = g_in;
                }
                grads.reverse();
                Ok(EncoderGrads::GraphConv(grads))
            }
            (EncoderLayers::Sage(layers), ForwardCaches::Sage(caches)) => {
                let mut grads = vec![];
                let mut g = g_out.clone();
                for (li, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
                    if li + 1 < layers.len() {
                        apply_mask(&mut g);
                    }
                    let (gw_self, gw_neigh, g_in) = layer.backward(cache, sampled, &g)?;
                    grads.push((gw_self, gw_neigh));
                    g = g_in;
                }
                grads.reverse();
                Ok(EncoderGrads::Sage(grads))
            }
            (
                EncoderLayers::ResGated { input, blocks, output },
                ForwardCaches::ResGated { input: in_caches, blocks: block_caches, output: out_caches },
            ) => {
                let (g_out_w, g_out_b, mut g) = dense_rows_backward(output, out_caches, g_out)?;
                let mut block_grads: Vec<[Tensor2; 4]> = Vec::with_capacity(blocks.len());
                for (block, cache) in blocks.iter().zip(block_caches).rev() {
                    apply_mask(&mut g);
                    let (g1, g2, g3, g4, g_in) = block.backward(cache, adj, &g)?;
                    block_grads.push([g1, g2, g3, g4]);
                    g = g_in;
                }
                block_grads.reverse();
                apply_mask(&mut g);
                let (g_in_w, g_in_b, _) = dense_rows_backward(input, in_caches, &g)?;
                Ok(EncoderGrads::ResGated {
                    input: (g_in_w, g_in_b),
                    blocks: block_grads,
                    output: (g_out_w, g_out_b),
                })
            }
            _ => unreachable!("cache variant matches layer variant"),
        }
    }

    /// Trainable parameters in documented order (the checkpoint layout):
    /// GraphConv/SAGE: per layer W_self then W_neigh; ResGated: input
    /// projection (weight, bias), per block W1..W4, output projection
    /// (weight, bias).
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match &mut self.layers {
            EncoderLayers::GraphConv(layers) => layers
                .iter_mut()
                .flat_map(|l| [l.w_self.as_mut_slice(), l.w_neigh.as_mut_slice()])
                .collect(),
            EncoderLayers::Sage(layers) => layers
                .iter_mut()
                .flat_map(|l| [l.w_self.as_mut_slice(), l.w_neigh.as_mut_slice()])
                .collect(),
            EncoderLayers::ResGated { input, blocks, output } => {
                let mut out = input.params_mut();
                for b in blocks {
                    out.push(b.w1.as_mut_slice());
                    out.push(b.w2.as_mut_slice());
                    out.push(b.w3.as_mut_slice());
                    out.push(b.w4.as_mut_slice());
                }
                out.extend(output.params_mut());
                out
            }
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match &self.layers {
            EncoderLayers::GraphConv(layers) => layers
                .iter()
                .flat_map(|l| [l.w_self.as_slice(), l.w_neigh.as_slice()])
                .collect(),
            EncoderLayers::Sage(layers) => layers
                .iter()
                .flat_map(|l| [l.w_self.as_slice(), l.w_neigh.as_slice()])
                .collect(),
            EncoderLayers::ResGated { input, blocks, output } => {
                let mut out = input.params();
                for b in blocks {
                    out.push(b.w1.as_slice());
                    out.push(b.w2.as_slice());
                    out.push(b.w3.as_slice());
                    out.push(b.w4.as_slice());
                }
                out.extend(output.params());
                out
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|s| s.len()).sum()
    }
}

pub(crate) fn dense_rows(layer: &DenseLayer, h: &Tensor2) -> Result<(Vec<DenseCache>, Tensor2)> {
    let mut out = Tensor2::zeros(h.rows(), layer.out_dim());
    let mut caches = Vec::with_capacity(h.rows());
    for v in 0..h.rows() {
        let cache = layer.forward(h.row(v))?;
        out.row_mut(v).copy_from_slice(&cache.out);
        caches.push(cache);
    }
    Ok((caches, out))
}

pub(crate) fn dense_rows_backward(
    layer: &DenseLayer,
    caches: &[DenseCache],
    g_out: &Tensor2,
) -> Result<(Tensor2, Vec<f64>, Tensor2)> {
    let mut g_w = Tensor2::zeros(layer.out_dim(), layer.in_dim());
    let mut g_b = vec![0.0; layer.out_dim()];
    let mut g_in = Tensor2::zeros(g_out.rows(), layer.in_dim());
    for v in 0..g_out.rows() {
        let (gw, gb, gx) = layer.backward(&caches[v], g_out.row(v))?;
        for (a, b) in g_w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *a += b;
        }
        for (a, b) in g_b.iter_mut().zip(&gb) {
            *a += b;
        }
        g_in.row_mut(v).copy_from_slice(&gx);
    }
    Ok((g_w, g_b, g_in))
}
