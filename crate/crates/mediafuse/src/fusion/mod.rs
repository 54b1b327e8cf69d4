//! The five static fusion strategies over per-view embeddings, the shared
//! view projection, and the linear hinge-loss classifier used standalone
//! ("SVM fusion") and as the bandit's frozen reward classifier.

mod attention;
mod classifier;
mod pipeline;
mod strategies;

pub use attention::{AttentionBlock, AttentionCache, AttentionGrads};
pub use classifier::{
    train_linear_classifier, LinearClassifier, LinearTrainConfig,
};
pub use pipeline::{FusionPipeline, PipelineConfig};
pub use strategies::{
    fuse_co_attention, fuse_concat, fuse_cross_attention, fuse_mlp, fuse_self_attention,
    FusionStrategy,
};

use thiserror::Error;

use crate::core::{EmbeddingTable, ViewId, VIEW_COUNT};
use crate::numkit::{Activation, DenseLayer, NumKitError, Rng};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cross-attention needs a non-empty context")]
    EmptyContext,
    #[error("training labels collapse to a single class")]
    DegenerateLabels,
    #[error(transparent)]
    Num(#[from] NumKitError),
}

pub type Result<T> = std::result::Result<T, FusionError>;

/// Default common projected dimension (matches the GNN output dim).
pub const DEFAULT_FUSED_DIM: usize = 64;

/// One outlet's views after projection to the common dimension `d`.
/// Missing views are zero vectors with their flag set.
#[derive(Debug, Clone)]
pub struct ViewBundle {
    pub d: usize,
    pub raw: [Option<Vec<f64>>; VIEW_COUNT],
    pub projected: [Vec<f64>; VIEW_COUNT],
    pub missing: [bool; VIEW_COUNT],
}

impl ViewBundle {
    /// Bundle views that are already at the common dimension; anything
    /// absent becomes a zero vector flagged missing.
    pub fn from_projected(d: usize, views: [Option<Vec<f64>>; VIEW_COUNT]) -> Result<Self> {
        let mut projected: [Vec<f64>; VIEW_COUNT] = Default::default();
        let mut missing = [false; VIEW_COUNT];
        let mut raw: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        for view in ViewId::ALL {
            let i = view.index();
            match &views[i] {
                Some(v) => {
                    if v.len() != d {
                        return Err(FusionError::Shape(format!(
                            "view {view} has dim {}, expected {d}",
                            v.len()
                        )));
                    }
                    projected[i] = v.clone();
                    raw[i] = Some(v.clone());
                }
                None => {
                    projected[i] = vec![0.0; d];
                    missing[i] = true;
                }
            }
        }
        Ok(Self { d, raw, projected, missing })
    }
}

/// Per-view learned linear maps onto the common dimension `d`. Views whose
/// declared dim already equals `d` start as the identity; others start
/// Glorot-random. Undeclared views are treated as always missing.
#[derive(Debug, Clone)]
pub struct ViewProjector {
    pub d: usize,
    pub layers: Vec<Option<DenseLayer>>, // indexed by ViewId::index()
}

impl ViewProjector {
    /// Declare the raw input dim of each view present in `dims`.
    pub fn new(d: usize, dims: &[(ViewId, usize)], rng: &mut Rng) -> Self {
        let mut layers: Vec<Option<DenseLayer>> = vec![None; VIEW_COUNT];
        for (view, in_dim) in dims {
            let layer = if *in_dim == d {
                DenseLayer::identity_init(d, Activation::Identity)
            } else {
                DenseLayer::glorot(*in_dim, d, Activation::Identity, rng)
            };
            layers[view.index()] = Some(layer);
        }
        Self { d, layers }
    }

    /// Identity projector for views already at dimension `d`.
    pub fn identity(d: usize, views: &[ViewId]) -> Self {
        let dims: Vec<(ViewId, usize)> = views.iter().map(|&v| (v, d)).collect();
        let mut rng = Rng::new(0);
        Self::new(d, &dims, &mut rng)
    }

    /// Project one outlet's raw views. A raw view with no declared
    /// projection is a config error; a declared view that is absent for
    /// this outlet becomes a zero vector flagged missing.
    pub fn project(&self, raw: &[Option<Vec<f64>>; VIEW_COUNT]) -> Result<ViewBundle> {
        let mut projected: [Vec<f64>; VIEW_COUNT] = Default::default();
        let mut missing = [false; VIEW_COUNT];
        for view in ViewId::ALL {
            let i = view.index();
            match (&raw[i], &self.layers[i]) {
                (Some(v), Some(layer)) => {
                    if v.len() != layer.in_dim() {
                        return Err(FusionError::Config(format!(
                            "view {view} declared dim {} but got {}",
                            layer.in_dim(),
                            v.len()
                        )));
                    }
                    projected[i] = layer.forward(v)?.out;
                }
                (Some(_), None) => {
                    return Err(FusionError::Config(format!(
                        "view {view} present but has no declared projection"
                    )));
                }
                (None, _) => {
                    projected[i] = vec![0.0; self.d];
                    missing[i] = true;
                }
            }
        }
        Ok(ViewBundle { d: self.d, raw: raw.clone(), projected, missing })
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flatten().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flatten().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flatten().map(|l| l.param_count()).sum()
    }
}

/// Assemble per-outlet raw view arrays from embedding tables. Every outlet
/// in `domains` gets an entry; views without a row for that outlet are
/// `None`.
pub fn collect_raw_views(
    tables: &[EmbeddingTable],
    domains: &[String],
) -> Vec<[Option<Vec<f64>>; VIEW_COUNT]> {
    domains
        .iter()
        .map(|domain| {
            let mut raw: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
            for table in tables {
                if let Some(row) = table.get(domain) {
                    raw[table.view.index()] = Some(row.to_vec());
                }
            }
            raw
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_projection_for_d_dim_view_is_passthrough() {
        let mut rng = Rng::new(1);
        let proj = ViewProjector::new(3, &[(ViewId::Alexa, 3)], &mut rng);
        let mut raw: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        raw[0] = Some(vec![1.0, -2.0, 0.5]);
        let bundle = proj.project(&raw).unwrap();
        assert_eq!(bundle.projected[0], vec![1.0, -2.0, 0.5]);
        assert!(!bundle.missing[0]);
        assert!(bundle.missing[4]);
        assert_eq!(bundle.projected[4], vec![0.0; 3]);
    }

    #[test]
    fn high_dim_view_projects_down_finite() {
        let mut rng = Rng::new(2);
        let proj = ViewProjector::new(64, &[(ViewId::Articles, 768)], &mut rng);
        let mut raw: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        raw[ViewId::Articles.index()] = Some((0..768).map(|_| rng.normal()).collect());
        let bundle = proj.project(&raw).unwrap();
        let out = &bundle.projected[ViewId::Articles.index()];
        assert_eq!(out.len(), 64);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn undeclared_view_dim_is_a_config_error() {
        let mut rng = Rng::new(3);
        let proj = ViewProjector::new(4, &[(ViewId::Alexa, 4)], &mut rng);
        let mut raw: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        raw[ViewId::Wikipedia.index()] = Some(vec![1.0; 4]);
        assert!(matches!(proj.project(&raw), Err(FusionError::Config(_))));
        // declared but wrong dim
        let mut raw2: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        raw2[0] = Some(vec![1.0; 7]);
        assert!(matches!(proj.project(&raw2), Err(FusionError::Config(_))));
    }

    #[test]
    fn collect_raw_views_aligns_tables_to_domains() {
        let mut alexa = EmbeddingTable::new(ViewId::Alexa, 2);
        alexa.insert("a.com".into(), vec![1.0, 2.0]).unwrap();
        let mut wiki = EmbeddingTable::new(ViewId::Wikipedia, 2);
        wiki.insert("b.com".into(), vec![3.0, 4.0]).unwrap();
        let raws =
            collect_raw_views(&[alexa, wiki], &["a.com".to_string(), "b.com".to_string()]);
        assert_eq!(raws[0][0], Some(vec![1.0, 2.0]));
        assert_eq!(raws[0][4], None);
        assert_eq!(raws[1][4], Some(vec![3.0, 4.0]));
    }
}
