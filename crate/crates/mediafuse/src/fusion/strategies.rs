use serde::{Deserialize, Serialize};

use crate::numkit::{DenseCache, DenseLayer};

use super::{AttentionBlock, AttentionCache, Result, ViewBundle};

/// The fusion strategies the pipeline can train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionStrategy {
    /// Concatenate projected views, linear hinge classifier on top.
    #[serde(rename = "concat-linear")]
    ConcatLinear,
    /// One dense relu layer over the concatenation.
    #[serde(rename = "mlp")]
    Mlp,
    /// Views as five tokens under self-attention, mean-pooled.
    #[serde(rename = "self-attn")]
    SelfAttention,
    /// Articles view attends over the three graph views.
    #[serde(rename = "cross-attn")]
    CrossAttention,
    /// Articles and the pooled graph token attend to each other.
    #[serde(rename = "co-attn")]
    CoAttention,
    /// PPO-learned per-outlet view weights (trained in the bandit module).
    #[serde(rename = "rl-ppo")]
    RlPpo,
}

impl FusionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            FusionStrategy::ConcatLinear => "concat-linear",
            FusionStrategy::Mlp => "mlp",
            FusionStrategy::SelfAttention => "self-attn",
            FusionStrategy::CrossAttention => "cross-attn",
            FusionStrategy::CoAttention => "co-attn",
            FusionStrategy::RlPpo => "rl-ppo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concat-linear" => Some(FusionStrategy::ConcatLinear),
            "mlp" => Some(FusionStrategy::Mlp),
            "self-attn" => Some(FusionStrategy::SelfAttention),
            "cross-attn" => Some(FusionStrategy::CrossAttention),
            "co-attn" => Some(FusionStrategy::CoAttention),
            "rl-ppo" => Some(FusionStrategy::RlPpo),
            _ => None,
        }
    }
}

/// Concatenation of the projected views in `ViewId` order (dim `5d`).
pub fn fuse_concat(bundle: &ViewBundle) -> Vec<f64> {
    let mut out = Vec::with_capacity(5 * bundle.d);
    for v in &bundle.projected {
        out.extend_from_slice(v);
    }
    out
}

/// One dense layer (relu in the pipeline) over the concatenation.
pub fn fuse_mlp(bundle: &ViewBundle, layer: &DenseLayer) -> Result<(Vec<f64>, DenseCache)> {
    let concat = fuse_concat(bundle);
    let cache = layer.forward(&concat)?;
    Ok((cache.out.clone(), cache))
}

/// Self-attention over the five projected view tokens, mean-pooled (dim `d`).
pub fn fuse_self_attention(
    bundle: &ViewBundle,
    block: &AttentionBlock,
) -> Result<(Vec<f64>, AttentionCache)> {
    block.self_attention(&bundle.projected)
}

/// Single-query attention: `query_view` attends over `context_views`
/// (dim `d`).
pub fn fuse_cross_attention(
    query_view: &[f64],
    context_views: &[Vec<f64>],
    block: &AttentionBlock,
) -> Result<(Vec<f64>, AttentionCache)> {
    block.cross_attention(query_view, context_views)
}

/// Co-attention: `concat(cross(a over b), cross(b over a))` (dim `2d`).
pub fn fuse_co_attention(
    a: &[f64],
    b: &[f64],
    block_ab: &AttentionBlock,
    block_ba: &AttentionBlock,
) -> Result<(Vec<f64>, (AttentionCache, AttentionCache))> {
    let (out_ab, cache_ab) = block_ab.cross_attention(a, &[b.to_vec()])?;
    let (out_ba, cache_ba) = block_ba.cross_attention(b, &[a.to_vec()])?;
    let mut out = out_ab;
    out.extend(out_ba);
    Ok((out, (cache_ab, cache_ba)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{ViewId, VIEW_COUNT};
    use crate::fusion::ViewBundle;
    use crate::numkit::{Activation, Rng, Tensor2};

    fn bundle_d2() -> ViewBundle {
        let mut views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        views[0] = Some(vec![1.0, 0.0]);
        views[1] = Some(vec![0.0, 1.0]);
        ViewBundle::from_projected(2, views).unwrap()
    }

    #[test]
    fn concat_follows_view_id_order() {
        let got = fuse_concat(&bundle_d2());
        assert_eq!(got, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn concat_of_all_missing_is_zero() {
        let views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        let bundle = ViewBundle::from_projected(2, views).unwrap();
        assert_eq!(fuse_concat(&bundle), vec![0.0; 10]);
    }

    #[test]
    fn concat_is_insertion_order_independent() {
        // same content built up in a different order gives the same vector
        let mut views_a: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        views_a[ViewId::Wikipedia.index()] = Some(vec![5.0, 6.0]);
        views_a[ViewId::Alexa.index()] = Some(vec![1.0, 2.0]);
        let mut views_b: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        views_b[ViewId::Alexa.index()] = Some(vec![1.0, 2.0]);
        views_b[ViewId::Wikipedia.index()] = Some(vec![5.0, 6.0]);
        let a = fuse_concat(&ViewBundle::from_projected(2, views_a).unwrap());
        let b = fuse_concat(&ViewBundle::from_projected(2, views_b).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mlp_identity_slices_reproduce_concat() {
        let bundle = bundle_d2();
        // weight = [I_2 | 0 ...]: output = first view (all inputs >= 0 here)
        let mut w = Tensor2::zeros(2, 10);
        *w.at_mut(0, 0) = 1.0;
        *w.at_mut(1, 1) = 1.0;
        let layer = DenseLayer { weight: w, bias: vec![0.0; 2], activation: Activation::Relu };
        let (out, _) = fuse_mlp(&bundle, &layer).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
    }

    #[test]
    fn mlp_zero_weights_give_relu_bias() {
        let bundle = bundle_d2();
        let layer = DenseLayer {
            weight: Tensor2::zeros(2, 10),
            bias: vec![0.5, -0.5],
            activation: Activation::Relu,
        };
        let (out, _) = fuse_mlp(&bundle, &layer).unwrap();
        assert_eq!(out, vec![0.5, 0.0]);
    }

    #[test]
    fn co_attention_of_identical_inputs_with_tied_blocks_has_equal_halves() {
        let mut rng = Rng::new(21);
        let block = AttentionBlock::glorot(3, &mut rng);
        let a: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let (out, _) = fuse_co_attention(&a, &a, &block, &block).unwrap();
        assert_eq!(out.len(), 6);
        for i in 0..3 {
            assert!((out[i] - out[i + 3]).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_attention_identical_context_tokens_match_single() {
        let mut rng = Rng::new(22);
        let block = AttentionBlock::glorot(3, &mut rng);
        let q: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let t: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let (single, _) = fuse_cross_attention(&q, &[t.clone()], &block).unwrap();
        let (triple, _) =
            fuse_cross_attention(&q, &[t.clone(), t.clone(), t], &block).unwrap();
        for (s, m) in single.iter().zip(&triple) {
            assert!((s - m).abs() < 1e-12);
        }
    }

    #[test]
    fn all_strategies_finite_with_missing_views() {
        let mut rng = Rng::new(23);
        let d = 4;
        let mut views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        views[0] = Some((0..d).map(|_| rng.normal()).collect());
        let bundle = ViewBundle::from_projected(d, views).unwrap();
        let block = AttentionBlock::glorot(d, &mut rng);
        let layer = DenseLayer::glorot(5 * d, d, Activation::Relu, &mut rng);

        assert!(fuse_concat(&bundle).iter().all(|v| v.is_finite()));
        assert!(fuse_mlp(&bundle, &layer).unwrap().0.iter().all(|v| v.is_finite()));
        assert!(fuse_self_attention(&bundle, &block)
            .unwrap()
            .0
            .iter()
            .all(|v| v.is_finite()));
        let (cross, _) = fuse_cross_attention(
            &bundle.projected[3],
            &bundle.projected[..3].to_vec(),
            &block,
        )
        .unwrap();
        assert!(cross.iter().all(|v| v.is_finite()));
        let (co, _) =
            fuse_co_attention(&bundle.projected[3], &bundle.projected[0], &block, &block)
                .unwrap();
        assert!(co.iter().all(|v| v.is_finite()));
    }
}
