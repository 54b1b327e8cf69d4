use crate::core::{LabelScale, ViewId, VIEW_COUNT};
use crate::numkit::{Activation, DenseCache, DenseLayer, Optimizer, Rng, Tensor2};

use super::{
    fuse_co_attention, fuse_concat, fuse_cross_attention, fuse_mlp, fuse_self_attention,
    train_linear_classifier, AttentionBlock, AttentionCache, FusionError, FusionStrategy,
    LinearClassifier, LinearTrainConfig, Result, ViewBundle, ViewProjector,
};

const GRAPH_VIEWS: [ViewId; 3] = [ViewId::Alexa, ViewId::Hyperlink, ViewId::Llm];

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub d: usize,
    pub strategy: FusionStrategy,
    /// Epochs of joint full-batch Adam for the strategies with trainable
    /// fusion parameters (mlp and the attention variants).
    pub joint_epochs: usize,
    pub joint_lr: f64,
    /// Solver knobs for the linear head when it is trained alone
    /// (concat-linear).
    pub head: LinearTrainConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            d: super::DEFAULT_FUSED_DIM,
            strategy: FusionStrategy::ConcatLinear,
            joint_epochs: 100,
            joint_lr: 1e-3,
            head: LinearTrainConfig::default(),
            seed: 0,
        }
    }
}

/// A trained fusion model: per-view projections, the strategy's own
/// parameters, and the linear classifier head.
#[derive(Debug, Clone)]
pub struct FusionPipeline {
    pub strategy: FusionStrategy,
    pub projector: ViewProjector,
    pub mlp: Option<DenseLayer>,
    pub attn: Option<AttentionBlock>,
    pub attn_back: Option<AttentionBlock>,
    pub head: LinearClassifier,
}

enum StrategyCache {
    Concat,
    Mlp(DenseCache),
    SelfAttn(AttentionCache),
    CrossAttn(AttentionCache),
    CoAttn(AttentionCache, AttentionCache),
}

struct Forward {
    projection_caches: Vec<Option<DenseCache>>,
    features: Vec<f64>,
    cache: StrategyCache,
}

fn feature_dim(strategy: FusionStrategy, d: usize) -> usize {
    match strategy {
        FusionStrategy::ConcatLinear => 5 * d,
        FusionStrategy::Mlp
        | FusionStrategy::SelfAttention
        | FusionStrategy::CrossAttention => d,
        FusionStrategy::CoAttention => 2 * d,
        FusionStrategy::RlPpo => d,
    }
}

impl FusionPipeline {
    /// Fresh pipeline with seeded initialization. `view_dims` declares the
    /// raw dimension of every view the model will see.
    pub fn new(
        view_dims: &[(ViewId, usize)],
        scale: LabelScale,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        if cfg.strategy == FusionStrategy::RlPpo {
            return Err(FusionError::Config(
                "rl-ppo fusion is trained by the bandit module, not the static pipeline".into(),
            ));
        }
        let mut rng = Rng::new(cfg.seed).derive("fusion-init");
        let projector = ViewProjector::new(cfg.d, view_dims, &mut rng);
        let mut mlp = None;
        let mut attn = None;
        let mut attn_back = None;
        match cfg.strategy {
            FusionStrategy::Mlp => {
                mlp = Some(DenseLayer::glorot(5 * cfg.d, cfg.d, Activation::Relu, &mut rng));
            }
            FusionStrategy::SelfAttention | FusionStrategy::CrossAttention => {
                attn = Some(AttentionBlock::glorot(cfg.d, &mut rng));
            }
            FusionStrategy::CoAttention => {
                attn = Some(AttentionBlock::glorot(cfg.d, &mut rng));
                attn_back = Some(AttentionBlock::glorot(cfg.d, &mut rng));
            }
            FusionStrategy::ConcatLinear | FusionStrategy::RlPpo => {}
        }
        let head =
            LinearClassifier::zeros(feature_dim(cfg.strategy, cfg.d), scale);
        Ok(Self { strategy: cfg.strategy, projector, mlp, attn, attn_back, head })
    }

    fn forward(&self, raw: &[Option<Vec<f64>>; VIEW_COUNT]) -> Result<Forward> {
        let mut projection_caches: Vec<Option<DenseCache>> = vec![None; VIEW_COUNT];
        let mut bundle = ViewBundle {
            d: self.projector.d,
            raw: raw.clone(),
            projected: Default::default(),
            missing: [false; VIEW_COUNT],
        };
        for view in ViewId::ALL {
            let i = view.index();
            match (&raw[i], &self.projector.layers[i]) {
                (Some(v), Some(layer)) => {
                    if v.len() != layer.in_dim() {
                        return Err(FusionError::Config(format!(
                            "view {view} declared dim {} but got {}",
                            layer.in_dim(),
                            v.len()
                        )));
                    }
                    let cache = layer.forward(v)?;
                    bundle.projected[i] = cache.out.clone();
                    projection_caches[i] = Some(cache);
                }
                (Some(_), None) => {
                    return Err(FusionError::Config(format!(
                        "view {view} present but has no declared projection"
                    )));
                }
                (None, _) => {
                    bundle.projected[i] = vec![0.0; self.projector.d];
                    bundle.missing[i] = true;
                }
            }
        }

        let (features, cache) = match self.strategy {
            FusionStrategy::ConcatLinear => (fuse_concat(&bundle), StrategyCache::Concat),
            FusionStrategy::Mlp => {
                let layer = self.mlp.as_ref().expect("mlp layer");
                let (f, c) = fuse_mlp(&bundle, layer)?;
                (f, StrategyCache::Mlp(c))
            }
            FusionStrategy::SelfAttention => {
                let block = self.attn.as_ref().expect("attention block");
                let (f, c) = fuse_self_attention(&bundle, block)?;
                (f, StrategyCache::SelfAttn(c))
            }
            FusionStrategy::CrossAttention => {
                let block = self.attn.as_ref().expect("attention block");
                let query = bundle.projected[ViewId::Articles.index()].clone();
                let context: Vec<Vec<f64>> =
                    GRAPH_VIEWS.iter().map(|v| bundle.projected[v.index()].clone()).collect();
                let (f, c) = fuse_cross_attention(&query, &context, block)?;
                (f, StrategyCache::CrossAttn(c))
            }
            FusionStrategy::CoAttention => {
                let ab = self.attn.as_ref().expect("attention block");
                let ba = self.attn_back.as_ref().expect("attention block");
                let a = bundle.projected[ViewId::Articles.index()].clone();
                let b = pooled_graph_token(&bundle);
                let (f, (ca, cb)) = fuse_co_attention(&a, &b, ab, ba)?;
                (f, StrategyCache::CoAttn(ca, cb))
            }
            FusionStrategy::RlPpo => unreachable!("rejected at construction"),
        };
        Ok(Forward { projection_caches, features, cache })
    }

    /// Fused feature vector for one outlet.
    pub fn features(&self, raw: &[Option<Vec<f64>>; VIEW_COUNT]) -> Result<Vec<f64>> {
        Ok(self.forward(raw)?.features)
    }

    pub fn predict(&self, raw: &[Option<Vec<f64>>; VIEW_COUNT]) -> Result<usize> {
        self.head.predict(&self.features(raw)?)
    }

    pub fn predict_proba(&self, raw: &[Option<Vec<f64>>; VIEW_COUNT]) -> Result<Vec<f64>> {
        self.head.predict_proba(&self.features(raw)?)
    }

    /// Train on the given outlets. Concat-linear freezes the projections
    /// and fits only the hinge-loss head with its own solver; every other
    /// strategy trains projections, fusion parameters, and head jointly by
    /// full-batch Adam on the same hinge objective.
    pub fn train(
        view_dims: &[(ViewId, usize)],
        raws: &[[Option<Vec<f64>>; VIEW_COUNT]],
        ys: &[usize],
        scale: &LabelScale,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        if raws.len() != ys.len() {
            return Err(FusionError::Shape(format!(
                "{} outlets vs {} labels",
                raws.len(),
                ys.len()
            )));
        }
        let mut model = Self::new(view_dims, scale.clone(), cfg)?;
        match cfg.strategy {
            FusionStrategy::ConcatLinear => {
                let features: Vec<Vec<f64>> = raws
                    .iter()
                    .map(|raw| model.features(raw))
                    .collect::<Result<_>>()?;
                model.head = train_linear_classifier(&features, ys, scale, &cfg.head)?;
                Ok(model)
            }
            _ => {
                model.train_jointly(raws, ys, cfg)?;
                Ok(model)
            }
        }
    }

    fn train_jointly(
        &mut self,
        raws: &[[Option<Vec<f64>>; VIEW_COUNT]],
        ys: &[usize],
        cfg: &PipelineConfig,
    ) -> Result<()> {
        let n = raws.len() as f64;
        let total = self.param_count();
        let mut opt = Optimizer::adam(cfg.joint_lr, total);
        for _ in 0..cfg.joint_epochs {
            let mut grads = GradSet::zeros_like(self);
            let mut loss = 0.0;
            for (raw, &y) in raws.iter().zip(ys) {
                let fwd = self.forward(raw)?;
                let (l, g_margin) = self.head.hinge_and_margin_grad(&fwd.features, y)?;
                loss += l / n;
                // head grads + feature gradient
                let mut g_features = self.head.weight.matvec_t(&g_margin)?;
                for v in &mut g_features {
                    *v /= n;
                }
                grads.head_w.add_outer(1.0 / n, &g_margin, &fwd.features)?;
                for (gb, &gm) in grads.head_b.iter_mut().zip(&g_margin) {
                    *gb += gm / n;
                }
                self.backward_into(&fwd, &g_features, &mut grads)?;
            }
            if !loss.is_finite() {
                return Err(FusionError::Num(crate::numkit::NumKitError::Numeric(
                    "non-finite fusion training loss".into(),
                )));
            }
            let gslices = grads.slices();
            let mut pslices = self.params_mut();
            opt.step(&mut pslices, &gslices)?;
        }
        Ok(())
    }

    /// Distribute a feature gradient through the strategy and projections.
    fn backward_into(&self, fwd: &Forward, g_features: &[f64], grads: &mut GradSet) -> Result<()> {
        let d = self.projector.d;
        let mut g_tokens: [Vec<f64>; VIEW_COUNT] = Default::default();
        for g in &mut g_tokens {
            *g = vec![0.0; d];
        }
        match (&self.strategy, &fwd.cache) {
            (FusionStrategy::Mlp, StrategyCache::Mlp(cache)) => {
                let layer = self.mlp.as_ref().expect("mlp layer");
                let (g_w, g_b, g_concat) = layer.backward(cache, g_features)?;
                accumulate(&mut grads.mlp_w, &g_w);
                accumulate_vec(&mut grads.mlp_b, &g_b);
                for (i, g) in g_tokens.iter_mut().enumerate() {
                    g.copy_from_slice(&g_concat[i * d..(i + 1) * d]);
                }
            }
            (FusionStrategy::SelfAttention, StrategyCache::SelfAttn(cache)) => {
                let block = self.attn.as_ref().expect("attention block");
                let (ag, g_q_tok, g_c_tok) = block.backward(cache, g_features)?;
                grads.add_attn(&ag);
                for (i, g) in g_tokens.iter_mut().enumerate() {
                    for c in 0..d {
                        g[c] += g_q_tok[i][c] + g_c_tok[i][c];
                    }
                }
            }
            (FusionStrategy::CrossAttention, StrategyCache::CrossAttn(cache)) => {
                let block = self.attn.as_ref().expect("attention block");
                let (ag, g_q_tok, g_c_tok) = block.backward(cache, g_features)?;
                grads.add_attn(&ag);
                let qi = ViewId::Articles.index();
                for c in 0..d {
                    g_tokens[qi][c] += g_q_tok[0][c];
                }
                for (slot, view) in GRAPH_VIEWS.iter().enumerate() {
                    for c in 0..d {
                        g_tokens[view.index()][c] += g_c_tok[slot][c];
                    }
                }
            }
            (FusionStrategy::CoAttention, StrategyCache::CoAttn(ca, cb)) => {
                let ab = self.attn.as_ref().expect("attention block");
                let ba = self.attn_back.as_ref().expect("attention block");
                let (g_ab, g_ba_half) = g_features.split_at(d);
                let (ag_ab, g_a_q, g_b_ctx) = ab.backward(ca, g_ab)?;
                let (ag_ba, g_b_q, g_a_ctx) = ba.backward(cb, g_ba_half)?;
                grads.add_attn(&ag_ab);
                grads.add_attn_back(&ag_ba);
                let ai = ViewId::Articles.index();
                // gradient for the articles token (query of ab, context of ba)
                for c in 0..d {
                    g_tokens[ai][c] += g_a_q[0][c] + g_a_ctx[0][c];
                }
                // pooled graph token: mean of the three graph views
                for view in GRAPH_VIEWS {
                    for c in 0..d {
                        g_tokens[view.index()][c] += (g_b_ctx[0][c] + g_b_q[0][c]) / 3.0;
                    }
                }
            }
            (FusionStrategy::ConcatLinear, StrategyCache::Concat) => {
                for (i, g) in g_tokens.iter_mut().enumerate() {
                    g.copy_from_slice(&g_features[i * d..(i + 1) * d]);
                }
            }
            _ => unreachable!("cache matches strategy"),
        }

        for view in ViewId::ALL {
            let i = view.index();
            let (Some(layer), Some(cache)) =
                (&self.projector.layers[i], &fwd.projection_caches[i])
            else {
                continue;
            };
            let (g_w, g_b, _) = layer.backward(cache, &g_tokens[i])?;
            accumulate(&mut grads.proj_w[i], &g_w);
            accumulate_vec(&mut grads.proj_b[i], &g_b);
        }
        Ok(())
    }

    /// Trainable parameters in documented order: projections (by view
    /// index), fusion parameters, then the head.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.projector.params_mut();
        if let Some(l) = &mut self.mlp {
            out.extend(l.params_mut());
        }
        if let Some(b) = &mut self.attn {
            out.extend(b.params_mut());
        }
        if let Some(b) = &mut self.attn_back {
            out.extend(b.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.projector.param_count()
            + self.mlp.as_ref().map_or(0, |l| l.param_count())
            + self.attn.as_ref().map_or(0, |b| b.param_count())
            + self.attn_back.as_ref().map_or(0, |b| b.param_count())
            + self.head.param_count()
    }
}

/// Mean of the three projected graph-view tokens (fixed denominator, so
/// missing views contribute zeros).
fn pooled_graph_token(bundle: &ViewBundle) -> Vec<f64> {
    let mut b = vec![0.0; bundle.d];
    for view in GRAPH_VIEWS {
        for (bi, &v) in b.iter_mut().zip(&bundle.projected[view.index()]) {
            *bi += v / 3.0;
        }
    }
    b
}

struct GradSet {
    proj_w: Vec<Tensor2>,
    proj_b: Vec<Vec<f64>>,
    proj_present: Vec<bool>,
    mlp_w: Tensor2,
    mlp_b: Vec<f64>,
    has_mlp: bool,
    attn: Vec<Tensor2>, // w_q, w_k, w_v
    has_attn: bool,
    attn_back: Vec<Tensor2>,
    has_attn_back: bool,
    head_w: Tensor2,
    head_b: Vec<f64>,
}

impl GradSet {
    fn zeros_like(model: &FusionPipeline) -> Self {
        let d = model.projector.d;
        let mut proj_w = Vec::new();
        let mut proj_b = Vec::new();
        let mut proj_present = Vec::new();
        for layer in &model.projector.layers {
            match layer {
                Some(l) => {
                    proj_w.push(Tensor2::zeros(l.out_dim(), l.in_dim()));
                    proj_b.push(vec![0.0; l.out_dim()]);
                    proj_present.push(true);
                }
                None => {
                    proj_w.push(Tensor2::zeros(0, 0));
                    proj_b.push(Vec::new());
                    proj_present.push(false);
                }
            }
        }
        let (mlp_w, mlp_b, has_mlp) = match &model.mlp {
            Some(l) => (Tensor2::zeros(l.out_dim(), l.in_dim()), vec![0.0; l.out_dim()], true),
            None => (Tensor2::zeros(0, 0), Vec::new(), false),
        };
        let zero3 = || vec![Tensor2::zeros(d, d), Tensor2::zeros(d, d), Tensor2::zeros(d, d)];
        Self {
            proj_w,
            proj_b,
            proj_present,
            mlp_w,
            mlp_b,
            has_mlp,
            attn: if model.attn.is_some() { zero3() } else { Vec::new() },
            has_attn: model.attn.is_some(),
            attn_back: if model.attn_back.is_some() { zero3() } else { Vec::new() },
            has_attn_back: model.attn_back.is_some(),
            head_w: Tensor2::zeros(model.head.weight.rows(), model.head.weight.cols()),
            head_b: vec![0.0; model.head.bias.len()],
        }
    }

    fn add_attn(&mut self, g: &AttentionGrads2) {
        accumulate(&mut self.attn[0], &g.w_q);
        accumulate(&mut self.attn[1], &g.w_k);
        accumulate(&mut self.attn[2], &g.w_v);
    }

    fn add_attn_back(&mut self, g: &AttentionGrads2) {
        accumulate(&mut self.attn_back[0], &g.w_q);
        accumulate(&mut self.attn_back[1], &g.w_k);
        accumulate(&mut self.attn_back[2], &g.w_v);
    }

    /// Slices in the exact order of `FusionPipeline::params_mut`.
    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for i in 0..self.proj_w.len() {
            if self.proj_present[i] {
                out.push(self.proj_w[i].as_slice());
                out.push(&self.proj_b[i]);
            }
        }
        if self.has_mlp {
            out.push(self.mlp_w.as_slice());
            out.push(&self.mlp_b);
        }
        if self.has_attn {
            for t in &self.attn {
                out.push(t.as_slice());
            }
        }
        if self.has_attn_back {
            for t in &self.attn_back {
                out.push(t.as_slice());
            }
        }
        out.push(self.head_w.as_slice());
        out.push(&self.head_b);
        out
    }
}

type AttentionGrads2 = super::AttentionGrads;

fn accumulate(into: &mut Tensor2, from: &Tensor2) {
    for (a, b) in into.as_mut_slice().iter_mut().zip(from.as_slice()) {
        *a += b;
    }
}

fn accumulate_vec(into: &mut [f64], from: &[f64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a += b;
    }
}
