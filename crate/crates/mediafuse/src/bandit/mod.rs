//! Dynamic fusion as a contextual bandit: a Gaussian actor-critic policy
//! over per-view weights, trained with PPO at discount 0 against a frozen
//! reward classifier.

mod policy;
mod ppo;

pub use policy::{ActionSample, FusionPolicy, PolicyGrads, LOG_STD_INIT};
pub use ppo::{
    collect_rollout, fuse_with_policy, load_policy, ppo_update, save_policy, train_ppo,
    PolicyCheckpoint, Transition, UpdateDiagnostics,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{LabelScale, VIEW_COUNT};
use crate::fusion::{
    train_linear_classifier, FusionError, LinearClassifier, LinearTrainConfig, Result as FusionResult,
    ViewBundle,
};
use crate::numkit::NumKitError;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("no training outlets for rollout collection")]
    NoData,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumKitError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, BanditError>;

/// PPO hyperparameters. The contextual-bandit framing fixes `gamma = 0`;
/// the paper values are batch 256, rollout 1024, learning rate 1e-4, two
/// hidden layers of 128.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub rollout: usize,
    pub epochs_per_update: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub hidden: usize,
    pub updates: usize,
    pub seed: u64,
}

impl PpoConfig {
    pub fn new(updates: usize, seed: u64) -> Self {
        Self {
            gamma: 0.0,
            clip_eps: 0.2,
            learning_rate: 1e-4,
            minibatch: 256,
            rollout: 1024,
            epochs_per_update: 4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            hidden: 128,
            updates,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma != 0.0 {
            return Err(BanditError::Config(
                "contextual bandit requires discount factor 0".into(),
            ));
        }
        if self.minibatch == 0 || self.rollout % self.minibatch != 0 {
            return Err(BanditError::Config(format!(
                "rollout {} must be a positive multiple of minibatch {}",
                self.rollout, self.minibatch
            )));
        }
        Ok(())
    }
}

/// One training outlet: its projected views, its label, and the bandit
/// state (the concatenation of the five projected view vectors).
#[derive(Debug, Clone)]
pub struct BanditOutlet {
    pub domain: String,
    pub bundle: ViewBundle,
    pub label: usize,
}

impl BanditOutlet {
    /// State vector `s`: the 5d concatenation of projected views.
    pub fn state(&self) -> Vec<f64> {
        crate::fusion::fuse_concat(&self.bundle)
    }
}

/// The bandit environment: training outlets plus the frozen reward
/// classifier. Actions never affect state transitions; each step samples an
/// outlet independently.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub outlets: Vec<BanditOutlet>,
    pub reward: RewardModel,
}

impl BanditEnv {
    pub fn state_dim(&self) -> usize {
        VIEW_COUNT * self.reward.fused_dim()
    }
}

/// Frozen linear classifier over fused embeddings; its probability for the
/// true label is the reward.
#[derive(Debug, Clone)]
pub struct RewardModel {
    classifier: LinearClassifier,
}

impl RewardModel {
    /// Wrap an already-trained classifier (it is never updated again).
    pub fn freeze(classifier: LinearClassifier) -> Self {
        Self { classifier }
    }

    pub fn classifier(&self) -> &LinearClassifier {
        &self.classifier
    }

    pub fn fused_dim(&self) -> usize {
        self.classifier.feature_dim()
    }

    pub fn scale(&self) -> &LabelScale {
        &self.classifier.scale
    }
}

/// Uniform view weights, the reward model's pretraining fusion.
pub const UNIFORM_WEIGHTS: [f64; VIEW_COUNT] = [0.2; VIEW_COUNT];

/// Weighted sum of the projected views: `E = sum_k w_k F^(k)`. Weights
/// outside `[0, 1]` are clipped with a warning.
pub fn fused_embedding(bundle: &ViewBundle, weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(weights.len(), VIEW_COUNT);
    let mut out = vec![0.0; bundle.d];
    for (k, view) in bundle.projected.iter().enumerate() {
        let mut w = weights[k];
        if !(0.0..=1.0).contains(&w) {
            log::warn!("fusion weight {w} for view {k} outside [0,1]; clipping");
            w = w.clamp(0.0, 1.0);
        }
        if w == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(view) {
            *o += w * v;
        }
    }
    out
}

/// Reward `r = P(y_true | E_fused)` under the frozen classifier.
pub fn step_reward(
    model: &RewardModel,
    bundle: &ViewBundle,
    weights: &[f64],
    y_true: usize,
) -> FusionResult<f64> {
    let fused = fused_embedding(bundle, weights);
    Ok(model.classifier.predict_proba(&fused)?[y_true])
}

/// Train the reward classifier on uniform-weight fused embeddings over the
/// training outlets, then freeze it.
pub fn train_reward_model(
    outlets: &[BanditOutlet],
    scale: &LabelScale,
    cfg: &LinearTrainConfig,
) -> Result<RewardModel> {
    if outlets.is_empty() {
        return Err(BanditError::NoData);
    }
    let xs: Vec<Vec<f64>> =
        outlets.iter().map(|o| fused_embedding(&o.bundle, &UNIFORM_WEIGHTS)).collect();
    let ys: Vec<usize> = outlets.iter().map(|o| o.label).collect();
    let classifier = train_linear_classifier(&xs, &ys, scale, cfg)?;
    Ok(RewardModel::freeze(classifier))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ViewId;
    use crate::numkit::Rng;

    fn bundle_with(d: usize, entries: &[(ViewId, Vec<f64>)]) -> ViewBundle {
        let mut views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        for (v, vec) in entries {
            views[v.index()] = Some(vec.clone());
        }
        ViewBundle::from_projected(d, views).unwrap()
    }

    #[test]
    fn basis_weight_selects_one_view() {
        let b = bundle_with(
            2,
            &[(ViewId::Alexa, vec![3.0, -1.0]), (ViewId::Hyperlink, vec![5.0, 5.0])],
        );
        let e = fused_embedding(&b, &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(e, vec![3.0, -1.0]);
    }

    #[test]
    fn zero_weights_give_zero_vector() {
        let b = bundle_with(2, &[(ViewId::Alexa, vec![3.0, -1.0])]);
        assert_eq!(fused_embedding(&b, &[0.0; 5]), vec![0.0, 0.0]);
    }

    #[test]
    fn half_half_arithmetic() {
        let b = bundle_with(
            2,
            &[(ViewId::Alexa, vec![2.0, 0.0]), (ViewId::Hyperlink, vec![0.0, 2.0])],
        );
        let e = fused_embedding(&b, &[0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(e, vec![1.0, 1.0]);
    }

    #[test]
    fn out_of_range_weights_clip() {
        let b = bundle_with(1, &[(ViewId::Alexa, vec![1.0])]);
        let e = fused_embedding(&b, &[2.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(e, vec![1.0]);
    }

    #[test]
    fn zero_classifier_rewards_uniformly() {
        let scale = LabelScale::bias3();
        let model = RewardModel::freeze(LinearClassifier::zeros(2, scale));
        let b = bundle_with(2, &[(ViewId::Alexa, vec![1.0, 1.0])]);
        for y in 0..3 {
            let r = step_reward(&model, &b, &[0.7; 5], y).unwrap();
            assert!((r - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_classifier_rewards_near_one() {
        let scale = LabelScale::bias3();
        let mut clf = LinearClassifier::zeros(1, scale);
        *clf.weight.at_mut(1, 0) = 200.0;
        let model = RewardModel::freeze(clf);
        let b = bundle_with(1, &[(ViewId::Alexa, vec![1.0])]);
        let r = step_reward(&model, &b, &[1.0, 0.0, 0.0, 0.0, 0.0], 1).unwrap();
        assert!(r > 0.999999);
    }

    #[test]
    fn reward_matches_manual_softmax() {
        let scale = LabelScale::bias3();
        let mut rng = Rng::new(4);
        let mut clf = LinearClassifier::zeros(3, scale);
        for w in clf.weight.as_mut_slice() {
            *w = rng.normal();
        }
        for b in &mut clf.bias {
            *b = rng.normal();
        }
        let model = RewardModel::freeze(clf.clone());
        let bundle = bundle_with(
            3,
            &[(ViewId::Alexa, vec![0.3, -1.0, 2.0]), (ViewId::Articles, vec![1.0, 1.0, 0.0])],
        );
        let w = [0.25, 0.0, 0.0, 0.9, 0.1];
        let fused: Vec<f64> = (0..3)
            .map(|c| 0.25 * bundle.projected[0][c] + 0.9 * bundle.projected[3][c]
                + 0.1 * bundle.projected[4][c])
            .collect();
        let margins: Vec<f64> = (0..3)
            .map(|k| {
                (0..3).map(|c| clf.weight.at(k, c) * fused[c]).sum::<f64>() + clf.bias[k]
            })
            .collect();
        let mx = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = margins.iter().map(|m| (m - mx).exp()).collect();
        let z: f64 = exps.iter().sum();
        for y in 0..3 {
            let got = step_reward(&model, &bundle, &w, y).unwrap();
            assert!((got - exps[y] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn reward_is_pure_in_its_inputs() {
        let scale = LabelScale::bias3();
        let mut clf = LinearClassifier::zeros(2, scale);
        *clf.weight.at_mut(0, 0) = 1.0;
        let model = RewardModel::freeze(clf);
        let b = bundle_with(2, &[(ViewId::Llm, vec![0.4, 0.6])]);
        let w = [0.1, 0.2, 0.3, 0.4, 0.5];
        let a = step_reward(&model, &b, &w, 1).unwrap();
        let bb = step_reward(&model, &b, &w, 1).unwrap();
        assert_eq!(a, bb);
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = PpoConfig::new(10, 1);
        cfg.gamma = 0.9;
        assert!(cfg.validate().is_err());
        let mut cfg = PpoConfig::new(10, 1);
        cfg.minibatch = 300; // 1024 not divisible
        assert!(cfg.validate().is_err());
        assert!(PpoConfig::new(10, 1).validate().is_ok());
    }
}
