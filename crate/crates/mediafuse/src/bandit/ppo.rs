use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::core::{LabelScale, VIEW_COUNT};
use crate::fusion::{LinearClassifier, ViewBundle};
use crate::numkit::{load_checkpoint, save_checkpoint, Optimizer, Rng};

use super::policy::check_finite;
use super::{
    fused_embedding, step_reward, BanditEnv, BanditError, FusionPolicy, PolicyGrads, PpoConfig,
    Result, RewardModel,
};

/// One bandit step: state, raw sampled action, its pre-clip log-density,
/// and the immediate reward. With discount 0 the return IS the reward.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
}

/// Per-update training log row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub update: usize,
    pub mean_reward: f64,
    pub clip_fraction: f64,
    pub value_loss: f64,
    pub mean_weights: Vec<f64>,
}

/// Sample `n` independent steps: outlets uniformly with replacement, one
/// action each, reward from the frozen classifier.
pub fn collect_rollout(
    env: &BanditEnv,
    policy: &FusionPolicy,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<Transition>> {
    if env.outlets.is_empty() {
        return Err(BanditError::NoData);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let outlet = &env.outlets[rng.below(env.outlets.len())];
        let state = outlet.state();
        let sample = policy.sample_action(&state, rng)?;
        let reward = step_reward(&env.reward, &outlet.bundle, &sample.weights, outlet.label)?;
        out.push(Transition { state, action: sample.action, log_prob: sample.log_prob, reward });
    }
    Ok(out)
}

/// One PPO update over a collected rollout: advantages `A = r - V(s)` from
/// the pre-update critic (discount 0 makes returns equal rewards), then
/// `epochs_per_update` passes of shuffled minibatches minimizing the
/// clipped surrogate plus `value_coef * (V(s) - r)^2`, with one shared Adam
/// over actor, log-stds, and critic.
pub fn ppo_update(
    policy: &mut FusionPolicy,
    batch: &[Transition],
    cfg: &PpoConfig,
    opt: &mut Optimizer,
    rng: &mut Rng,
    update_index: usize,
) -> Result<UpdateDiagnostics> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(BanditError::NoData);
    }
    // gamma = 0: returns are exactly the immediate rewards
    let returns: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    let advantages: Vec<f64> = batch
        .iter()
        .zip(&returns)
        .map(|(t, &r)| policy.state_value(&t.state).map(|v| r - v))
        .collect::<Result<_>>()?;

    let mut clip_events = 0usize;
    let mut clip_total = 0usize;
    let mut last_value_loss = 0.0;
    for _ in 0..cfg.epochs_per_update {
        let mut order: Vec<usize> = (0..batch.len()).collect();
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.minibatch.min(batch.len())) {
            let m = chunk.len() as f64;
            let mut grads = PolicyGrads::zeros_like(policy);
            let mut value_loss = 0.0;
            for &i in chunk {
                let t = &batch[i];
                let fwd = policy.actor_forward(&t.state)?;
                let logp_new = policy.log_prob(&fwd.mean.out, &t.action);
                let ratio = check_finite((logp_new - t.log_prob).exp(), "ppo ratio")?;
                let a = advantages[i];
                let unclipped = ratio * a;
                let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
                if (ratio - 1.0).abs() > cfg.clip_eps {
                    clip_events += 1;
                }
                clip_total += 1;
                // d(-min)/dlogp is -A*ratio where the unclipped branch is active
                if unclipped <= clipped {
                    policy.logp_backward(&fwd, &t.action, -a * ratio / m, &mut grads)?;
                }
                let cfwd = policy.critic_forward(&t.state)?;
                let v = cfwd.v.out[0];
                let err = v - returns[i];
                value_loss += cfg.value_coef * err * err / m;
                policy.value_backward(&cfwd, 2.0 * cfg.value_coef * err / m, &mut grads)?;
            }
            check_finite(value_loss, "ppo value loss")?;
            last_value_loss = value_loss;
            let g_slices = grads.slices();
            let mut p_slices = policy.params_mut();
            opt.step(&mut p_slices, &g_slices)?;
        }
    }

    let mean_reward = returns.iter().sum::<f64>() / returns.len() as f64;
    let mut mean_weights = vec![0.0; VIEW_COUNT];
    for t in batch {
        for (mw, a) in mean_weights.iter_mut().zip(&t.action) {
            *mw += a.clamp(0.0, 1.0) / batch.len() as f64;
        }
    }
    Ok(UpdateDiagnostics {
        update: update_index,
        mean_reward,
        clip_fraction: clip_events as f64 / clip_total.max(1) as f64,
        value_loss: last_value_loss,
        mean_weights,
    })
}

/// Full training loop: a fresh policy, `cfg.updates` rounds of rollout
/// collection and PPO updates. Deterministic per seed.
pub fn train_ppo(env: &BanditEnv, cfg: &PpoConfig) -> Result<(FusionPolicy, Vec<UpdateDiagnostics>)> {
    cfg.validate()?;
    if env.outlets.is_empty() {
        return Err(BanditError::NoData);
    }
    let mut policy = FusionPolicy::init(env.state_dim(), cfg.hidden, cfg.seed);
    let mut opt = Optimizer::adam(cfg.learning_rate, policy.param_count());
    let mut rng = Rng::new(cfg.seed).derive("ppo-train");
    let mut log = Vec::with_capacity(cfg.updates);
    for update in 0..cfg.updates {
        let batch = collect_rollout(env, &policy, cfg.rollout, &mut rng)?;
        let diag = ppo_update(&mut policy, &batch, cfg, &mut opt, &mut rng, update)?;
        log.push(diag);
    }
    Ok((policy, log))
}

/// Deterministic evaluation: weights are the mean action `mu(s)` (clipped),
/// the fused embedding uses them, and the frozen classifier predicts.
pub fn fuse_with_policy(
    policy: &FusionPolicy,
    reward: &RewardModel,
    bundle: &ViewBundle,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let state = crate::fusion::fuse_concat(bundle);
    let mu = policy.mean_action(&state)?;
    let weights: Vec<f64> = mu.iter().map(|w| w.clamp(0.0, 1.0)).collect();
    let fused = fused_embedding(bundle, &weights);
    let pred = reward.classifier().predict(&fused)?;
    Ok((weights, fused, pred))
}

/// Serialized policy + frozen reward classifier.
pub struct PolicyCheckpoint {
    pub policy: FusionPolicy,
    pub reward: RewardModel,
    pub config: PpoConfig,
}

pub fn save_policy(
    path: &Path,
    policy: &FusionPolicy,
    reward: &RewardModel,
    cfg: &PpoConfig,
) -> Result<()> {
    let clf = reward.classifier();
    let header = json!({
        "model": "ppo-policy",
        "state_dim": policy.state_dim(),
        "hidden": policy.hidden_dim(),
        "fused_dim": clf.feature_dim(),
        "scale": clf.scale,
        "config": cfg,
    });
    let mut params: Vec<f64> = policy.params().concat();
    params.extend(clf.params().concat());
    save_checkpoint(path, header, params)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<PolicyCheckpoint> {
    let ck = load_checkpoint(path)?;
    if ck.header.get("model").and_then(|v| v.as_str()) != Some("ppo-policy") {
        return Err(BanditError::Checkpoint("not a ppo-policy checkpoint".into()));
    }
    let get = |k: &str| -> Result<usize> {
        ck.header[k]
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| BanditError::Checkpoint(format!("missing header field {k}")))
    };
    let state_dim = get("state_dim")?;
    let hidden = get("hidden")?;
    let fused_dim = get("fused_dim")?;
    let scale: LabelScale = serde_json::from_value(ck.header["scale"].clone())
        .map_err(|e| BanditError::Checkpoint(format!("bad scale: {e}")))?;
    let config: PpoConfig = serde_json::from_value(ck.header["config"].clone())
        .map_err(|e| BanditError::Checkpoint(format!("bad config: {e}")))?;

    let mut policy = FusionPolicy::init(state_dim, hidden, config.seed);
    let mut classifier = LinearClassifier::zeros(fused_dim, scale);
    let expected = policy.param_count() + classifier.param_count();
    if ck.params.len() != expected {
        return Err(BanditError::Checkpoint(format!(
            "checkpoint has {} params, model needs {expected}",
            ck.params.len()
        )));
    }
    let mut off = 0;
    for slice in policy.params_mut().into_iter().chain(classifier.params_mut()) {
        slice.copy_from_slice(&ck.params[off..off + slice.len()]);
        off += slice.len();
    }
    Ok(PolicyCheckpoint { policy, reward: RewardModel::freeze(classifier), config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{train_reward_model, BanditOutlet, UNIFORM_WEIGHTS};
    use crate::core::ViewId;
    use crate::fusion::LinearTrainConfig;

    /// Tiny synthetic environment: view 0 carries the class mean, the rest
    /// is noise.
    fn toy_env(n: usize, d: usize, seed: u64) -> BanditEnv {
        let mut rng = Rng::new(seed);
        let scale = LabelScale::bias3();
        let means: Vec<Vec<f64>> =
            (0..3).map(|_| (0..d).map(|_| 1.5 * rng.normal()).collect()).collect();
        let mut outlets = Vec::new();
        for i in 0..n {
            let y = i % 3;
            let mut views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
            views[0] = Some(means[y].iter().map(|&m| m + 0.5 * rng.normal()).collect());
            for k in 1..VIEW_COUNT {
                views[k] = Some((0..d).map(|_| rng.normal()).collect());
            }
            outlets.push(BanditOutlet {
                domain: format!("o{i:03}.test"),
                bundle: ViewBundle::from_projected(d, views).unwrap(),
                label: y,
            });
        }
        let reward =
            train_reward_model(&outlets, &scale, &LinearTrainConfig::default()).unwrap();
        BanditEnv { outlets, reward }
    }

    #[test]
    fn empty_rollout_is_empty() {
        let env = toy_env(6, 3, 1);
        let policy = FusionPolicy::init(env.state_dim(), 8, 2);
        let batch = collect_rollout(&env, &policy, 0, &mut Rng::new(3)).unwrap();
        assert!(batch.is_empty());
    }

    #[test]
    fn rewards_live_in_the_open_unit_interval() {
        let env = toy_env(9, 3, 2);
        let policy = FusionPolicy::init(env.state_dim(), 8, 2);
        let batch = collect_rollout(&env, &policy, 64, &mut Rng::new(4)).unwrap();
        assert_eq!(batch.len(), 64);
        assert!(batch.iter().all(|t| t.reward > 0.0 && t.reward < 1.0));
    }

    #[test]
    fn fixed_seed_gives_identical_rollouts() {
        let env = toy_env(9, 3, 2);
        let policy = FusionPolicy::init(env.state_dim(), 8, 2);
        let a = collect_rollout(&env, &policy, 32, &mut Rng::new(7)).unwrap();
        let b = collect_rollout(&env, &policy, 32, &mut Rng::new(7)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.state, y.state);
            assert_eq!(x.action, y.action);
            assert_eq!(x.reward, y.reward);
        }
    }

    #[test]
    fn empty_outlets_is_no_data() {
        let env = toy_env(3, 2, 3);
        let empty = BanditEnv { outlets: Vec::new(), reward: env.reward.clone() };
        let policy = FusionPolicy::init(10, 8, 2);
        assert!(matches!(
            collect_rollout(&empty, &policy, 4, &mut Rng::new(1)),
            Err(BanditError::NoData)
        ));
    }

    #[test]
    fn returns_equal_rewards_bitwise_at_gamma_zero() {
        let env = toy_env(9, 3, 5);
        let policy = FusionPolicy::init(env.state_dim(), 8, 2);
        let batch = collect_rollout(&env, &policy, 16, &mut Rng::new(5)).unwrap();
        // the update path uses t.reward directly as the return
        let returns: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        for (t, r) in batch.iter().zip(&returns) {
            assert!(t.reward.to_bits() == r.to_bits());
        }
    }

    #[test]
    fn clip_arithmetic_matches_hand_value() {
        // ratio 1.5, eps 0.2, A = 1: surrogate min(1.5, 1.2) = 1.2
        let ratio: f64 = 1.5;
        let a = 1.0;
        let clipped = ratio.clamp(0.8, 1.2) * a;
        let unclipped = ratio * a;
        assert_eq!(unclipped.min(clipped), 1.2);
    }

    #[test]
    fn zero_advantage_leaves_actor_untouched() {
        let env = toy_env(9, 3, 6);
        let mut policy = FusionPolicy::init(env.state_dim(), 8, 2);
        // force V(s) == r by zeroing the critic and faking rewards of V=0
        for layer in [&mut policy.c1, &mut policy.c2, &mut policy.value] {
            layer.weight.fill(0.0);
            layer.bias.fill(0.0);
        }
        let mut batch = collect_rollout(&env, &policy, 8, &mut Rng::new(6)).unwrap();
        for t in &mut batch {
            t.reward = 0.0; // A = 0 - 0 = 0 for every sample
        }
        let cfg = PpoConfig { minibatch: 8, rollout: 8, ..PpoConfig::new(1, 3) };
        let actor_before: Vec<f64> =
            [policy.l1.params().concat(), policy.mean.params().concat()].concat();
        let mut opt = Optimizer::adam(cfg.learning_rate, policy.param_count());
        ppo_update(&mut policy, &batch, &cfg, &mut opt, &mut Rng::new(8), 0).unwrap();
        let actor_after: Vec<f64> =
            [policy.l1.params().concat(), policy.mean.params().concat()].concat();
        assert_eq!(actor_before, actor_after);
    }

    #[test]
    fn diagnostics_are_well_formed() {
        let env = toy_env(12, 3, 7);
        let cfg = PpoConfig { rollout: 32, minibatch: 16, updates: 2, ..PpoConfig::new(2, 11) };
        let (_, log) = train_ppo(&env, &cfg).unwrap();
        assert_eq!(log.len(), 2);
        for d in &log {
            assert!((0.0..=1.0).contains(&d.clip_fraction));
            assert!(d.mean_reward > 0.0 && d.mean_reward < 1.0);
            assert!(d.value_loss.is_finite());
            assert_eq!(d.mean_weights.len(), VIEW_COUNT);
            assert!(d.mean_weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let env = toy_env(12, 3, 8);
        let cfg = PpoConfig { rollout: 16, minibatch: 8, updates: 2, ..PpoConfig::new(2, 13) };
        let (a, la) = train_ppo(&env, &cfg).unwrap();
        let (b, lb) = train_ppo(&env, &cfg).unwrap();
        assert_eq!(a.params().concat(), b.params().concat());
        assert_eq!(la.last().unwrap().mean_reward, lb.last().unwrap().mean_reward);
    }

    #[test]
    fn policy_checkpoint_round_trips() {
        let env = toy_env(12, 3, 9);
        let cfg = PpoConfig { rollout: 16, minibatch: 8, updates: 1, ..PpoConfig::new(1, 17) };
        let (policy, _) = train_ppo(&env, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        save_policy(&path, &policy, &env.reward, &cfg).unwrap();
        let loaded = load_policy(&path).unwrap();
        assert_eq!(policy.params().concat(), loaded.policy.params().concat());
        let bundle = &env.outlets[0].bundle;
        let (w1, f1, p1) = fuse_with_policy(&policy, &env.reward, bundle).unwrap();
        let (w2, f2, p2) = fuse_with_policy(&loaded.policy, &loaded.reward, bundle).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(f1, f2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn mean_action_fusion_is_deterministic_and_boxed() {
        let env = toy_env(9, 3, 10);
        let policy = FusionPolicy::init(env.state_dim(), 8, 21);
        let (w, _, _) = fuse_with_policy(&policy, &env.reward, &env.outlets[0].bundle).unwrap();
        let (w2, _, _) = fuse_with_policy(&policy, &env.reward, &env.outlets[0].bundle).unwrap();
        assert_eq!(w, w2);
        assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn uniform_weights_constant_matches_spec_value() {
        assert_eq!(UNIFORM_WEIGHTS, [0.2; 5]);
        let _ = ViewId::ALL;
    }
}
