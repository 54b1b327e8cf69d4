// scratch harness for tuning the synthetic experiments (not shipped)
use mediafuse::bandit::*;
use mediafuse::core::{LabelScale, ViewId, VIEW_COUNT};
use mediafuse::fusion::{LinearTrainConfig, ViewBundle};
use mediafuse::gnn::*;
use mediafuse::graph::synthetic_sbm;
use mediafuse::numkit::{Rng, Tensor2};

fn make_outlets(n: usize, d: usize, seed: u64, mean_scale: f64) -> Vec<BanditOutlet> {
    let mut rng = Rng::new(seed);
    let means: Vec<Vec<f64>> =
        (0..3).map(|_| (0..d).map(|_| mean_scale * rng.normal()).collect()).collect();
    let mut outlets = Vec::new();
    for i in 0..n {
        let y = i % 3;
        let mut views: [Option<Vec<f64>>; VIEW_COUNT] = Default::default();
        views[0] = Some(means[y].iter().map(|&m| m + 0.5 * rng.normal()).collect());
        for k in 1..VIEW_COUNT {
            views[k] = Some((0..d).map(|_| rng.normal()).collect());
        }
        outlets.push(BanditOutlet {
            domain: format!("o{i:04}.test"),
            bundle: ViewBundle::from_projected(d, views).unwrap(),
            label: y,
        });
    }
    outlets
}

fn rl_experiment() {
    let d = 16;
    let scale = LabelScale::bias3();
    let train = make_outlets(300, d, 1001, 1.0);
    let test = make_outlets(100, d, 2002, 1.0);
    // NOTE: test must use the same class means as train! fix: generate 400 and split
    let all = make_outlets(400, d, 1001, 1.0);
    let (train, test) = all.split_at(300);
    let reward = train_reward_model(train, &scale, &LinearTrainConfig::default()).unwrap();
    let uniform_acc = |outlets: &[BanditOutlet]| {
        let correct = outlets
            .iter()
            .filter(|o| {
                let fused = fused_embedding(&o.bundle, &UNIFORM_WEIGHTS);
                reward.classifier().predict(&fused).unwrap() == o.label
            })
            .count();
        correct as f64 / outlets.len() as f64
    };
    println!("uniform train acc: {:.3}", uniform_acc(train));
    println!("uniform test acc:  {:.3}", uniform_acc(test));

    let env = BanditEnv { outlets: train.to_vec(), reward: reward.clone() };
    for updates in [50usize, 100, 200] {
        let cfg = PpoConfig::new(updates, 7);
        let t0 = std::time::Instant::now();
        let (policy, log) = train_ppo(&env, &cfg).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let mut mean_w = vec![0.0; VIEW_COUNT];
        let mut correct = 0;
        for o in test.iter() {
            let (w, _, pred) = fuse_with_policy(&policy, &reward, &o.bundle).unwrap();
            for (acc, wi) in mean_w.iter_mut().zip(&w) {
                *acc += wi / test.len() as f64;
            }
            if pred == o.label {
                correct += 1;
            }
        }
        println!(
            "updates={updates} ({secs:.1}s): rl test acc {:.3}, first reward {:.4}, last reward {:.4}",
            correct as f64 / test.len() as f64,
            log.first().unwrap().mean_reward,
            log.last().unwrap().mean_reward
        );
        println!("  mean weights: {:?}", mean_w.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
    let _ = (train, test);
}

fn probe_accuracy(emb: &Tensor2, blocks: &[usize], holdout: bool) -> f64 {
    use mediafuse::fusion::train_linear_classifier;
    let scale = LabelScale::new("block", &["b0", "b1"]);
    let n = emb.rows();
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = if holdout {
        ((0..n).filter(|i| i % 5 != 0).collect(), (0..n).filter(|i| i % 5 == 0).collect())
    } else {
        ((0..n).collect(), (0..n).collect())
    };
    let xs: Vec<Vec<f64>> = train_idx.iter().map(|&i| emb.row(i).to_vec()).collect();
    let ys: Vec<usize> = train_idx.iter().map(|&i| blocks[i]).collect();
    let clf = train_linear_classifier(&xs, &ys, &scale, &LinearTrainConfig::default()).unwrap();
    let correct = test_idx
        .iter()
        .filter(|&&i| clf.predict(emb.row(i)).unwrap() == blocks[i])
        .count();
    correct as f64 / test_idx.len() as f64
}

fn gnn_experiment() {
    let (g, blocks) = synthetic_sbm(&[25, 25], 0.2, 0.02, 4242);
    println!("sbm: {} nodes {} edges", g.node_count(), g.edge_count());
    // random node features, dim 16
    let mut frng = Rng::new(777);
    let feats = Tensor2::from_vec(50, 16, (0..50 * 16).map(|_| frng.normal()).collect()).unwrap();

    for encoder in [EncoderKind::GraphConv, EncoderKind::Sage, EncoderKind::ResGated] {
        let cfg = GnnConfig::new(encoder, 99);
        let t0 = std::time::Instant::now();
        let model = train_gnn_with_features(&g, &feats, &cfg).unwrap();
        let outlets: Vec<String> = g.domains().map(|s| s.to_string()).collect();
        let (table, _) = embed_with_features(&model, &g, &feats, &outlets).unwrap();
        let emb = Tensor2::from_vec(
            50,
            64,
            outlets.iter().flat_map(|o| table.get(o).unwrap().to_vec()).collect(),
        )
        .unwrap();
        println!(
            "{:?} ({:.1}s): probe all {:.3}, holdout {:.3}; loss {:.4} -> {:.4}",
            encoder,
            t0.elapsed().as_secs_f64(),
            probe_accuracy(&emb, &blocks, false),
            probe_accuracy(&emb, &blocks, true),
            model.epoch_losses.first().unwrap(),
            model.epoch_losses.last().unwrap()
        );
    }

    // also check Auto features (constant + degree)
    use mediafuse::graph::{node_feature_matrix, FeatureSpec};
    let auto = node_feature_matrix(&g, &FeatureSpec::Auto);
    let cfg = GnnConfig::new(EncoderKind::GraphConv, 99);
    let model = train_gnn_with_features(&g, &auto, &cfg).unwrap();
    let outlets: Vec<String> = g.domains().map(|s| s.to_string()).collect();
    let (table, _) = embed_with_features(&model, &g, &auto, &outlets).unwrap();
    let emb = Tensor2::from_vec(
        50,
        64,
        outlets.iter().flat_map(|o| table.get(o).unwrap().to_vec()).collect(),
    )
    .unwrap();
    println!(
        "graphconv with auto features: probe all {:.3}, holdout {:.3}",
        probe_accuracy(&emb, &blocks, false),
        probe_accuracy(&emb, &blocks, true)
    );
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    if which != "gnn" {
        rl_experiment();
    }
    if which != "rl" {
        gnn_experiment();
    }
}
