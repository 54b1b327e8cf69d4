use std::path::Path;

use serde_json::json;

use crate::core::{EmbeddingTable, ViewId};
use crate::graph::{node_feature_matrix, FeatureSpec, GraphKind, MediaGraph};
use crate::numkit::{load_checkpoint, save_checkpoint, Optimizer, Rng, Tensor2};

use super::{
    contrastive_batch, edge_index, Adjacency, EncoderKind, GnnConfig, GnnError, GnnModel, Result,
};

/// Train an encoder on a graph, deriving node features from the graph kind.
pub fn train_gnn(g: &MediaGraph, cfg: &GnnConfig) -> Result<GnnModel> {
    let features = node_feature_matrix(g, &FeatureSpec::Auto);
    train_gnn_with_features(g, &features, cfg)
}

/// Train with an explicit feature matrix (rows in canonical node order).
///
/// Minibatches are edges; every batch runs a full-graph forward pass with
/// dropout, computes the contrastive loss over the batch edges, and takes
/// one Adam step. Bit-deterministic for a fixed `(seed, config, graph)`.
pub fn train_gnn_with_features(
    g: &MediaGraph,
    features: &Tensor2,
    cfg: &GnnConfig,
) -> Result<GnnModel> {
    let (edges, neighbor_sets) = edge_index(g);
    if g.node_count() == 0 || edges.is_empty() {
        return Err(GnnError::NoPositivePairs);
    }
    let (_, lists) = g.adjacency();
    let adj = Adjacency { lists };
    let mut model = GnnModel::init(cfg, features.cols());
    let mut rng = Rng::new(cfg.seed).derive("gnn-train");
    let mut opt = Optimizer::adam(cfg.learning_rate, model.param_count());
    let full = GnnModel::full_neighborhoods(&adj);

    for _epoch in 0..cfg.epochs {
        let sampled = match cfg.encoder {
            EncoderKind::Sage => GnnModel::sample_neighborhoods(&adj, &mut rng),
            _ => full.clone(),
        };
        let mut order = edges.clone();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let fwd = model.forward(features, &adj, &sampled, Some(&mut rng))?;
            let (loss, g_z) = contrastive_batch(
                &fwd.out,
                chunk,
                &neighbor_sets,
                &mut rng,
                cfg.negatives_per_positive,
            )?;
            let grads = model.backward(&fwd, &adj, &sampled, &g_z)?;
            let g_slices = grads.slices();
            let mut p_slices = model.params_mut();
            opt.step(&mut p_slices, &g_slices)?;
            epoch_loss += loss;
            batches += 1;
        }
        model.epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok(model)
}

fn view_for_kind(kind: GraphKind) -> ViewId {
    match kind {
        GraphKind::Alexa => ViewId::Alexa,
        GraphKind::Hyperlink => ViewId::Hyperlink,
        GraphKind::Llm => ViewId::Llm,
    }
}

/// Inference: full-graph forward pass with dropout disabled and full
/// neighborhoods, then row extraction for the requested outlets. Outlets
/// absent from the graph get a zero vector and are listed in the report.
pub fn embed_outlets(
    model: &GnnModel,
    g: &MediaGraph,
    outlets: &[String],
) -> Result<(EmbeddingTable, Vec<String>)> {
    let features = node_feature_matrix(g, &FeatureSpec::Auto);
    embed_with_features(model, g, &features, outlets)
}

/// Inference with an explicit feature matrix (must match training).
pub fn embed_with_features(
    model: &GnnModel,
    g: &MediaGraph,
    features: &Tensor2,
    outlets: &[String],
) -> Result<(EmbeddingTable, Vec<String>)> {
    let (order, lists) = g.adjacency();
    let adj = Adjacency { lists };
    let sampled = GnnModel::full_neighborhoods(&adj);
    let fwd = model.forward(features, &adj, &sampled, None)?;
    let index: std::collections::BTreeMap<&str, usize> =
        order.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut table = EmbeddingTable::new(view_for_kind(g.kind), model.cfg.out_dim);
    let mut missing = Vec::new();
    for outlet in outlets {
        match index.get(outlet.as_str()) {
            Some(&i) => {
                table
                    .rows
                    .insert(outlet.clone(), fwd.out.row(i).to_vec());
            }
            None => {
                missing.push(outlet.clone());
                table.rows.insert(outlet.clone(), vec![0.0; model.cfg.out_dim]);
            }
        }
    }
    Ok((table, missing))
}

/// Save a model in the shared checkpoint format: JSON header with the
/// config and shapes, flat parameter array in `params()` order.
pub fn save_gnn(path: &Path, model: &GnnModel) -> Result<()> {
    let header = json!({
        "model": "gnn",
        "config": model.cfg,
        "input_dim": model.input_dim,
    });
    let params: Vec<f64> = model.params().concat();
    save_checkpoint(path, header, params)?;
    Ok(())
}

pub fn load_gnn(path: &Path) -> Result<GnnModel> {
    let ck = load_checkpoint(path)?;
    if ck.header.get("model").and_then(|v| v.as_str()) != Some("gnn") {
        return Err(GnnError::Checkpoint("not a gnn checkpoint".into()));
    }
    let cfg: GnnConfig = serde_json::from_value(ck.header["config"].clone())
        .map_err(|e| GnnError::Checkpoint(format!("bad config header: {e}")))?;
    let input_dim = ck.header["input_dim"]
        .as_u64()
        .ok_or_else(|| GnnError::Checkpoint("missing input_dim".into()))?
        as usize;
    let mut model = GnnModel::init(&cfg, input_dim);
    let expected = model.param_count();
    if ck.params.len() != expected {
        return Err(GnnError::Checkpoint(format!(
            "checkpoint has {} params, model needs {expected}",
            ck.params.len()
        )));
    }
    let mut off = 0;
    for slice in model.params_mut() {
        slice.copy_from_slice(&ck.params[off..off + slice.len()]);
        off += slice.len();
    }
    Ok(model)
}
