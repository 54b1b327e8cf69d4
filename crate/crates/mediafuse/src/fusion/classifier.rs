use crate::core::LabelScale;
use crate::numkit::{softmax, Tensor2};

use super::{FusionError, Result};

/// Linear multiclass classifier trained with the Crammer-Singer hinge loss
/// by full-batch subgradient descent.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    pub weight: Tensor2, // classes x feature_dim
    pub bias: Vec<f64>,
    pub scale: LabelScale,
}

#[derive(Debug, Clone)]
pub struct LinearTrainConfig {
    /// Hard cap on epochs ("iterations").
    pub max_epochs: usize,
    /// Early stop once the largest parameter update in an epoch falls
    /// below this ("tolerance").
    pub tol: f64,
    pub lr: f64,
}

impl Default for LinearTrainConfig {
    fn default() -> Self {
        Self { max_epochs: 60, tol: 0.01, lr: 0.5 }
    }
}

impl LinearClassifier {
    pub fn zeros(feature_dim: usize, scale: LabelScale) -> Self {
        Self {
            weight: Tensor2::zeros(scale.len(), feature_dim),
            bias: vec![0.0; scale.len()],
            scale,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut m = self.weight.matvec(x)?;
        for (mi, b) in m.iter_mut().zip(&self.bias) {
            *mi += b;
        }
        Ok(m)
    }

    /// Argmax of the raw margins; ties break to the lowest ordinal index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let m = self.margins(x)?;
        let mut best = 0;
        for (i, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Class probabilities: softmax over the margins.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.margins(x)?))
    }

    /// Crammer-Singer hinge at `x`: `max(0, 1 + max_{c != y} m_c - m_y)`.
    /// Returns the loss and the margin gradient (both averaged by the
    /// caller over the batch).
    pub fn hinge_and_margin_grad(&self, x: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
        let m = self.margins(x)?;
        let mut rival = usize::MAX;
        for c in 0..m.len() {
            if c == y {
                continue;
            }
            if rival == usize::MAX || m[c] > m[rival] {
                rival = c;
            }
        }
        let mut g = vec![0.0; m.len()];
        let loss = (1.0 + m[rival] - m[y]).max(0.0);
        if loss > 0.0 {
            g[rival] = 1.0;
            g[y] = -1.0;
        }
        Ok((loss, g))
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

/// Train from zero-initialized weights. Stops early once the largest
/// parameter update in an epoch drops below `cfg.tol`; deterministic (the
/// full batch needs no shuffling).
pub fn train_linear_classifier(
    xs: &[Vec<f64>],
    ys: &[usize],
    scale: &LabelScale,
    cfg: &LinearTrainConfig,
) -> Result<LinearClassifier> {
    if xs.len() != ys.len() {
        return Err(FusionError::Shape(format!("{} samples vs {} labels", xs.len(), ys.len())));
    }
    if xs.len() < scale.len() {
        return Err(FusionError::Shape(format!(
            "{} samples for {} classes",
            xs.len(),
            scale.len()
        )));
    }
    let distinct = {
        let mut seen = vec![false; scale.len()];
        for &y in ys {
            if y >= scale.len() {
                return Err(FusionError::Shape(format!("label {y} out of range")));
            }
            seen[y] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(FusionError::DegenerateLabels);
    }

    let dim = xs[0].len();
    let mut clf = LinearClassifier::zeros(dim, scale.clone());
    let n = xs.len() as f64;
    for _ in 0..cfg.max_epochs {
        let mut g_w = Tensor2::zeros(scale.len(), dim);
        let mut g_b = vec![0.0; scale.len()];
        for (x, &y) in xs.iter().zip(ys) {
            if x.len() != dim {
                return Err(FusionError::Shape(format!(
                    "feature dim {} vs expected {dim}",
                    x.len()
                )));
            }
            let (_, g_m) = clf.hinge_and_margin_grad(x, y)?;
            for (c, &g) in g_m.iter().enumerate() {
                if g != 0.0 {
                    for (wi, xi) in g_w.row_mut(c).iter_mut().zip(x) {
                        *wi += g * xi;
                    }
                    g_b[c] += g;
                }
            }
        }
        let step = cfg.lr / n;
        let mut max_update: f64 = 0.0;
        for c in 0..scale.len() {
            for (w, g) in clf.weight.row_mut(c).iter_mut().zip(g_w.row(c)) {
                let delta = step * g;
                *w -= delta;
                max_update = max_update.max(delta.abs());
            }
            let delta = step * g_b[c];
            clf.bias[c] -= delta;
            max_update = max_update.max(delta.abs());
        }
        if max_update < cfg.tol {
            break;
        }
    }
    Ok(clf)
}
