use crate::numkit::{softmax, Rng, Tensor2};

use super::{FusionError, Result};

/// Single-head scaled dot-product attention block with `1/sqrt(d)` scaling.
///
/// `k_bias` shifts every key by a constant vector; softmax shift invariance
/// makes it inert on the output, and it stays out of the trainable
/// parameters. It exists so the invariance is directly testable.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    pub w_q: Tensor2,
    pub w_k: Tensor2,
    pub w_v: Tensor2,
    pub k_bias: Vec<f64>,
}

/// Cached forward state for one attention application.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    queries: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    /// softmax rows, one per query
    weights: Vec<Vec<f64>>,
    query_tokens: Vec<Vec<f64>>,
    context_tokens: Vec<Vec<f64>>,
    mean_pooled: bool,
}

/// Parameter gradients for a block, in `params()` order.
#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub w_q: Tensor2,
    pub w_k: Tensor2,
    pub w_v: Tensor2,
}

impl AttentionBlock {
    pub fn glorot(d: usize, rng: &mut Rng) -> Self {
        let a = (6.0 / (2 * d) as f64).sqrt();
        let init = |rng: &mut Rng| {
            Tensor2::from_vec_unchecked(d, d, (0..d * d).map(|_| rng.uniform_in(-a, a)).collect())
        };
        Self { w_q: init(rng), w_k: init(rng), w_v: init(rng), k_bias: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.w_q.rows()
    }

    fn check_dim(&self, token: &[f64]) -> Result<()> {
        if token.len() != self.dim() {
            return Err(FusionError::Shape(format!(
                "attention block dim {} but token has length {}",
                self.dim(),
                token.len()
            )));
        }
        Ok(())
    }

    /// Attend `query_tokens` over `context_tokens`; when `mean_pool` the
    /// attended rows are averaged into a single d-vector (self-attention
    /// fusion), otherwise there must be exactly one query.
    fn attend(
        &self,
        query_tokens: &[Vec<f64>],
        context_tokens: &[Vec<f64>],
        mean_pool: bool,
    ) -> Result<(Vec<f64>, AttentionCache)> {
        if context_tokens.is_empty() {
            return Err(FusionError::EmptyContext);
        }
        for t in query_tokens.iter().chain(context_tokens) {
            self.check_dim(t)?;
        }
        let d = self.dim();
        let scale = 1.0 / (d as f64).sqrt();
        let queries: Vec<Vec<f64>> = query_tokens
            .iter()
            .map(|t| self.w_q.matvec(t))
            .collect::<std::result::Result<_, _>>()?;
        let mut keys: Vec<Vec<f64>> = context_tokens
            .iter()
            .map(|t| self.w_k.matvec(t))
            .collect::<std::result::Result<_, _>>()?;
        for k in &mut keys {
            for (ki, b) in k.iter_mut().zip(&self.k_bias) {
                *ki += b;
            }
        }
        let values: Vec<Vec<f64>> = context_tokens
            .iter()
            .map(|t| self.w_v.matvec(t))
            .collect::<std::result::Result<_, _>>()?;

        let mut weights = Vec::with_capacity(queries.len());
        let mut attended = vec![vec![0.0; d]; queries.len()];
        for (qi, q) in queries.iter().enumerate() {
            let logits: Vec<f64> =
                keys.iter().map(|k| scale * crate::numkit::dot(q, k)).collect();
            let alpha = softmax(&logits);
            for (j, v) in values.iter().enumerate() {
                for (a, &vi) in attended[qi].iter_mut().zip(v) {
                    *a += alpha[j] * vi;
                }
            }
            weights.push(alpha);
        }
        let out = if mean_pool {
            let n = attended.len() as f64;
            let mut mean = vec![0.0; d];
            for row in &attended {
                for (m, &a) in mean.iter_mut().zip(row) {
                    *m += a / n;
                }
            }
            mean
        } else {
            debug_assert_eq!(attended.len(), 1);
            attended.pop().expect("one query")
        };
        Ok((
            out,
            AttentionCache {
                queries,
                keys,
                values,
                weights,
                query_tokens: query_tokens.to_vec(),
                context_tokens: context_tokens.to_vec(),
                mean_pooled: mean_pool,
            },
        ))
    }

    /// Self-attention over a token set; output is the mean of the attended
    /// tokens.
    pub fn self_attention(&self, tokens: &[Vec<f64>]) -> Result<(Vec<f64>, AttentionCache)> {
        self.attend(tokens, tokens, true)
    }

    /// One query attending over a context set.
    pub fn cross_attention(
        &self,
        query: &[f64],
        context: &[Vec<f64>],
    ) -> Result<(Vec<f64>, AttentionCache)> {
        self.attend(std::slice::from_ref(&query.to_vec()), context, false)
    }

    /// Backward pass. Returns block parameter gradients plus gradients for
    /// the query tokens and the context tokens (for self-attention, where
    /// the two coincide, the caller sums them).
    pub fn backward(
        &self,
        cache: &AttentionCache,
        g_out: &[f64],
    ) -> Result<(AttentionGrads, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let d = self.dim();
        self.check_dim(g_out)?;
        let scale = 1.0 / (d as f64).sqrt();
        let n_q = cache.queries.len();
        let n_c = cache.keys.len();

        // gradient w.r.t. each attended row
        let g_attended: Vec<Vec<f64>> = if cache.mean_pooled {
            let g: Vec<f64> = g_out.iter().map(|v| v / n_q as f64).collect();
            vec![g; n_q]
        } else {
            vec![g_out.to_vec()]
        };

        let mut g_values = vec![vec![0.0; d]; n_c];
        let mut g_queries = vec![vec![0.0; d]; n_q];
        let mut g_keys = vec![vec![0.0; d]; n_c];
        for qi in 0..n_q {
            let alpha = &cache.weights[qi];
            // dL/dalpha_j = g_attended . v_j
            let g_alpha: Vec<f64> = cache
                .values
                .iter()
                .map(|v| crate::numkit::dot(&g_attended[qi], v))
                .collect();
            // softmax backward
            let dot: f64 = alpha.iter().zip(&g_alpha).map(|(&a, &g)| a * g).sum();
            let g_logits: Vec<f64> =
                alpha.iter().zip(&g_alpha).map(|(&a, &g)| a * (g - dot)).collect();
            for j in 0..n_c {
                let a = alpha[j];
                for c in 0..d {
                    g_values[j][c] += a * g_attended[qi][c];
                }
                let gl = g_logits[j] * scale;
                for c in 0..d {
                    g_queries[qi][c] += gl * cache.keys[j][c];
                    g_keys[j][c] += gl * cache.queries[qi][c];
                }
            }
        }

        let mut grads = AttentionGrads {
            w_q: Tensor2::zeros(d, d),
            w_k: Tensor2::zeros(d, d),
            w_v: Tensor2::zeros(d, d),
        };
        let mut g_query_tokens = vec![vec![0.0; d]; n_q];
        let mut g_context_tokens = vec![vec![0.0; d]; n_c];
        for qi in 0..n_q {
            grads.w_q.add_outer(1.0, &g_queries[qi], &cache.query_tokens[qi])?;
            let back = self.w_q.matvec_t(&g_queries[qi])?;
            for (g, b) in g_query_tokens[qi].iter_mut().zip(back) {
                *g += b;
            }
        }
        for j in 0..n_c {
            grads.w_k.add_outer(1.0, &g_keys[j], &cache.context_tokens[j])?;
            grads.w_v.add_outer(1.0, &g_values[j], &cache.context_tokens[j])?;
            let back_k = self.w_k.matvec_t(&g_keys[j])?;
            let back_v = self.w_v.matvec_t(&g_values[j])?;
            for ((g, bk), bv) in g_context_tokens[j].iter_mut().zip(back_k).zip(back_v) {
                *g += bk + bv;
            }
        }
        Ok((grads, g_query_tokens, g_context_tokens))
    }

    /// Trainable parameters in documented order: W_q, W_k, W_v (row-major).
    pub fn params(&self) -> Vec<&[f64]> {
        vec![self.w_q.as_slice(), self.w_k.as_slice(), self.w_v.as_slice()]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_q.as_mut_slice(), self.w_k.as_mut_slice(), self.w_v.as_mut_slice()]
    }

    pub fn param_count(&self) -> usize {
        3 * self.dim() * self.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::grad_check;

    fn tokens(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect()
    }

    #[test]
    fn identical_tokens_pass_through_w_v() {
        let mut rng = Rng::new(1);
        let d = 4;
        let block = AttentionBlock::glorot(d, &mut rng);
        let t: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let toks = vec![t.clone(); 5];
        let (out, _) = block.self_attention(&toks).unwrap();
        let want = block.w_v.matvec(&t).unwrap();
        for (o, w) in out.iter().zip(&want) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_query_weights_give_mean_of_values() {
        let mut rng = Rng::new(2);
        let d = 3;
        let mut block = AttentionBlock::glorot(d, &mut rng);
        block.w_q.fill(0.0);
        let toks = tokens(&mut rng, 5, d);
        let (out, _) = block.self_attention(&toks).unwrap();
        let mut want = vec![0.0; d];
        for t in &toks {
            let v = block.w_v.matvec(t).unwrap();
            for (w, vi) in want.iter_mut().zip(v) {
                *w += vi / 5.0;
            }
        }
        for (o, w) in out.iter().zip(&want) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    /// Brute-force recomputation with explicit loops and naive softmax.
    fn brute_force_self(block: &AttentionBlock, toks: &[Vec<f64>]) -> Vec<f64> {
        let d = block.dim();
        let n = toks.len();
        let mv = |m: &Tensor2, x: &[f64]| -> Vec<f64> {
            (0..d).map(|r| (0..d).map(|c| m.at(r, c) * x[c]).sum()).collect()
        };
        let qs: Vec<Vec<f64>> = toks.iter().map(|t| mv(&block.w_q, t)).collect();
        let ks: Vec<Vec<f64>> = toks.iter().map(|t| mv(&block.w_k, t)).collect();
        let vs: Vec<Vec<f64>> = toks.iter().map(|t| mv(&block.w_v, t)).collect();
        let mut out = vec![0.0; d];
        for i in 0..n {
            let logits: Vec<f64> = (0..n)
                .map(|j| {
                    (0..d).map(|c| qs[i][c] * ks[j][c]).sum::<f64>() / (d as f64).sqrt()
                })
                .collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..n {
                for c in 0..d {
                    out[c] += exps[j] / z * vs[j][c] / n as f64;
                }
            }
        }
        out
    }

    #[test]
    fn random_case_matches_brute_force() {
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let d = 2 + rng.below(6);
            let block = AttentionBlock::glorot(d, &mut rng);
            let toks = tokens(&mut rng, 5, d);
            let (out, _) = block.self_attention(&toks).unwrap();
            let want = brute_force_self(&block, &toks);
            for (o, w) in out.iter().zip(&want) {
                assert!((o - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn key_bias_shift_leaves_output_unchanged() {
        let mut rng = Rng::new(4);
        let d = 5;
        let mut block = AttentionBlock::glorot(d, &mut rng);
        let toks = tokens(&mut rng, 5, d);
        let (base, _) = block.self_attention(&toks).unwrap();
        block.k_bias = (0..d).map(|_| rng.normal()).collect();
        let (shifted, _) = block.self_attention(&toks).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cross_attention_single_context_is_w_v_token() {
        let mut rng = Rng::new(5);
        let d = 4;
        let block = AttentionBlock::glorot(d, &mut rng);
        let q: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let ctx = tokens(&mut rng, 1, d);
        let (out, _) = block.cross_attention(&q, &ctx).unwrap();
        let want = block.w_v.matvec(&ctx[0]).unwrap();
        for (o, w) in out.iter().zip(&want) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_context_is_an_error() {
        let mut rng = Rng::new(6);
        let block = AttentionBlock::glorot(3, &mut rng);
        assert!(matches!(
            block.cross_attention(&[1.0, 2.0, 3.0], &[]),
            Err(FusionError::EmptyContext)
        ));
    }

    #[test]
    fn attention_gradients_pass_finite_differences() {
        let mut rng = Rng::new(7);
        for trial in 0..10 {
            let d = 3;
            let block = AttentionBlock::glorot(d, &mut rng);
            let toks = tokens(&mut rng, 4, d);
            let probe: Vec<f64> = (0..d).map(|_| rng.normal()).collect();

            let (_, cache) = block.self_attention(&toks).unwrap();
            let (grads, g_q_tok, g_c_tok) = block.backward(&cache, &probe).unwrap();

            let flat: Vec<f64> = block.params().concat();
            let analytic: Vec<f64> = [
                grads.w_q.as_slice(),
                grads.w_k.as_slice(),
                grads.w_v.as_slice(),
            ]
            .concat();
            let toks2 = toks.clone();
            let probe2 = probe.clone();
            let f = move |p: &[f64]| {
                let mut b = AttentionBlock {
                    w_q: Tensor2::from_vec_unchecked(d, d, p[..d * d].to_vec()),
                    w_k: Tensor2::from_vec_unchecked(d, d, p[d * d..2 * d * d].to_vec()),
                    w_v: Tensor2::from_vec_unchecked(d, d, p[2 * d * d..].to_vec()),
                    k_bias: vec![0.0; d],
                };
                b.k_bias.fill(0.0);
                let (out, _) = b.self_attention(&toks2).map_err(|e| {
                    crate::numkit::NumKitError::Numeric(e.to_string())
                })?;
                Ok(crate::numkit::dot(&out, &probe2))
            };
            let err = grad_check(f, &flat, &analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "trial {trial}: rel error {err}");

            // token gradients: combine query-side and context-side
            let token_flat: Vec<f64> = toks.concat();
            let token_analytic: Vec<f64> = (0..toks.len())
                .flat_map(|i| {
                    g_q_tok[i]
                        .iter()
                        .zip(&g_c_tok[i])
                        .map(|(a, b)| a + b)
                        .collect::<Vec<f64>>()
                })
                .collect();
            let block2 = block.clone();
            let probe3 = probe.clone();
            let ft = move |p: &[f64]| {
                let toks: Vec<Vec<f64>> = p.chunks(d).map(|c| c.to_vec()).collect();
                let (out, _) = block2.self_attention(&toks).map_err(|e| {
                    crate::numkit::NumKitError::Numeric(e.to_string())
                })?;
                Ok(crate::numkit::dot(&out, &probe3))
            };
            let err = grad_check(ft, &token_flat, &token_analytic, 1e-5).unwrap();
            assert!(err < 1e-4, "trial {trial}: token rel error {err}");
        }
    }
}
