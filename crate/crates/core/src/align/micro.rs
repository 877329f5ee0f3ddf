//! A micro autoregressive transformer with hand-written backward pass.
//!
//! Small enough to finite-difference in milliseconds, complete enough to
//! exercise every kernel gradient end to end: token embeddings, one or two
//! causal attention blocks with rotary positions, a tanh MLP, and a tied or
//! untied output head. All parameters live in one flat f64 vector so
//! numeric checks can perturb single entries.

use crate::align::losses::{AlignError, SftSample};
use crate::align::rope::rope_frequencies;
use crate::util::DetRng;

#[derive(Debug, Clone)]
pub struct MicroModelConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub rope_base: f64,
    pub tied_output: bool,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for MicroModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 24,
            hidden: 12,
            n_heads: 2,
            n_blocks: 2,
            rope_base: 10_000.0,
            tied_output: false,
            init_scale: 0.25,
            seed: 0,
        }
    }
}

/// Offsets of each parameter group inside the flat vector.
#[derive(Debug, Clone)]
struct BlockOffsets {
    w_q: usize,
    w_k: usize,
    w_v: usize,
    w_o: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
pub struct MicroModel {
    cfg: MicroModelConfig,
    params: Vec<f64>,
    blocks: Vec<BlockOffsets>,
    w_out: Option<usize>,
    head_dim: usize,
    mlp_dim: usize,
    freqs: Vec<f64>,
}

/// y = W x for row-major W (out_dim x in_dim).
fn matvec(w: &[f64], x: &[f64], out_dim: usize, in_dim: usize) -> Vec<f64> {
    let mut y = vec![0.0; out_dim];
    for i in 0..out_dim {
        let row = &w[i * in_dim..(i + 1) * in_dim];
        y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    y
}

/// dx += W^T dy.
fn matvec_t_add(w: &[f64], dy: &[f64], out_dim: usize, in_dim: usize, dx: &mut [f64]) {
    for i in 0..out_dim {
        let row = &w[i * in_dim..(i + 1) * in_dim];
        let g = dy[i];
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// dW += dy (outer) x.
fn outer_add(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let in_dim = x.len();
    for (i, &g) in dy.iter().enumerate() {
        for (d, v) in dw[i * in_dim..(i + 1) * in_dim].iter_mut().zip(x) {
            *d += g * v;
        }
    }
}

struct BlockCache {
    h_in: Vec<Vec<f64>>,
    q_rot: Vec<Vec<f64>>,
    k_rot: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// attn[t][head] holds weights over positions 0..=t.
    attn: Vec<Vec<Vec<f64>>>,
    ctx: Vec<Vec<f64>>,
    h_mid: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

struct ForwardCache {
    blocks: Vec<BlockCache>,
    h_final: Vec<Vec<f64>>,
    logits: Vec<Vec<f64>>,
}

impl MicroModel {
    pub fn new(cfg: MicroModelConfig) -> Result<Self, AlignError> {
        if !cfg.hidden.is_multiple_of(cfg.n_heads) {
            return Err(AlignError::DimensionMismatch(format!(
                "hidden {} not divisible by n_heads {}",
                cfg.hidden, cfg.n_heads
            )));
        }
        if !(1..=2).contains(&cfg.n_blocks) {
            return Err(AlignError::Invalid("n_blocks must be 1 or 2".to_string()));
        }
        let head_dim = cfg.hidden / cfg.n_heads;
        let freqs = rope_frequencies(head_dim, cfg.rope_base)?;
        let mlp_dim = 2 * cfg.hidden;

        let h = cfg.hidden;
        let mut offset = cfg.vocab_size * h; // embedding first
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for _ in 0..cfg.n_blocks {
            let w_q = offset;
            let w_k = w_q + h * h;
            let w_v = w_k + h * h;
            let w_o = w_v + h * h;
            let w1 = w_o + h * h;
            let b1 = w1 + mlp_dim * h;
            let w2 = b1 + mlp_dim;
            let b2 = w2 + h * mlp_dim;
            offset = b2 + h;
            blocks.push(BlockOffsets { w_q, w_k, w_v, w_o, w1, b1, w2, b2 });
        }
        let w_out = if cfg.tied_output {
            None
        } else {
            let at = offset;
            offset += cfg.vocab_size * h;
            Some(at)
        };

        let mut rng = DetRng::new(cfg.seed);
        let params: Vec<f64> =
            (0..offset).map(|_| (rng.next_f64() * 2.0 - 1.0) * cfg.init_scale).collect();

        Ok(Self { cfg, params, blocks, w_out, head_dim, mlp_dim, freqs })
    }

    pub fn config(&self) -> &MicroModelConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), AlignError> {
        if params.len() != self.params.len() {
            return Err(AlignError::DimensionMismatch("parameter vector size".to_string()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(AlignError::NonFinite("parameters"));
        }
        self.params = params;
        Ok(())
    }

    fn embedding(&self, token: u32) -> &[f64] {
        let h = self.cfg.hidden;
        &self.params[token as usize * h..(token as usize + 1) * h]
    }

    fn output_weight(&self) -> &[f64] {
        match self.w_out {
            Some(at) => &self.params[at..at + self.cfg.vocab_size * self.cfg.hidden],
            None => &self.params[0..self.cfg.vocab_size * self.cfg.hidden],
        }
    }

    fn apply_rope(&self, vec: &mut [f64], pos: usize) {
        let d = self.head_dim;
        for head in 0..self.cfg.n_heads {
            let off = head * d;
            for (j, &freq) in self.freqs.iter().enumerate() {
                let theta = pos as f64 * freq;
                let (s, c) = theta.sin_cos();
                let x0 = vec[off + 2 * j];
                let x1 = vec[off + 2 * j + 1];
                vec[off + 2 * j] = c * x0 - s * x1;
                vec[off + 2 * j + 1] = s * x0 + c * x1;
            }
        }
    }

    fn apply_rope_transpose(&self, vec: &mut [f64], pos: usize) {
        let d = self.head_dim;
        for head in 0..self.cfg.n_heads {
            let off = head * d;
            for (j, &freq) in self.freqs.iter().enumerate() {
                let theta = pos as f64 * freq;
                let (s, c) = theta.sin_cos();
                let g0 = vec[off + 2 * j];
                let g1 = vec[off + 2 * j + 1];
                vec[off + 2 * j] = c * g0 + s * g1;
                vec[off + 2 * j + 1] = -s * g0 + c * g1;
            }
        }
    }

    fn forward(&self, tokens: &[u32]) -> Result<ForwardCache, AlignError> {
        if tokens.is_empty() {
            return Err(AlignError::Invalid("empty token sequence".to_string()));
        }
        if tokens.iter().any(|&t| t as usize >= self.cfg.vocab_size) {
            return Err(AlignError::Invalid("token id out of vocabulary".to_string()));
        }
        let t_len = tokens.len();
        let h = self.cfg.hidden;
        let d = self.head_dim;
        let scale = 1.0 / (d as f64).sqrt();

        let mut hs: Vec<Vec<f64>> = tokens.iter().map(|&t| self.embedding(t).to_vec()).collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());

        for offs in &self.blocks {
            let h_in = hs.clone();
            let w_q = &self.params[offs.w_q..offs.w_q + h * h];
            let w_k = &self.params[offs.w_k..offs.w_k + h * h];
            let w_v = &self.params[offs.w_v..offs.w_v + h * h];
            let w_o = &self.params[offs.w_o..offs.w_o + h * h];

            let mut q_rot = Vec::with_capacity(t_len);
            let mut k_rot = Vec::with_capacity(t_len);
            let mut v_all = Vec::with_capacity(t_len);
            for (pos, x) in h_in.iter().enumerate() {
                let mut q = matvec(w_q, x, h, h);
                let mut k = matvec(w_k, x, h, h);
                self.apply_rope(&mut q, pos);
                self.apply_rope(&mut k, pos);
                q_rot.push(q);
                k_rot.push(k);
                v_all.push(matvec(w_v, x, h, h));
            }

            let mut attn = Vec::with_capacity(t_len);
            let mut ctx_all = Vec::with_capacity(t_len);
            #[allow(clippy::needless_range_loop)]
            for t in 0..t_len {
                let mut per_head = Vec::with_capacity(self.cfg.n_heads);
                let mut ctx = vec![0.0; h];
                for head in 0..self.cfg.n_heads {
                    let off = head * d;
                    let mut scores = Vec::with_capacity(t + 1);
                    for u in 0..=t {
                        let dot: f64 = q_rot[t][off..off + d]
                            .iter()
                            .zip(&k_rot[u][off..off + d])
                            .map(|(a, b)| a * b)
                            .sum();
                        scores.push(dot * scale);
                    }
                    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                    let z: f64 = weights.iter().sum();
                    for w in &mut weights {
                        *w /= z;
                    }
                    for (u, &w) in weights.iter().enumerate() {
                        for j in 0..d {
                            ctx[off + j] += w * v_all[u][off + j];
                        }
                    }
                    per_head.push(weights);
                }
                attn.push(per_head);
                ctx_all.push(ctx);
            }

            let mut h_mid = Vec::with_capacity(t_len);
            for t in 0..t_len {
                let attn_out = matvec(w_o, &ctx_all[t], h, h);
                let mut x = h_in[t].clone();
                for (a, b) in x.iter_mut().zip(&attn_out) {
                    *a += b;
                }
                h_mid.push(x);
            }

            let w1 = &self.params[offs.w1..offs.w1 + self.mlp_dim * h];
            let b1 = &self.params[offs.b1..offs.b1 + self.mlp_dim];
            let w2 = &self.params[offs.w2..offs.w2 + h * self.mlp_dim];
            let b2 = &self.params[offs.b2..offs.b2 + h];
            let mut act_all = Vec::with_capacity(t_len);
            let mut h_out = Vec::with_capacity(t_len);
            for x in &h_mid {
                let mut z1 = matvec(w1, x, self.mlp_dim, h);
                for (z, b) in z1.iter_mut().zip(b1) {
                    *z += b;
                }
                let act: Vec<f64> = z1.iter().map(|z| z.tanh()).collect();
                let mut m = matvec(w2, &act, h, self.mlp_dim);
                for (v, b) in m.iter_mut().zip(b2) {
                    *v += b;
                }
                let mut out = x.clone();
                for (a, b) in out.iter_mut().zip(&m) {
                    *a += b;
                }
                act_all.push(act);
                h_out.push(out);
            }

            blocks.push(BlockCache {
                h_in,
                q_rot,
                k_rot,
                v: v_all,
                attn,
                ctx: ctx_all,
                h_mid,
                act: act_all,
            });
            hs = h_out;
        }

        let w_out = self.output_weight();
        let logits: Vec<Vec<f64>> =
            hs.iter().map(|x| matvec(w_out, x, self.cfg.vocab_size, h)).collect();
        for row in &logits {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AlignError::NonFinite("logits"));
            }
        }
        Ok(ForwardCache { blocks, h_final: hs, logits })
    }

    /// Log-probability of each realized next token: entry `t` scores
    /// `tokens[t + 1]` given the prefix through `t`.
    pub fn forward_logprobs(&self, tokens: &[u32]) -> Result<Vec<f64>, AlignError> {
        let cache = self.forward(tokens)?;
        Ok((0..tokens.len() - 1)
            .map(|t| log_softmax_at(&cache.logits[t], tokens[t + 1] as usize))
            .collect())
    }

    /// Weighted next-token loss `sum_t coeffs[t] * -logprob_t` and its full
    /// analytic gradient over the flat parameter vector.
    pub fn loss_and_grad(&self, tokens: &[u32], coeffs: &[f64]) -> Result<(f64, Vec<f64>), AlignError> {
        if coeffs.len() + 1 != tokens.len() {
            return Err(AlignError::LengthMismatch(format!(
                "need {} coefficients for {} tokens",
                tokens.len() - 1,
                tokens.len()
            )));
        }
        let cache = self.forward(tokens)?;
        let t_len = tokens.len();
        let h = self.cfg.hidden;
        let v_size = self.cfg.vocab_size;
        let d = self.head_dim;
        let scale = 1.0 / (d as f64).sqrt();

        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        let mut dh: Vec<Vec<f64>> = vec![vec![0.0; h]; t_len];

        // Output head and cross-entropy backward.
        let w_out = self.output_weight().to_vec();
        let w_out_grad_base = self.w_out.unwrap_or(0);
        for (t, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let target = tokens[t + 1] as usize;
            let probs = softmax(&cache.logits[t]);
            loss += c * -(probs[target].ln());
            let mut dlogits = probs;
            for p in &mut dlogits {
                *p *= c;
            }
            dlogits[target] -= c;
            outer_add(
                &mut grad[w_out_grad_base..w_out_grad_base + v_size * h],
                &dlogits,
                &cache.h_final[t],
            );
            matvec_t_add(&w_out, &dlogits, v_size, h, &mut dh[t]);
        }
        if !loss.is_finite() {
            return Err(AlignError::NonFinite("loss"));
        }

        // Blocks in reverse.
        for (offs, cache_b) in self.blocks.iter().zip(&cache.blocks).rev() {
            let w1 = self.params[offs.w1..offs.w1 + self.mlp_dim * h].to_vec();
            let w2 = self.params[offs.w2..offs.w2 + h * self.mlp_dim].to_vec();
            let w_o = self.params[offs.w_o..offs.w_o + h * h].to_vec();
            let w_q = self.params[offs.w_q..offs.w_q + h * h].to_vec();
            let w_k = self.params[offs.w_k..offs.w_k + h * h].to_vec();
            let w_v = self.params[offs.w_v..offs.w_v + h * h].to_vec();

            // MLP backward; dh currently holds dL/d h_out.
            let mut dh_mid: Vec<Vec<f64>> = vec![vec![0.0; h]; t_len];
            for t in 0..t_len {
                let dm = &dh[t];
                for (g, v) in grad[offs.b2..offs.b2 + h].iter_mut().zip(dm) {
                    *g += v;
                }
                outer_add(&mut grad[offs.w2..offs.w2 + h * self.mlp_dim], dm, &cache_b.act[t]);
                let mut dact = vec![0.0; self.mlp_dim];
                matvec_t_add(&w2, dm, h, self.mlp_dim, &mut dact);
                let mut dz1 = dact;
                for (g, a) in dz1.iter_mut().zip(&cache_b.act[t]) {
                    *g *= 1.0 - a * a;
                }
                for (g, v) in grad[offs.b1..offs.b1 + self.mlp_dim].iter_mut().zip(&dz1) {
                    *g += v;
                }
                outer_add(&mut grad[offs.w1..offs.w1 + self.mlp_dim * h], &dz1, &cache_b.h_mid[t]);
                dh_mid[t].copy_from_slice(&dh[t]); // residual path
                matvec_t_add(&w1, &dz1, self.mlp_dim, h, &mut dh_mid[t]);
            }

            // Attention backward; dh_mid holds dL/d h_mid.
            let mut dh_in: Vec<Vec<f64>> = dh_mid.clone(); // residual path
            let mut dq_rot: Vec<Vec<f64>> = vec![vec![0.0; h]; t_len];
            let mut dk_rot: Vec<Vec<f64>> = vec![vec![0.0; h]; t_len];
            let mut dv: Vec<Vec<f64>> = vec![vec![0.0; h]; t_len];
            for t in 0..t_len {
                let dattn_out = &dh_mid[t];
                outer_add(&mut grad[offs.w_o..offs.w_o + h * h], dattn_out, &cache_b.ctx[t]);
                let mut dctx = vec![0.0; h];
                matvec_t_add(&w_o, dattn_out, h, h, &mut dctx);

                for head in 0..self.cfg.n_heads {
                    let off = head * d;
                    let weights = &cache_b.attn[t][head];
                    let mut da = vec![0.0; t + 1];
                    for u in 0..=t {
                        let mut s = 0.0;
                        for j in 0..d {
                            s += dctx[off + j] * cache_b.v[u][off + j];
                            dv[u][off + j] += weights[u] * dctx[off + j];
                        }
                        da[u] = s;
                    }
                    let common: f64 = weights.iter().zip(&da).map(|(w, g)| w * g).sum();
                    for u in 0..=t {
                        let ds = weights[u] * (da[u] - common) * scale;
                        for j in 0..d {
                            dq_rot[t][off + j] += ds * cache_b.k_rot[u][off + j];
                            dk_rot[u][off + j] += ds * cache_b.q_rot[t][off + j];
                        }
                    }
                }
            }

            for t in 0..t_len {
                self.apply_rope_transpose(&mut dq_rot[t], t);
                self.apply_rope_transpose(&mut dk_rot[t], t);
                outer_add(&mut grad[offs.w_q..offs.w_q + h * h], &dq_rot[t], &cache_b.h_in[t]);
                outer_add(&mut grad[offs.w_k..offs.w_k + h * h], &dk_rot[t], &cache_b.h_in[t]);
                outer_add(&mut grad[offs.w_v..offs.w_v + h * h], &dv[t], &cache_b.h_in[t]);
                matvec_t_add(&w_q, &dq_rot[t], h, h, &mut dh_in[t]);
                matvec_t_add(&w_k, &dk_rot[t], h, h, &mut dh_in[t]);
                matvec_t_add(&w_v, &dv[t], h, h, &mut dh_in[t]);
            }

            dh = dh_in;
        }

        // Embedding rows.
        for (t, &tok) in tokens.iter().enumerate() {
            let base = tok as usize * h;
            for (g, v) in grad[base..base + h].iter_mut().zip(&dh[t]) {
                *g += v;
            }
        }

        Ok((loss, grad))
    }

    /// SFT loss of one sample straight through the model: per-target
    /// coefficients are the sample weight on masked positions, zero
    /// elsewhere.
    pub fn sft_loss_and_grad(&self, sample: &SftSample) -> Result<(f64, Vec<f64>), AlignError> {
        sample.validate()?;
        if !sample.loss_mask[1..].contains(&1) {
            return Err(AlignError::EmptyOutputMask);
        }
        let alpha = sample.weight_alpha();
        let coeffs: Vec<f64> =
            sample.loss_mask[1..].iter().map(|&m| if m == 1 { alpha } else { 0.0 }).collect();
        self.loss_and_grad(&sample.token_ids, &coeffs)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    logits[index] - max - z.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::losses::{sft_loss, SftSource};

    fn model() -> MicroModel {
        MicroModel::new(MicroModelConfig::default()).unwrap()
    }

    #[test]
    fn logprobs_are_valid_probabilities() {
        let m = model();
        let tokens = [1u32, 5, 9, 2, 17, 3];
        let lps = m.forward_logprobs(&tokens).unwrap();
        assert_eq!(lps.len(), tokens.len() - 1);
        assert!(lps.iter().all(|lp| lp.is_finite() && *lp < 0.0));
    }

    #[test]
    fn model_logprobs_agree_with_sft_loss_kernel() {
        let m = model();
        let tokens = vec![1u32, 5, 9, 2, 17, 3];
        let mask = vec![0u8, 0, 1, 1, 1, 1];
        let sample = SftSample::new(tokens.clone(), mask, SftSource::General).unwrap();
        let lps = m.forward_logprobs(&tokens).unwrap();
        let via_kernel = sft_loss(&lps, &sample).unwrap();
        let (via_model, _) = m.sft_loss_and_grad(&sample).unwrap();
        assert!((via_kernel - via_model).abs() < 1e-12);
    }

    #[test]
    fn tied_output_shares_embedding_parameters() {
        let cfg = MicroModelConfig { tied_output: true, ..MicroModelConfig::default() };
        let m = MicroModel::new(cfg).unwrap();
        let untied = model();
        assert!(m.param_count() < untied.param_count());
        let lps = m.forward_logprobs(&[1, 2, 3, 4]).unwrap();
        assert!(lps.iter().all(|lp| lp.is_finite()));
    }

    #[test]
    fn out_of_vocab_token_is_an_error() {
        let m = model();
        assert!(m.forward_logprobs(&[1, 99]).is_err());
    }
}
