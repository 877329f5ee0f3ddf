//! Loss kernels for supervised fine-tuning, reward modeling, and PPO.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-token loss weight for expert-domain samples.
pub const ALPHA_EXPERT: f64 = 1.0;
/// Per-token loss weight for general-instruction samples.
pub const ALPHA_GENERAL: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("loss mask selects no output tokens")]
    EmptyOutputMask,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("head_dim must be even, got {0}")]
    OddHeadDim(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Origin of a fine-tuning sample; decides the loss weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SftSource {
    #[serde(rename = "D_exp")]
    Expert,
    #[serde(rename = "D_gen")]
    General,
}

impl SftSource {
    pub fn alpha(self) -> f64 {
        match self {
            SftSource::Expert => ALPHA_EXPERT,
            SftSource::General => ALPHA_GENERAL,
        }
    }
}

/// One fine-tuning sample: token ids with a 0/1 mask marking the output
/// segment (instruction tokens carry mask 0 and contribute no loss).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSample {
    pub token_ids: Vec<u32>,
    pub loss_mask: Vec<u8>,
    pub source: SftSource,
}

impl SftSample {
    pub fn new(token_ids: Vec<u32>, loss_mask: Vec<u8>, source: SftSource) -> Result<Self, AlignError> {
        let sample = Self { token_ids, loss_mask, source };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if self.token_ids.len() != self.loss_mask.len() {
            return Err(AlignError::LengthMismatch(format!(
                "token_ids {} vs loss_mask {}",
                self.token_ids.len(),
                self.loss_mask.len()
            )));
        }
        if !self.loss_mask.iter().all(|&m| m <= 1) {
            return Err(AlignError::Invalid("loss_mask entries must be 0 or 1".to_string()));
        }
        if !self.loss_mask.contains(&1) {
            return Err(AlignError::EmptyOutputMask);
        }
        Ok(())
    }

    /// The per-sample loss weight implied by the source.
    pub fn weight_alpha(&self) -> f64 {
        self.source.alpha()
    }
}

/// Weighted next-token loss for one sample. `logprobs[i]` is the model's
/// log-probability of the realized token `token_ids[i + 1]`, so it must
/// have length `token_ids.len() - 1`. Masked-out positions contribute
/// exactly zero regardless of their log-probability.
pub fn sft_loss(logprobs: &[f64], sample: &SftSample) -> Result<f64, AlignError> {
    sample.validate()?;
    if logprobs.len() + 1 != sample.token_ids.len() {
        return Err(AlignError::LengthMismatch(format!(
            "expected {} logprobs for {} tokens, got {}",
            sample.token_ids.len() - 1,
            sample.token_ids.len(),
            logprobs.len()
        )));
    }
    // Targets are positions 1..len; the mask entry for a target applies to
    // the logprob predicting it.
    if !sample.loss_mask[1..].contains(&1) {
        return Err(AlignError::EmptyOutputMask);
    }
    let mut sum = 0.0;
    for (lp, &mask) in logprobs.iter().zip(&sample.loss_mask[1..]) {
        if mask == 1 {
            if !lp.is_finite() {
                return Err(AlignError::NonFinite("logprobs"));
            }
            sum -= lp;
        }
    }
    Ok(sample.weight_alpha() * sum)
}

/// Batch objective: mean over samples of the per-sample weighted token sum.
/// Token sums are not length-normalized; the weight enters per sample.
pub fn sft_batch_loss(items: &[(&[f64], &SftSample)]) -> Result<f64, AlignError> {
    if items.is_empty() {
        return Err(AlignError::Invalid("empty batch".to_string()));
    }
    let mut total = 0.0;
    for (logprobs, sample) in items {
        total += sft_loss(logprobs, sample)?;
    }
    Ok(total / items.len() as f64)
}

/// Numerically stable ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary ranking loss `-ln(sigmoid(r_chosen - r_rejected))`, computed as
/// softplus of the negated margin. Strictly decreasing in the margin and
/// positive for any finite margin.
pub fn ranking_loss(r_chosen: f64, r_rejected: f64) -> Result<f64, AlignError> {
    if !r_chosen.is_finite() || !r_rejected.is_finite() {
        return Err(AlignError::NonFinite("reward scores"));
    }
    Ok(softplus(-(r_chosen - r_rejected)))
}

/// Ranking loss plus its gradient with respect to the two scores.
pub fn ranking_loss_with_grad(r_chosen: f64, r_rejected: f64) -> Result<(f64, f64, f64), AlignError> {
    let loss = ranking_loss(r_chosen, r_rejected)?;
    let d_margin = -sigmoid(-(r_chosen - r_rejected));
    Ok((loss, d_margin, -d_margin))
}

/// Nonlinearity between the reward head's two affine layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Bounded activation keeps the score scale stable.
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Two affine layers mapping the end-token hidden state to a scalar score.
/// Parameters are a flat vector laid out as [w1 (mid x in), b1 (mid),
/// w2 (mid), b2 (1)] so gradients line up index-for-index.
#[derive(Debug, Clone)]
pub struct RewardHead {
    pub in_dim: usize,
    pub mid_dim: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl RewardHead {
    pub fn param_count(in_dim: usize, mid_dim: usize) -> usize {
        mid_dim * in_dim + mid_dim + mid_dim + 1
    }

    pub fn new(in_dim: usize, mid_dim: usize, activation: Activation, params: Vec<f64>) -> Result<Self, AlignError> {
        if params.len() != Self::param_count(in_dim, mid_dim) {
            return Err(AlignError::DimensionMismatch(format!(
                "expected {} params, got {}",
                Self::param_count(in_dim, mid_dim),
                params.len()
            )));
        }
        Ok(Self { in_dim, mid_dim, activation, params })
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let w1_len = self.mid_dim * self.in_dim;
        let (w1, rest) = self.params.split_at(w1_len);
        let (b1, rest) = rest.split_at(self.mid_dim);
        let (w2, rest) = rest.split_at(self.mid_dim);
        (w1, b1, w2, rest[0])
    }

    /// Scalar score for the end-token hidden state.
    pub fn score(&self, hidden: &[f64]) -> Result<f64, AlignError> {
        if hidden.len() != self.in_dim {
            return Err(AlignError::DimensionMismatch(format!(
                "hidden dim {} vs head in_dim {}",
                hidden.len(),
                self.in_dim
            )));
        }
        let (w1, b1, w2, b2) = self.split();
        let mut score = b2;
        for i in 0..self.mid_dim {
            let mut z = b1[i];
            for (w, h) in w1[i * self.in_dim..(i + 1) * self.in_dim].iter().zip(hidden) {
                z += w * h;
            }
            score += w2[i] * self.activation.apply(z);
        }
        if !score.is_finite() {
            return Err(AlignError::NonFinite("reward score"));
        }
        Ok(score)
    }

    /// Accumulates d(score)/d(params) scaled by `upstream` into `grad`.
    fn accumulate_grad(&self, hidden: &[f64], upstream: f64, grad: &mut [f64]) {
        let (w1, b1, w2, _) = self.split();
        let w1_len = self.mid_dim * self.in_dim;
        for i in 0..self.mid_dim {
            let mut z = b1[i];
            for (w, h) in w1[i * self.in_dim..(i + 1) * self.in_dim].iter().zip(hidden) {
                z += w * h;
            }
            let a = self.activation.apply(z);
            let da = upstream * w2[i];
            let dz = da * self.activation.derivative_from_output(a);
            for (g, h) in grad[i * self.in_dim..(i + 1) * self.in_dim].iter_mut().zip(hidden) {
                *g += dz * h;
            }
            grad[w1_len + i] += dz;
            grad[w1_len + self.mid_dim + i] += upstream * a;
        }
        grad[w1_len + 2 * self.mid_dim] += upstream;
    }

    /// Ranking loss of two hidden states through this head, with the
    /// analytic gradient over the head parameters.
    pub fn ranking_loss_with_param_grad(
        &self,
        hidden_chosen: &[f64],
        hidden_rejected: &[f64],
    ) -> Result<(f64, Vec<f64>), AlignError> {
        let s_c = self.score(hidden_chosen)?;
        let s_r = self.score(hidden_rejected)?;
        let (loss, d_chosen, d_rejected) = ranking_loss_with_grad(s_c, s_r)?;
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad(hidden_chosen, d_chosen, &mut grad);
        self.accumulate_grad(hidden_rejected, d_rejected, &mut grad);
        Ok((loss, grad))
    }
}

/// Index of the highest-reward candidate; ties go to the earliest.
pub fn select_best_of_n<T>(candidates: &[(T, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, reward)) in candidates.iter().enumerate() {
        match best {
            Some((_, r)) if *reward <= r => {}
            _ => best = Some((i, *reward)),
        }
    }
    best.map(|(i, _)| i)
}

fn default_kl() -> f64 {
    0.01
}

fn default_candidates() -> usize {
    4
}

fn default_clip() -> f64 {
    0.2
}

fn default_top_p() -> f64 {
    0.9
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.95
}

fn default_adam_eps() -> f64 {
    1e-5
}

fn default_actor_peak_lr() -> f64 {
    1e-6
}

fn default_actor_final_lr() -> f64 {
    1e-7
}

/// PPO hyperparameters. Defaults follow the reference recipe: best-of-4
/// candidate selection, KL coefficient 0.01, clip 0.2, top-p 0.9, AdamW
/// betas (0.9, 0.95) with eps 1e-5, actor LR 1e-6 decaying to 1e-7.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoConfig {
    #[serde(default = "default_kl")]
    pub kl_coeff: f64,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default = "default_clip")]
    pub clip_epsilon: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "default_actor_peak_lr")]
    pub actor_peak_lr: f64,
    #[serde(default = "default_actor_final_lr")]
    pub actor_final_lr: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            kl_coeff: default_kl(),
            n_candidates: default_candidates(),
            clip_epsilon: default_clip(),
            top_p: default_top_p(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_adam_eps(),
            actor_peak_lr: default_actor_peak_lr(),
            actor_final_lr: default_actor_final_lr(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if self.kl_coeff < 0.0 {
            return Err(AlignError::Invalid("kl_coeff must be >= 0".to_string()));
        }
        if self.n_candidates < 1 {
            return Err(AlignError::Invalid("n_candidates must be >= 1".to_string()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(AlignError::Invalid("top_p must be in (0, 1]".to_string()));
        }
        if self.clip_epsilon <= 0.0 {
            return Err(AlignError::Invalid("clip_epsilon must be > 0".to_string()));
        }
        Ok(())
    }
}

/// Clipped PPO objective with a token-level KL penalty to the reference
/// policy, averaged over generated-token positions:
/// mean(-min(r A, clip(r, 1 - eps, 1 + eps) A) + kl (logp_new - logp_ref))
/// with r = exp(logp_new - logp_old).
pub fn ppo_objective(
    logp_new: &[f64],
    logp_old: &[f64],
    advantage: &[f64],
    logp_ref: &[f64],
    cfg: &PpoConfig,
) -> Result<f64, AlignError> {
    ppo_objective_with_grad(logp_new, logp_old, advantage, logp_ref, cfg).map(|(v, _)| v)
}

/// PPO objective plus its gradient with respect to `logp_new`.
pub fn ppo_objective_with_grad(
    logp_new: &[f64],
    logp_old: &[f64],
    advantage: &[f64],
    logp_ref: &[f64],
    cfg: &PpoConfig,
) -> Result<(f64, Vec<f64>), AlignError> {
    let n = logp_new.len();
    if n == 0 {
        return Err(AlignError::Invalid("empty position arrays".to_string()));
    }
    if logp_old.len() != n || advantage.len() != n || logp_ref.len() != n {
        return Err(AlignError::LengthMismatch(
            "logp_new, logp_old, advantage, logp_ref must align".to_string(),
        ));
    }
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    let lo = 1.0 - cfg.clip_epsilon;
    let hi = 1.0 + cfg.clip_epsilon;
    for i in 0..n {
        let ratio = (logp_new[i] - logp_old[i]).exp();
        if !ratio.is_finite() {
            return Err(AlignError::NonFinite("probability ratio"));
        }
        let clipped = ratio.clamp(lo, hi);
        let unclipped_term = ratio * advantage[i];
        let clipped_term = clipped * advantage[i];
        let surrogate = unclipped_term.min(clipped_term);
        let kl_term = cfg.kl_coeff * (logp_new[i] - logp_ref[i]);
        let term = -surrogate + kl_term;
        if !term.is_finite() {
            return Err(AlignError::NonFinite("objective term"));
        }
        total += term;

        // d surrogate / d logp_new: the active branch's derivative. The
        // clipped branch is constant where the clamp saturates.
        let unclipped_active = unclipped_term <= clipped_term || (lo..=hi).contains(&ratio);
        let d_surrogate = if unclipped_active { ratio * advantage[i] } else { 0.0 };
        grad[i] = (-d_surrogate + cfg.kl_coeff) / n as f64;
    }
    Ok((total / n as f64, grad))
}

/// Where a preference pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrigin {
    Human,
    Ai,
}

/// One preference comparison: the chosen and rejected responses to a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub origin: PairOrigin,
}

impl PreferencePair {
    pub fn validate(&self) -> Result<(), AlignError> {
        if self.chosen == self.rejected {
            return Err(AlignError::Invalid("chosen and rejected responses are identical".to_string()));
        }
        Ok(())
    }
}

/// Wire request for a ranking call: a prompt and its candidate responses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRequest {
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Wire response: response indices ordered best to worst.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankResponse {
    pub ranking: Vec<usize>,
}

/// Ranking client: given a prompt and candidate responses, returns response
/// indices ordered best to worst.
pub trait PreferenceRanker {
    fn rank(&self, prompt: &str, responses: &[String]) -> Result<Vec<usize>, String>;
}

/// Expands a best-to-worst ranking into all ordered preference pairs.
pub fn pairs_from_ranking(
    prompt: &str,
    responses: &[String],
    ranking: &[usize],
    origin: PairOrigin,
) -> Result<Vec<PreferencePair>, AlignError> {
    if ranking.len() != responses.len() {
        return Err(AlignError::LengthMismatch("ranking must cover every response".to_string()));
    }
    if ranking.iter().any(|&i| i >= responses.len()) {
        return Err(AlignError::Invalid("ranking index out of range".to_string()));
    }
    let mut pairs = Vec::new();
    for (better_pos, &better) in ranking.iter().enumerate() {
        for &worse in &ranking[better_pos + 1..] {
            if responses[better] == responses[worse] {
                continue;
            }
            pairs.push(PreferencePair {
                prompt: prompt.to_string(),
                chosen: responses[better].clone(),
                rejected: responses[worse].clone(),
                origin,
            });
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn sample(mask: &[u8], source: SftSource) -> SftSample {
        SftSample::new((0..mask.len() as u32).collect(), mask.to_vec(), source).unwrap()
    }

    #[test]
    fn sft_loss_three_output_tokens_general_weight() {
        // three output tokens at probability 1/2 each under the 0.1 weight
        let s = sample(&[0, 1, 1, 1], SftSource::General);
        let logprobs = vec![(0.5f64).ln(); 3];
        let loss = sft_loss(&logprobs, &s).unwrap();
        assert!((loss - 0.1 * 3.0 * LN2).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn sft_loss_expert_weight_is_unit() {
        let s = sample(&[0, 1, 1, 1], SftSource::Expert);
        let logprobs = vec![(0.5f64).ln(); 3];
        let loss = sft_loss(&logprobs, &s).unwrap();
        assert!((loss - 3.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_give_zero_loss() {
        let s = sample(&[0, 1, 1], SftSource::Expert);
        assert_eq!(sft_loss(&[0.0, 0.0], &s).unwrap(), 0.0);
    }

    #[test]
    fn masked_positions_contribute_exactly_nothing() {
        let s = sample(&[0, 1, 0, 1], SftSource::Expert);
        let base = sft_loss(&[-1.0, -999.0, -2.0], &s).unwrap();
        let perturbed = sft_loss(&[-1.0, 12345.0, -2.0], &s).unwrap();
        assert_eq!(base, perturbed);
    }

    #[test]
    fn all_zero_mask_is_rejected() {
        let err = SftSample::new(vec![1, 2, 3], vec![0, 0, 0], SftSource::Expert).unwrap_err();
        assert_eq!(err, AlignError::EmptyOutputMask);
        // mask only on position 0 selects no target either
        let s = SftSample { token_ids: vec![1, 2], loss_mask: vec![1, 0], source: SftSource::Expert };
        assert_eq!(sft_loss(&[-1.0], &s).unwrap_err(), AlignError::EmptyOutputMask);
    }

    #[test]
    fn batch_loss_is_mean_of_sample_losses() {
        let a = sample(&[0, 1], SftSource::Expert);
        let b = sample(&[0, 1], SftSource::General);
        let la = [(0.5f64).ln()];
        let lb = [(0.25f64).ln()];
        let batch = sft_batch_loss(&[(&la, &a), (&lb, &b)]).unwrap();
        let expected = (1.0 * LN2 + 0.1 * 2.0 * LN2) / 2.0;
        assert!((batch - expected).abs() < 1e-12);
    }

    #[test]
    fn ranking_loss_at_zero_margin_is_ln_two() {
        let loss = ranking_loss(3.0, 3.0).unwrap();
        assert!((loss - LN2).abs() < 1e-15);
    }

    #[test]
    fn ranking_loss_closed_form_points() {
        let at = |delta: f64| ranking_loss(delta, 0.0).unwrap();
        assert!((at(2.0) - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-15);
        assert!((at(2.0) - 0.126928).abs() < 1e-6);
        assert!((at(-2.0) - 2.126928).abs() < 1e-6);
    }

    #[test]
    fn ranking_loss_reflection_identity() {
        // L(-d) = L(d) + d
        for i in 0..=400 {
            let d = -10.0 + i as f64 * 0.05;
            let l = ranking_loss(d, 0.0).unwrap();
            let l_neg = ranking_loss(-d, 0.0).unwrap();
            assert!((l_neg - (l + d)).abs() < 1e-9, "identity failed at {d}");
        }
    }

    #[test]
    fn ranking_loss_pair_sum_bound() {
        for (a, b) in [(0.0, 0.0), (1.5, -0.5), (3.0, 3.0), (-2.0, 4.0)] {
            let fwd = ranking_loss(a, b).unwrap();
            let rev = ranking_loss(b, a).unwrap();
            assert!(fwd + rev >= 2.0 * LN2 - 1e-12);
            if a == b {
                assert!((fwd + rev - 2.0 * LN2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranking_loss_rejects_non_finite() {
        assert!(ranking_loss(f64::NAN, 0.0).is_err());
        assert!(ranking_loss(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn reward_head_zero_weights_return_bias() {
        let mut params = vec![0.0; RewardHead::param_count(3, 2)];
        *params.last_mut().unwrap() = 0.75;
        let head = RewardHead::new(3, 2, Activation::Tanh, params).unwrap();
        assert_eq!(head.score(&[9.0, -4.0, 2.0]).unwrap(), 0.75);
    }

    #[test]
    fn identity_configured_head_passes_the_scalar_through() {
        // 1-dim head with unit weights and identity activation
        let head = RewardHead::new(1, 1, Activation::Identity, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(head.score(&[0.37]).unwrap(), 0.37);
    }

    #[test]
    fn head_rejects_dimension_mismatch() {
        let head = RewardHead::new(3, 2, Activation::Tanh, vec![0.0; RewardHead::param_count(3, 2)]).unwrap();
        assert!(matches!(head.score(&[1.0, 2.0]), Err(AlignError::DimensionMismatch(_))));
    }

    #[test]
    fn best_of_n_picks_argmax_with_earliest_tie() {
        let c: Vec<(&str, f64)> = vec![("a", 0.1), ("b", 0.9), ("c", 0.4), ("d", 0.2)];
        assert_eq!(select_best_of_n(&c), Some(1));
        let ties: Vec<(&str, f64)> = vec![("a", 0.5), ("b", 0.5), ("c", 0.5)];
        assert_eq!(select_best_of_n(&ties), Some(0));
        let single: Vec<(&str, f64)> = vec![("only", -3.0)];
        assert_eq!(select_best_of_n(&single), Some(0));
        let empty: Vec<(&str, f64)> = vec![];
        assert_eq!(select_best_of_n(&empty), None);
    }

    #[test]
    fn best_of_n_invariant_under_positive_affine_reward_maps() {
        let rewards = [0.3, -1.2, 2.5, 2.5, 0.0];
        let base: Vec<((), f64)> = rewards.iter().map(|&r| ((), r)).collect();
        let mapped: Vec<((), f64)> = rewards.iter().map(|&r| ((), 3.0 * r + 7.0)).collect();
        assert_eq!(select_best_of_n(&base), select_best_of_n(&mapped));
    }

    #[test]
    fn ppo_reduces_to_negative_mean_advantage_when_static() {
        let lp = [-1.0, -2.0];
        let adv = [1.0, 1.0];
        let cfg = PpoConfig::default();
        let v = ppo_objective(&lp, &lp, &adv, &lp, &cfg).unwrap();
        assert!((v - -1.0).abs() < 1e-12);
    }

    #[test]
    fn ppo_clips_large_ratios() {
        let cfg = PpoConfig::default();
        // ratio 1.5 with advantage 1 and eps 0.2 uses the clipped 1.2
        let logp_new = [1.5f64.ln()];
        let logp_old = [0.0];
        let v = ppo_objective(&logp_new, &logp_old, &[1.0], &logp_new, &cfg).unwrap();
        assert!((v - -1.2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn ppo_zero_advantage_zero_kl_is_zero() {
        let lp = [-0.5, -0.25, -1.5];
        let cfg = PpoConfig::default();
        let v = ppo_objective(&lp, &lp, &[0.0, 0.0, 0.0], &lp, &cfg).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ppo_with_zero_kl_and_unit_ratio_is_negative_mean_advantage() {
        let lp = [-1.0, -1.0, -1.0];
        let adv = [0.5, 1.5, 2.5];
        let cfg = PpoConfig { kl_coeff: 0.0, ..PpoConfig::default() };
        let v = ppo_objective(&lp, &lp, &adv, &lp, &cfg).unwrap();
        assert!((v - -1.5).abs() < 1e-12);
    }

    #[test]
    fn ppo_config_defaults_match_recipe() {
        let cfg = PpoConfig::default();
        assert_eq!(cfg.kl_coeff, 0.01);
        assert_eq!(cfg.n_candidates, 4);
        assert_eq!(cfg.clip_epsilon, 0.2);
        assert_eq!(cfg.top_p, 0.9);
        assert_eq!(cfg.adam_beta1, 0.9);
        assert_eq!(cfg.adam_beta2, 0.95);
        assert_eq!(cfg.adam_eps, 1e-5);
        assert_eq!(cfg.actor_peak_lr, 1e-6);
        assert_eq!(cfg.actor_final_lr, 1e-7);
        cfg.validate().unwrap();
    }

    #[test]
    fn alignment_wire_schemas_are_stable() {
        let s = sample(&[0, 1], SftSource::Expert);
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"token_ids":[0,1],"loss_mask":[0,1],"source":"D_exp"}"#
        );
        let s = sample(&[0, 1], SftSource::General);
        assert!(serde_json::to_string(&s).unwrap().contains("\"D_gen\""));

        let pair = PreferencePair {
            prompt: "p".into(),
            chosen: "c".into(),
            rejected: "r".into(),
            origin: PairOrigin::Human,
        };
        assert_eq!(
            serde_json::to_string(&pair).unwrap(),
            r#"{"prompt":"p","chosen":"c","rejected":"r","origin":"human"}"#
        );

        let req = RankRequest { prompt: "p".into(), responses: vec!["a".into(), "b".into()] };
        assert_eq!(serde_json::to_string(&req).unwrap(), r#"{"prompt":"p","responses":["a","b"]}"#);
        let resp: RankResponse = serde_json::from_str(r#"{"ranking":[1,0]}"#).unwrap();
        assert_eq!(resp.ranking, vec![1, 0]);
    }

    #[test]
    fn ranking_expansion_produces_all_ordered_pairs() {
        let responses = vec!["r0".to_string(), "r1".to_string(), "r2".to_string()];
        let pairs = pairs_from_ranking("p", &responses, &[2, 0, 1], PairOrigin::Ai).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].chosen, "r2");
        assert_eq!(pairs[0].rejected, "r0");
        for p in &pairs {
            p.validate().unwrap();
        }
    }
}
