//! Alignment kernels: weighted SFT loss, reward-model ranking loss, the
//! clipped PPO objective with best-of-n selection, rotary-embedding
//! frequencies, and a micro autoregressive model that carries the full
//! analytic gradient path for finite-difference verification.

mod gradcheck;
mod losses;
mod micro;
mod rope;

pub use gradcheck::{grad_check, pick_check_indices, GradCheckError};
pub use losses::{
    pairs_from_ranking, ppo_objective, ppo_objective_with_grad, ranking_loss, ranking_loss_with_grad,
    select_best_of_n, sft_batch_loss, sft_loss, Activation, AlignError, PairOrigin, PpoConfig,
    PreferencePair, PreferenceRanker, RankRequest, RankResponse, RewardHead, SftSample, SftSource,
    ALPHA_EXPERT, ALPHA_GENERAL,
};
pub use micro::{MicroModel, MicroModelConfig};
pub use rope::rope_frequencies;
