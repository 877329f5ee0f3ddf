//! Stage planning and deterministic schedule sampling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Category;
use crate::util::DetRng;

fn default_final_lr_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1,
    Stage2,
}

/// Configuration for one pretraining stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: Stage,
    pub token_budget: u64,
    pub context_length: usize,
    pub warmup_steps: u64,
    pub peak_lr: f64,
    #[serde(default = "default_final_lr_fraction")]
    pub final_lr_fraction: f64,
    pub category_proportions: BTreeMap<Category, f64>,
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        if self.token_budget == 0 {
            return Err(SchedulerError::InvalidConfig("token_budget must be > 0".to_string()));
        }
        if self.context_length == 0 || !self.context_length.is_power_of_two() {
            return Err(SchedulerError::InvalidConfig(format!(
                "context_length {} must be a positive power of two",
                self.context_length
            )));
        }
        let sum: f64 = self.category_proportions.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SchedulerError::InvalidConfig(format!(
                "category proportions sum to {sum}, expected 1"
            )));
        }
        if self.category_proportions.values().any(|&p| p < 0.0) {
            return Err(SchedulerError::InvalidConfig("negative category proportion".to_string()));
        }
        Ok(())
    }
}

/// Profile presets for planning. `Stage2Upweight` additionally checks that
/// stage 2 up-weights the knowledge-injection categories (Book, Chat, Exam,
/// Code, FileWrapper, ResearchReport) relative to stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleProfile {
    #[default]
    Custom,
    Stage2Upweight,
}

/// Categories whose share must grow in stage 2 under the
/// `stage2-upweight` profile.
pub const STAGE2_UPWEIGHTED: [Category; 6] = [
    Category::Book,
    Category::Chat,
    Category::Exam,
    Category::Code,
    Category::FileWrapper,
    Category::ResearchReport,
];

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("infeasible plan, deficient categories: {0:?}")]
    Infeasible(Vec<Category>),
    #[error("category {category} exhausted: needed {needed} tokens, had {available}")]
    CategoryExhausted {
        category: Category,
        needed: u64,
        available: u64,
    },
}

/// Planned per-stage, per-category token quotas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StagePlan {
    pub quotas: BTreeMap<Stage, BTreeMap<Category, u64>>,
    /// Categories violating the profile's ordinal shape, if any. A
    /// violation is a warning, not an error: the plan is still usable.
    pub profile_violations: Vec<Category>,
}

/// Computes `quota[stage][category] = round(budget * proportion)` and checks
/// feasibility against the available token totals. Under the
/// `stage2-upweight` profile, flags categories whose stage-2 share fails to
/// exceed their stage-1 share.
pub fn plan_stages(
    totals: &BTreeMap<Category, u64>,
    cfg1: &StageConfig,
    cfg2: &StageConfig,
    profile: ScheduleProfile,
) -> Result<StagePlan, SchedulerError> {
    cfg1.validate()?;
    cfg2.validate()?;

    let mut quotas: BTreeMap<Stage, BTreeMap<Category, u64>> = BTreeMap::new();
    for cfg in [cfg1, cfg2] {
        let stage_quota: BTreeMap<Category, u64> = cfg
            .category_proportions
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(&cat, &p)| (cat, (cfg.token_budget as f64 * p).round() as u64))
            .collect();
        quotas.insert(cfg.stage, stage_quota);
    }

    let mut deficient = Vec::new();
    for cat in Category::ALL {
        let needed: u64 = quotas.values().map(|q| q.get(&cat).copied().unwrap_or(0)).sum();
        let available = totals.get(&cat).copied().unwrap_or(0);
        if needed > available {
            deficient.push(cat);
        }
    }
    if !deficient.is_empty() {
        return Err(SchedulerError::Infeasible(deficient));
    }

    let mut profile_violations = Vec::new();
    if profile == ScheduleProfile::Stage2Upweight {
        for cat in STAGE2_UPWEIGHTED {
            let p1 = cfg1.category_proportions.get(&cat).copied().unwrap_or(0.0);
            let p2 = cfg2.category_proportions.get(&cat).copied().unwrap_or(0.0);
            if p2 <= p1 {
                profile_violations.push(cat);
            }
        }
    }

    Ok(StagePlan { quotas, profile_violations })
}

/// Read-only view of the corpus for sampling: per category, documents with
/// their token counts, in corpus order.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    pub by_category: BTreeMap<Category, Vec<(String, u64)>>,
}

impl CorpusIndex {
    pub fn insert(&mut self, category: Category, id: impl Into<String>, tokens: u64) {
        self.by_category.entry(category).or_default().push((id.into(), tokens));
    }
}

/// Draws documents per category until each quota is met, then shuffles the
/// combined stage stream. Deterministic for a given seed; a document is
/// never drawn twice within one stage. The realized per-category token
/// count lands within 1% of quota or the category is reported exhausted.
pub fn sample_schedule(
    quotas: &BTreeMap<Category, u64>,
    corpus: &CorpusIndex,
    seed: u64,
) -> Result<Vec<String>, SchedulerError> {
    let mut stream: Vec<String> = Vec::new();
    for (&category, &quota) in quotas {
        if quota == 0 {
            continue;
        }
        let pool = corpus.by_category.get(&category).cloned().unwrap_or_default();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        let mut rng = DetRng::new(crate::util::sub_seed(seed, &format!("sample:{category}")));
        rng.shuffle(&mut order);

        let mut realized = 0u64;
        let mut picked: Vec<(String, u64)> = Vec::new();
        for idx in order {
            if realized >= quota {
                break;
            }
            let (id, tokens) = &pool[idx];
            picked.push((id.clone(), *tokens));
            realized += tokens;
        }
        if realized < quota && (quota - realized) as f64 > 0.01 * quota as f64 {
            let available: u64 = pool.iter().map(|(_, t)| t).sum();
            return Err(SchedulerError::CategoryExhausted { category, needed: quota, available });
        }
        // A coarse final document can overshoot; drop it when that lands
        // strictly closer to the quota. With document sizes small against
        // the quota this keeps realization within 1%.
        if let Some((_, last_tokens)) = picked.last() {
            let kept_distance = realized.abs_diff(quota);
            let dropped_distance = (realized - last_tokens).abs_diff(quota);
            if dropped_distance < kept_distance {
                picked.pop();
            }
        }
        stream.extend(picked.into_iter().map(|(id, _)| id));
    }

    let mut rng = DetRng::new(crate::util::sub_seed(seed, "sample:interleave"));
    rng.shuffle(&mut stream);
    Ok(stream)
}
