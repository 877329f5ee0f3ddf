//! Two-stage pretraining data schedule: per-category quota planning,
//! deterministic sampling, fixed-budget sequence packing, and the cosine
//! learning-rate schedule.

mod lr;
mod pack;
mod plan;

pub use lr::cosine_lr;
pub use pack::{
    pack_sequences, read_batches, write_batches, DocBoundary, PackedBatch, PackingOutcome,
    PackingOptions,
};
pub use plan::{
    plan_stages, sample_schedule, CorpusIndex, ScheduleProfile, SchedulerError, Stage, StageConfig,
    StagePlan,
};
