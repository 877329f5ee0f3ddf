//! Pipeline orchestration: a single config file drives preprocess,
//! synthesize, tokenize, schedule, kernel verification, evaluation, and
//! cost-model stages, each independently re-runnable and all reproducible
//! from one global seed.

pub mod config;
pub mod manifest;
pub mod runner;
pub mod transports;
