//! Building blocks for assembling and evaluating IP-domain language model
//! training pipelines.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`corpus`]: corpus data model and line-delimited ingestion
//! - [`preprocess`]: quality filtering, exact and MinHash/LSH deduplication,
//!   rewriting-based up-sampling
//! - [`synthesize`]: synthetic training documents built from patents and
//!   examiner file wrappers, including cross-patent text-pair extraction
//! - [`tokenizer`]: byte-pair-encoding training, vocabulary merging, and
//!   embedding-matrix resizing
//! - [`scheduler`]: two-stage data planning, sequence packing, and the
//!   cosine learning-rate schedule
//! - [`align`]: supervised fine-tuning and preference-ranking loss kernels,
//!   a PPO objective, rotary-embedding frequencies, and a micro
//!   autoregressive model for gradient verification
//! - [`evalharness`]: task metrics (macro-F1, exam scoring, BLEU, exact
//!   match, PPA) and the position-swapped pairwise judge protocol
//! - [`infercost`]: analytic KV-cache/weight memory and first-token latency
//!   model for dense and sparse-mixture architectures

pub mod align;
pub mod corpus;
pub mod evalharness;
pub mod infercost;
pub mod preprocess;
pub mod scheduler;
pub mod synthesize;
pub mod tokenizer;
pub mod util;
