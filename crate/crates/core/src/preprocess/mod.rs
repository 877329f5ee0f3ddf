//! Quality filtering, exact deduplication on attribute labels, MinHash/LSH
//! fuzzy deduplication, and rewriting-based up-sampling.

mod dedup;
mod filter;
mod minhash;
mod rewrite;

pub use dedup::{exact_dedup, fuzzy_dedup, DedupCluster, DedupReport, MatchKind};
pub use filter::{
    filter_documents, FilterReason, FilterReport, FilterRuleSet, QualityClassifier, RemovedDocument,
};
pub use minhash::{
    estimate_jaccard, exact_jaccard, minhash_signature, shingle_hashes, shingle_set, MinHashConfig,
    MinHashError, Signature,
};
pub use rewrite::{
    rewrite_upsample, RewriteError, RewriteOutcome, RewriteSkip, RewriteStyle, Rewriter,
    TemplateRewriter,
};
