//! Byte-pair-encoding tokenizer training, vocabulary merging, compression
//! measurement, and embedding-matrix resize semantics.

mod bpe;
mod embed;

pub use bpe::{
    compression_ratio, merge_vocab, train_bpe, MergeRule, TokenizerError, Vocab,
};
pub use embed::{resize_embeddings, EmbeddingInit, EmbeddingShape, ResizeError};
