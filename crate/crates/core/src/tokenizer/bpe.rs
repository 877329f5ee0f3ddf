//! Byte-level BPE with byte fallback.
//!
//! The base alphabet is the 256 single bytes, so any UTF-8 text encodes and
//! decodes byte-exactly. Training merges the most frequent adjacent token
//! pair until the requested number of new tokens exists, breaking frequency
//! ties by lexicographically smallest pair. Encoding applies merges
//! lowest-rank-first, which reproduces the training greedy order.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{escape_bytes, unescape_bytes};

/// One merge rule: the adjacent pair of token byte-strings it joins.
/// Position in the merge list is the rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeRule {
    pub left: Vec<u8>,
    pub right: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("corpus too small to train on")]
    CorpusTooSmall,
    #[error("duplicate token in vocabulary at position {0}")]
    DuplicateToken(usize),
    #[error("vocab file malformed: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

/// An ordered token list plus ordered merge rules. Token ids are positions
/// in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<Vec<u8>>,
    merges: Vec<MergeRule>,
    token_ids: HashMap<Vec<u8>, u32>,
    /// (left_id, right_id) -> (rank, merged_id); resolved against this
    /// vocab's token ids for fast encoding.
    pair_ranks: HashMap<(u32, u32), (u32, u32)>,
}

impl Vocab {
    /// Builds a vocab from an ordered token list and merge list, checking
    /// that tokens are unique.
    pub fn new(tokens: Vec<Vec<u8>>, merges: Vec<MergeRule>) -> Result<Self, TokenizerError> {
        let mut token_ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_ids.insert(t.clone(), i as u32).is_some() {
                return Err(TokenizerError::DuplicateToken(i));
            }
        }
        let mut vocab = Self { tokens, merges, token_ids, pair_ranks: HashMap::new() };
        vocab.rebuild_pair_ranks();
        Ok(vocab)
    }

    /// The 256 single-byte tokens and no merges.
    pub fn byte_alphabet() -> Self {
        let tokens: Vec<Vec<u8>> = (0u16..256).map(|b| vec![b as u8]).collect();
        Self::new(tokens, Vec::new()).expect("byte alphabet is duplicate free")
    }

    fn rebuild_pair_ranks(&mut self) {
        self.pair_ranks.clear();
        for (rank, rule) in self.merges.iter().enumerate() {
            let (Some(&l), Some(&r)) = (self.token_ids.get(&rule.left), self.token_ids.get(&rule.right))
            else {
                continue;
            };
            let mut merged = rule.left.clone();
            merged.extend_from_slice(&rule.right);
            let Some(&m) = self.token_ids.get(&merged) else { continue };
            self.pair_ranks.entry((l, r)).or_insert((rank as u32, m));
        }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn token_id(&self, token: &[u8]) -> Option<u32> {
        self.token_ids.get(token).copied()
    }

    /// Byte-string for a token id.
    pub fn decode_id(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    /// Encodes text to token ids: byte fallback start, then merges applied
    /// lowest rank first until none applies.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut seq: Vec<u32> = text
            .bytes()
            .map(|b| self.token_ids[&vec![b]])
            .collect();
        loop {
            let mut best: Option<(u32, u32, usize)> = None; // (rank, merged_id, pos)
            for (pos, pair) in seq.windows(2).enumerate() {
                if let Some(&(rank, merged)) = self.pair_ranks.get(&(pair[0], pair[1])) {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, merged, pos));
                    }
                }
            }
            let Some((rank, _, _)) = best else { break };
            // Merge every occurrence of this rank's pair left to right.
            let (left_id, right_id) = {
                let rule = &self.merges[rank as usize];
                (self.token_ids[&rule.left], self.token_ids[&rule.right])
            };
            let merged_id = self.pair_ranks[&(left_id, right_id)].1;
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == left_id && seq[i + 1] == right_id {
                    out.push(merged_id);
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            seq = out;
        }
        seq
    }

    /// Concatenated bytes of the ids. Ids out of range are skipped.
    pub fn decode(&self, ids: &[u32]) -> Vec<u8> {
        let mut out = Vec::new();
        for &id in ids {
            if let Some(bytes) = self.decode_id(id) {
                out.extend_from_slice(bytes);
            }
        }
        out
    }

    /// Writes the vocab as two text files: one escaped token per line, and
    /// one escaped `left<TAB>right` merge per line.
    pub fn save(&self, tokens_path: impl AsRef<Path>, merges_path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        let mut tok_out = String::new();
        for t in &self.tokens {
            tok_out.push_str(&escape_bytes(t));
            tok_out.push('\n');
        }
        let mut merge_out = String::new();
        for m in &self.merges {
            merge_out.push_str(&escape_bytes(&m.left));
            merge_out.push('\t');
            merge_out.push_str(&escape_bytes(&m.right));
            merge_out.push('\n');
        }
        let write = |path: &Path, data: &str| -> Result<(), TokenizerError> {
            let mut f = fs::File::create(path).map_err(|e| TokenizerError::Io(e.to_string()))?;
            f.write_all(data.as_bytes()).map_err(|e| TokenizerError::Io(e.to_string()))
        };
        write(tokens_path.as_ref(), &tok_out)?;
        write(merges_path.as_ref(), &merge_out)
    }

    /// Loads a vocab saved by [`Vocab::save`].
    pub fn load(tokens_path: impl AsRef<Path>, merges_path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        let tok_text = fs::read_to_string(tokens_path).map_err(|e| TokenizerError::Io(e.to_string()))?;
        let merge_text = fs::read_to_string(merges_path).map_err(|e| TokenizerError::Io(e.to_string()))?;
        let mut tokens = Vec::new();
        for line in tok_text.lines() {
            tokens.push(unescape_bytes(line).map_err(TokenizerError::Format)?);
        }
        let mut merges = Vec::new();
        for line in merge_text.lines() {
            if line.is_empty() {
                continue;
            }
            let (l, r) = line
                .split_once('\t')
                .ok_or_else(|| TokenizerError::Format(format!("merge line without tab: {line:?}")))?;
            merges.push(MergeRule {
                left: unescape_bytes(l).map_err(TokenizerError::Format)?,
                right: unescape_bytes(r).map_err(TokenizerError::Format)?,
            });
        }
        Self::new(tokens, merges)
    }
}

/// Trains `target_new_tokens` BPE merges over the corpus, starting from the
/// byte alphabet. Deterministic: ties in pair frequency go to the
/// lexicographically smallest (left, right) byte-string pair. Stops early
/// if no adjacent pair repeats.
pub fn train_bpe(corpus_texts: &[String], target_new_tokens: usize, _seed: u64) -> Result<Vocab, TokenizerError> {
    let total_bytes: usize = corpus_texts.iter().map(String::len).sum();
    if corpus_texts.is_empty() || total_bytes == 0 || (target_new_tokens > 0 && total_bytes < 2) {
        return Err(TokenizerError::CorpusTooSmall);
    }

    let mut vocab_tokens: Vec<Vec<u8>> = (0u16..256).map(|b| vec![b as u8]).collect();
    let mut merges: Vec<MergeRule> = Vec::new();
    let mut sequences: Vec<Vec<u32>> = corpus_texts
        .iter()
        .map(|t| t.bytes().map(u32::from).collect())
        .collect();

    for _ in 0..target_new_tokens {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for seq in &sequences {
            for pair in seq.windows(2) {
                *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
            }
        }
        let best = counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    // On equal counts prefer the lexicographically smaller
                    // pair, so invert the byte-string ordering under max.
                    let ka = (&vocab_tokens[pa.0 as usize], &vocab_tokens[pa.1 as usize]);
                    let kb = (&vocab_tokens[pb.0 as usize], &vocab_tokens[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            })
            .map(|(&pair, _)| pair);
        let Some((left, right)) = best else { break };

        let mut merged_bytes = vocab_tokens[left as usize].clone();
        merged_bytes.extend_from_slice(&vocab_tokens[right as usize]);
        let new_id = vocab_tokens.len() as u32;
        merges.push(MergeRule {
            left: vocab_tokens[left as usize].clone(),
            right: vocab_tokens[right as usize].clone(),
        });
        vocab_tokens.push(merged_bytes);

        for seq in &mut sequences {
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            *seq = out;
        }
    }

    Vocab::new(vocab_tokens, merges)
}

/// Merges a learned vocabulary into a base one: base tokens keep their ids
/// unchanged, learned tokens not already present are appended in learned
/// order, and learned merge rules follow the base rules in rank order.
pub fn merge_vocab(base: &Vocab, learned: &Vocab) -> Vocab {
    let mut tokens = base.tokens.clone();
    let existing: HashSet<&[u8]> = base.tokens.iter().map(Vec::as_slice).collect();
    for t in &learned.tokens {
        if !existing.contains(t.as_slice()) {
            tokens.push(t.clone());
        }
    }
    let mut merges = base.merges.clone();
    let base_rules: HashSet<&MergeRule> = base.merges.iter().collect();
    for m in &learned.merges {
        if !base_rules.contains(m) {
            merges.push(m.clone());
        }
    }
    Vocab::new(tokens, merges).expect("merge of duplicate-free vocabs is duplicate free")
}

/// Token-count ratio `tokens_a / tokens_b` for the same text; above 1.0
/// means `tok_b` compresses better. Empty text is defined as 1.0.
pub fn compression_ratio(text: &str, tok_a: &Vocab, tok_b: &Vocab) -> f64 {
    if text.is_empty() {
        return 1.0;
    }
    let a = tok_a.encode(text).len();
    let b = tok_b.encode(text).len();
    a as f64 / b as f64
}
