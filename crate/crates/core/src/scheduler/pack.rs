//! Packing tokenized documents into fixed-budget training batches.
//!
//! Documents are concatenated in stream order with an end-of-document
//! separator, then cut into sequences of exactly `context_length` tokens.
//! With remainder carryover (the default) a document crossing a sequence
//! boundary continues in the next sequence and no token is lost; with
//! carryover disabled the tail of a crossing document is dropped and
//! reported. The trailing partial sequence and partial batch are dropped
//! and reported, never padded.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Span of one document's tokens inside a packed sequence: [start, end).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocBoundary {
    pub start: usize,
    pub end: usize,
    pub doc_id: String,
}

/// A batch of sequences, each exactly `context_length` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBatch {
    pub sequences: Vec<Vec<u32>>,
    pub doc_boundaries: Vec<Vec<DocBoundary>>,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingOptions {
    pub context_length: usize,
    pub batch_token_budget: u64,
    pub separator_token: u32,
    /// Carry the remainder of a boundary-crossing document into the next
    /// sequence instead of dropping it.
    pub carryover: bool,
}

impl Default for PackingOptions {
    fn default() -> Self {
        Self { context_length: 4096, batch_token_budget: 4_194_304, separator_token: 2, carryover: true }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PackingError {
    #[error("batch_token_budget {budget} not divisible by context_length {context}")]
    BudgetNotDivisible { budget: u64, context: usize },
}

#[derive(Debug, Default)]
pub struct PackingOutcome {
    pub batches: Vec<PackedBatch>,
    /// Tokens dropped from the trailing partial sequence and partial batch.
    pub dropped_tail_tokens: u64,
    /// Tokens dropped mid-stream because carryover was disabled.
    pub dropped_truncation_tokens: u64,
}

/// Packs `(doc_id, tokens)` streams into batches. Every emitted batch holds
/// exactly `batch_token_budget` tokens in `budget / context_length`
/// sequences of exactly `context_length` tokens each.
pub fn pack_sequences(
    docs: impl IntoIterator<Item = (String, Vec<u32>)>,
    opts: &PackingOptions,
) -> Result<PackingOutcome, PackingError> {
    if !opts.batch_token_budget.is_multiple_of(opts.context_length as u64) {
        return Err(PackingError::BudgetNotDivisible {
            budget: opts.batch_token_budget,
            context: opts.context_length,
        });
    }
    let seqs_per_batch = (opts.batch_token_budget / opts.context_length as u64) as usize;

    let mut outcome = PackingOutcome::default();
    let mut seq: Vec<u32> = Vec::with_capacity(opts.context_length);
    let mut bounds: Vec<DocBoundary> = Vec::new();
    let mut open_sequences: Vec<(Vec<u32>, Vec<DocBoundary>)> = Vec::new();

    let flush_sequence =
        |seq: &mut Vec<u32>, bounds: &mut Vec<DocBoundary>, open: &mut Vec<(Vec<u32>, Vec<DocBoundary>)>, batches: &mut Vec<PackedBatch>| {
            open.push((std::mem::take(seq), std::mem::take(bounds)));
            if open.len() == seqs_per_batch {
                let drained: Vec<(Vec<u32>, Vec<DocBoundary>)> = std::mem::take(open);
                let (sequences, doc_boundaries): (Vec<_>, Vec<_>) = drained.into_iter().unzip();
                let total_tokens = sequences.iter().map(|s| s.len() as u64).sum();
                batches.push(PackedBatch { sequences, doc_boundaries, total_tokens });
            }
        };

    for (doc_id, tokens) in docs {
        // Document tokens plus the end-of-document separator, attributed to
        // the document's span.
        let mut remaining: Vec<u32> = tokens;
        remaining.push(opts.separator_token);
        let mut offset = 0usize;
        loop {
            let room = opts.context_length - seq.len();
            let take = room.min(remaining.len() - offset);
            if take > 0 {
                let start = seq.len();
                seq.extend_from_slice(&remaining[offset..offset + take]);
                bounds.push(DocBoundary { start, end: seq.len(), doc_id: doc_id.clone() });
                offset += take;
            }
            if seq.len() == opts.context_length {
                flush_sequence(&mut seq, &mut bounds, &mut open_sequences, &mut outcome.batches);
            }
            if offset == remaining.len() {
                break;
            }
            // Document crosses the boundary; without carryover its tail is
            // dropped here.
            if !opts.carryover {
                outcome.dropped_truncation_tokens += (remaining.len() - offset) as u64;
                break;
            }
        }
    }

    outcome.dropped_tail_tokens += seq.len() as u64;
    outcome.dropped_tail_tokens +=
        open_sequences.iter().map(|(s, _)| s.len() as u64).sum::<u64>();
    Ok(outcome)
}

/// Writes batches as a flat little-endian u32 token file plus a JSON
/// sidecar index describing batch and sequence layout.
pub fn write_batches(
    batches: &[PackedBatch],
    bin_path: impl AsRef<Path>,
    index_path: impl AsRef<Path>,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Index<'a> {
        context_length: usize,
        batches: Vec<BatchEntry<'a>>,
    }
    #[derive(Serialize)]
    struct BatchEntry<'a> {
        token_offset: u64,
        num_sequences: usize,
        doc_boundaries: &'a [Vec<DocBoundary>],
    }

    let context_length = batches.first().map_or(0, |b| b.sequences.first().map_or(0, Vec::len));
    let mut bin = Vec::new();
    let mut entries = Vec::new();
    let mut offset = 0u64;
    for batch in batches {
        entries.push(BatchEntry {
            token_offset: offset,
            num_sequences: batch.sequences.len(),
            doc_boundaries: &batch.doc_boundaries,
        });
        for seq in &batch.sequences {
            for &t in seq {
                bin.extend_from_slice(&t.to_le_bytes());
            }
            offset += seq.len() as u64;
        }
    }
    fs::File::create(bin_path)?.write_all(&bin)?;
    let index = Index { context_length, batches: entries };
    fs::File::create(index_path)?.write_all(serde_json::to_string_pretty(&index).unwrap().as_bytes())
}

/// Reads batches written by [`write_batches`].
pub fn read_batches(
    bin_path: impl AsRef<Path>,
    index_path: impl AsRef<Path>,
) -> std::io::Result<Vec<PackedBatch>> {
    #[derive(Deserialize)]
    struct Index {
        context_length: usize,
        batches: Vec<BatchEntry>,
    }
    #[derive(Deserialize)]
    struct BatchEntry {
        token_offset: u64,
        num_sequences: usize,
        doc_boundaries: Vec<Vec<DocBoundary>>,
    }

    let bin = fs::read(bin_path)?;
    let index: Index = serde_json::from_slice(&fs::read(index_path)?)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let tokens: Vec<u32> = bin
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let mut out = Vec::new();
    for entry in index.batches {
        let mut sequences = Vec::with_capacity(entry.num_sequences);
        let mut pos = entry.token_offset as usize;
        for _ in 0..entry.num_sequences {
            sequences.push(tokens[pos..pos + index.context_length].to_vec());
            pos += index.context_length;
        }
        let total_tokens = sequences.iter().map(|s| s.len() as u64).sum();
        out.push(PackedBatch { sequences, doc_boundaries: entry.doc_boundaries, total_tokens });
    }
    Ok(out)
}
