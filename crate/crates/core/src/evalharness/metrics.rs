//! Scalar task metrics: macro-F1, exam points, BLEU, exact match.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// Unweighted mean of per-label F1 over the labels present in gold or
/// predictions; labels absent from both are excluded from the mean.
/// Predictions and gold must be aligned and nonempty.
pub fn f1_macro(predictions: &[String], gold: &[String], labels: &[String]) -> Result<f64, EvalError> {
    if predictions.is_empty() || gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} predictions vs {} gold",
            predictions.len(),
            gold.len()
        )));
    }

    let mut tp: BTreeMap<&str, u64> = BTreeMap::new();
    let mut fp: BTreeMap<&str, u64> = BTreeMap::new();
    let mut fn_: BTreeMap<&str, u64> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(gold) {
        if p == g {
            *tp.entry(p).or_default() += 1;
        } else {
            *fp.entry(p).or_default() += 1;
            *fn_.entry(g).or_default() += 1;
        }
    }

    let present: Vec<&String> = labels
        .iter()
        .filter(|l| predictions.contains(l) || gold.contains(l))
        .collect();
    if present.is_empty() {
        return Err(EvalError::Invalid("no configured label appears in gold or predictions".to_string()));
    }

    let mut sum = 0.0;
    for label in &present {
        let t = *tp.get(label.as_str()).unwrap_or(&0) as f64;
        let f_pos = *fp.get(label.as_str()).unwrap_or(&0) as f64;
        let f_neg = *fn_.get(label.as_str()).unwrap_or(&0) as f64;
        let denom = 2.0 * t + f_pos + f_neg;
        sum += if denom == 0.0 { 0.0 } else { 2.0 * t / denom };
    }
    Ok(sum / present.len() as f64)
}

/// Exam result under the simplified scoring rule: half a point per correct
/// answer, pass at 60 points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExamScore {
    pub points: f64,
    pub correct: usize,
    pub pass: bool,
}

pub const EXAM_POINTS_PER_QUESTION: f64 = 0.5;
pub const EXAM_PASS_CUTOFF: f64 = 60.0;

/// Scores a multiple-choice exam: 0.5 points per correct answer.
pub fn score_exam<T: PartialEq>(answers: &[T], key: &[T]) -> Result<ExamScore, EvalError> {
    if answers.len() != key.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} answers vs {} key entries",
            answers.len(),
            key.len()
        )));
    }
    let correct = answers.iter().zip(key).filter(|(a, k)| a == k).count();
    let points = correct as f64 * EXAM_POINTS_PER_QUESTION;
    Ok(ExamScore { points, correct, pass: points >= EXAM_PASS_CUTOFF })
}

/// How candidate and reference strings are split into BLEU tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuTokenization {
    /// Whitespace tokens, for English.
    Whitespace,
    /// One token per character, for Chinese (no standard segmentation).
    Character,
}

fn bleu_tokens(text: &str, mode: BleuTokenization) -> Vec<String> {
    match mode {
        BleuTokenization::Whitespace => text.split_whitespace().map(str::to_string).collect(),
        BleuTokenization::Character => {
            text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_default() += 1;
        }
    }
    counts
}

/// Sentence BLEU with modified n-gram precisions for n = 1..4, add-one
/// smoothing, and the brevity penalty. Multiple references take clipped
/// max counts and the closest reference length. Empty candidates score 0.
pub fn bleu(candidate: &str, references: &[&str], mode: BleuTokenization) -> f64 {
    let cand = bleu_tokens(candidate, mode);
    if cand.is_empty() || references.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| bleu_tokens(r, mode)).collect();

    // closest reference length, ties toward the shorter
    let c_len = cand.len() as i64;
    let r_len = refs
        .iter()
        .map(|r| r.len() as i64)
        .min_by_key(|&rl| ((rl - c_len).abs(), rl))
        .unwrap_or(0);

    let mut log_precision_sum = 0.0;
    for n in 1..=4usize {
        let cand_counts = ngram_counts(&cand, n);
        let total: u64 = cand_counts.values().sum();
        let mut matched = 0u64;
        for (gram, &count) in &cand_counts {
            let best_ref = refs
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            matched += count.min(best_ref);
        }
        // add-one smoothing keeps zero-match orders (and empty orders on
        // short candidates) finite
        let p = (matched + 1) as f64 / (total + 1) as f64;
        log_precision_sum += p.ln();
    }

    let brevity = if c_len >= r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    brevity * (log_precision_sum / 4.0).exp()
}

/// 1 iff the strings match after trimming outer whitespace and unifying
/// newlines to `\n`.
pub fn exact_match(prediction: &str, reference: &str) -> u8 {
    let normalize = |s: &str| s.replace("\r\n", "\n").trim().to_string();
    u8::from(normalize(prediction) == normalize(reference))
}

/// Convenience: labels appearing in a gold set, ordered.
pub fn labels_of(gold: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = gold.iter().collect();
    set.into_iter().cloned().collect()
}
