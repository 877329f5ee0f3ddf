//! Option-order robustness: proportion of plurality agreement (PPA).
//!
//! A question is presented under several option orderings; each answer is
//! mapped back to the underlying option it denotes. Per question, PPA is
//! the fraction of orderings agreeing with the plurality answer, so an
//! order-invariant answerer scores exactly 1.0 and a position-biased one
//! scores 1/k under the k cyclic rotations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evalharness::metrics::EvalError;

/// One question evaluated under several option orderings. `orderings[o]`
/// is a permutation: slot s shows underlying option `orderings[o][s]`.
/// `answers[o]` is the underlying option index the model chose under
/// ordering `o`, or None when the answer could not be mapped back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpaQuestion {
    pub num_options: usize,
    pub orderings: Vec<Vec<usize>>,
    pub answers: Vec<Option<usize>>,
}

impl PpaQuestion {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.orderings.len() < 2 {
            return Err(EvalError::Invalid("PPA needs at least 2 orderings".to_string()));
        }
        if self.answers.len() != self.orderings.len() {
            return Err(EvalError::LengthMismatch("one answer per ordering required".to_string()));
        }
        for ord in &self.orderings {
            let mut sorted = ord.clone();
            sorted.sort_unstable();
            if sorted != (0..self.num_options).collect::<Vec<_>>() {
                return Err(EvalError::Invalid(format!("ordering {ord:?} is not a permutation")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpaReport {
    pub per_question: Vec<f64>,
    pub mean: f64,
    /// Count of answers that could not be mapped to an underlying option;
    /// each counts as disagreeing with the plurality.
    pub unmapped_answers: usize,
}

/// The k cyclic rotations of k options; the default ordering set.
pub fn cyclic_rotations(num_options: usize) -> Vec<Vec<usize>> {
    (0..num_options)
        .map(|shift| (0..num_options).map(|s| (s + shift) % num_options).collect())
        .collect()
}

/// Dataset PPA: mean over questions of per-question plurality agreement.
pub fn ppa(questions: &[PpaQuestion]) -> Result<PpaReport, EvalError> {
    if questions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut per_question = Vec::with_capacity(questions.len());
    let mut unmapped = 0usize;
    for q in questions {
        q.validate()?;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for answer in &q.answers {
            match answer {
                Some(option) => *counts.entry(*option).or_default() += 1,
                None => unmapped += 1,
            }
        }
        let plurality = counts.values().copied().max().unwrap_or(0);
        per_question.push(plurality as f64 / q.orderings.len() as f64);
    }
    let mean = per_question.iter().sum::<f64>() / per_question.len() as f64;
    Ok(PpaReport { per_question, mean, unmapped_answers: unmapped })
}
