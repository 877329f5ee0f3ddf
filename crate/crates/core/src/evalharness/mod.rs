//! Evaluation metrics and the pairwise judge protocol: macro-F1
//! classification, exam scoring, BLEU, exact match, option-order
//! robustness (PPA), and position-swapped pairwise judging with tallies.

mod judge;
mod metrics;
mod ppa;

pub use judge::{
    judge_pair, tally, JudgeClient, JudgeError, JudgeOutcome, JudgeRequest, JudgeScores,
    JudgeSettings, JudgeVerdict, Tally,
};
pub use metrics::{
    bleu, exact_match, f1_macro, labels_of, score_exam, BleuTokenization, EvalError, ExamScore,
};
pub use ppa::{cyclic_rotations, ppa, PpaQuestion, PpaReport};

use serde::{Deserialize, Serialize};

use crate::corpus::Language;

/// Evaluation task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qa,
    Writing,
    Classification,
    Summary,
    Reasoning,
    Correction,
    Translation,
    Exam,
    Match,
}

/// One evaluation instance. Multiple-choice instances carry at least two
/// options and a key index into them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub task: TaskKind,
    pub prompt: String,
    pub reference: String,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<usize>,
}

impl EvalInstance {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !self.options.is_empty() {
            if self.options.len() < 2 {
                return Err(EvalError::Invalid("multiple-choice instance needs >= 2 options".to_string()));
            }
            match self.key {
                Some(k) if k < self.options.len() => {}
                _ => return Err(EvalError::Invalid("multiple-choice instance needs a valid key index".to_string())),
            }
        }
        Ok(())
    }
}

/// One scalar metric with the instance count it was computed over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub task: TaskKind,
    pub metric: String,
    pub value: f64,
    pub instances: usize,
}

/// Per-model evaluation report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub config_hash: String,
    pub entries: Vec<MetricEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tallies: Vec<Tally>,
}

impl MetricReport {
    /// Plain-text table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model: {}  (config {})\n", self.model, self.config_hash));
        out.push_str(&format!("{:<16} {:<12} {:>10} {:>10}\n", "task", "metric", "value", "n"));
        for e in &self.entries {
            out.push_str(&format!(
                "{:<16} {:<12} {:>10.4} {:>10}\n",
                format!("{:?}", e.task).to_lowercase(),
                e.metric,
                e.value,
                e.instances
            ));
        }
        for t in &self.tallies {
            out.push_str(&format!(
                "pairwise {} vs {}: {} wins / {} ties / {} losses ({} errors)\n",
                t.model_a, t.model_b, t.wins, t.ties, t.loses, t.errors
            ));
        }
        out
    }
}
