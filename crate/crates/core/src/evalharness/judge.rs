//! Position-swapped pairwise judging.
//!
//! Each response pair is scored twice with slot positions reversed, the
//! scores are mapped back to their responses and averaged, and the verdict
//! falls out of the averaged margin. Any judge whose scores depend only on
//! slot position cancels to a tie under this protocol.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wire request for one judging call. `response_1` occupies the first slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub system_guideline: String,
    pub prompt: String,
    pub response_1: String,
    pub response_2: String,
}

/// Wire response: a score per slot.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JudgeScores {
    pub score_1: f64,
    pub score_2: f64,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge call failed after {attempts} attempts: {last}")]
    CallFailed { attempts: u32, last: String },
    #[error("judge returned non-finite scores")]
    NonFiniteScores,
    #[error("tally mixes model pairs: {0}")]
    MixedPairs(String),
}

/// Scoring client. Implementations decide the transport.
pub trait JudgeClient {
    fn score(&self, request: &JudgeRequest) -> Result<JudgeScores, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeOutcome {
    Win,
    Tie,
    Lose,
}

/// Verdict for one (model_a, model_b) response pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub model_a: String,
    pub model_b: String,
    /// Raw scores from the call with `a` in slot 1, as (a, b).
    pub score_a_first: (f64, f64),
    /// Raw scores from the call with `b` in slot 1, as (slot1, slot2) =
    /// (b, a); un-swapped during averaging.
    pub score_b_first: (f64, f64),
    /// Element-wise mean after un-swapping, as (a, b).
    pub averaged: (f64, f64),
    pub outcome: JudgeOutcome,
}

fn default_tie_delta() -> f64 {
    0.5
}

fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeSettings {
    pub system_guideline: String,
    /// Margins at or below this (on the judge's score scale) are ties.
    #[serde(default = "default_tie_delta")]
    pub tie_delta: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        Self {
            system_guideline: "Score each response from 1 to 10 for accuracy, professional correctness, and helpfulness.".to_string(),
            tie_delta: default_tie_delta(),
            retries: default_retries(),
        }
    }
}

fn call_with_retry(
    judge: &dyn JudgeClient,
    request: &JudgeRequest,
    retries: u32,
) -> Result<JudgeScores, JudgeError> {
    let attempts = retries + 1;
    let mut last = String::new();
    for _ in 0..attempts {
        match judge.score(request) {
            Ok(scores) => {
                if !scores.score_1.is_finite() || !scores.score_2.is_finite() {
                    return Err(JudgeError::NonFiniteScores);
                }
                return Ok(scores);
            }
            Err(e) => last = e,
        }
    }
    Err(JudgeError::CallFailed { attempts, last })
}

/// Judges one pair twice with slots reversed and averages the un-swapped
/// scores. The outcome is win/lose only when the averaged margin exceeds
/// `tie_delta`. A failing judge (after retries) is an error; callers count
/// those separately from verdicts.
pub fn judge_pair(
    model_a: &str,
    model_b: &str,
    prompt: &str,
    response_a: &str,
    response_b: &str,
    judge: &dyn JudgeClient,
    settings: &JudgeSettings,
) -> Result<JudgeVerdict, JudgeError> {
    let forward = JudgeRequest {
        system_guideline: settings.system_guideline.clone(),
        prompt: prompt.to_string(),
        response_1: response_a.to_string(),
        response_2: response_b.to_string(),
    };
    let reversed = JudgeRequest {
        system_guideline: settings.system_guideline.clone(),
        prompt: prompt.to_string(),
        response_1: response_b.to_string(),
        response_2: response_a.to_string(),
    };
    let first = call_with_retry(judge, &forward, settings.retries)?;
    let second = call_with_retry(judge, &reversed, settings.retries)?;

    // In the reversed call slot 1 held b, slot 2 held a.
    let avg_a = (first.score_1 + second.score_2) / 2.0;
    let avg_b = (first.score_2 + second.score_1) / 2.0;
    let outcome = if (avg_a - avg_b).abs() <= settings.tie_delta {
        JudgeOutcome::Tie
    } else if avg_a > avg_b {
        JudgeOutcome::Win
    } else {
        JudgeOutcome::Lose
    };

    Ok(JudgeVerdict {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        score_a_first: (first.score_1, first.score_2),
        score_b_first: (second.score_1, second.score_2),
        averaged: (avg_a, avg_b),
        outcome,
    })
}

/// Win/tie/loss counts for one model pair, with judge failures counted
/// separately from verdicts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub model_a: String,
    pub model_b: String,
    pub wins: usize,
    pub ties: usize,
    pub loses: usize,
    pub errors: usize,
}

/// Reduces verdicts (and judge failures) to counts. All verdicts must
/// belong to the same model pair.
pub fn tally(results: &[Result<JudgeVerdict, JudgeError>]) -> Result<Tally, JudgeError> {
    let mut t = Tally::default();
    let mut pair: Option<(String, String)> = None;
    for result in results {
        match result {
            Ok(v) => {
                match &pair {
                    None => pair = Some((v.model_a.clone(), v.model_b.clone())),
                    Some((a, b)) if *a == v.model_a && *b == v.model_b => {}
                    Some((a, b)) => {
                        return Err(JudgeError::MixedPairs(format!(
                            "({a}, {b}) vs ({}, {})",
                            v.model_a, v.model_b
                        )))
                    }
                }
                match v.outcome {
                    JudgeOutcome::Win => t.wins += 1,
                    JudgeOutcome::Tie => t.ties += 1,
                    JudgeOutcome::Lose => t.loses += 1,
                }
            }
            Err(_) => t.errors += 1,
        }
    }
    if let Some((a, b)) = pair {
        t.model_a = a;
        t.model_b = b;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scores by content: longer response wins regardless of slot.
    struct LengthJudge;
    impl JudgeClient for LengthJudge {
        fn score(&self, request: &JudgeRequest) -> Result<JudgeScores, String> {
            let score = |text: &str| 5.0 + (text.len() as f64).min(5.0);
            Ok(JudgeScores { score_1: score(&request.response_1), score_2: score(&request.response_2) })
        }
    }

    /// Pure position bias: slot 1 always gets 7, slot 2 always 5.
    struct SlotBiasJudge;
    impl JudgeClient for SlotBiasJudge {
        fn score(&self, _request: &JudgeRequest) -> Result<JudgeScores, String> {
            Ok(JudgeScores { score_1: 7.0, score_2: 5.0 })
        }
    }

    struct FlakyJudge {
        fail_first: std::cell::Cell<u32>,
    }
    impl JudgeClient for FlakyJudge {
        fn score(&self, _request: &JudgeRequest) -> Result<JudgeScores, String> {
            if self.fail_first.get() > 0 {
                self.fail_first.set(self.fail_first.get() - 1);
                Err("transient".to_string())
            } else {
                Ok(JudgeScores { score_1: 8.0, score_2: 6.0 })
            }
        }
    }

    fn settings() -> JudgeSettings {
        JudgeSettings::default()
    }

    #[test]
    fn consistent_judge_produces_a_win() {
        let verdict = judge_pair(
            "m-a",
            "m-b",
            "prompt",
            "a long detailed response",
            "hm",
            &LengthJudge,
            &settings(),
        )
        .unwrap();
        assert_eq!(verdict.outcome, JudgeOutcome::Win);
        assert_eq!(verdict.averaged.0, 10.0);
        assert_eq!(verdict.averaged.1, 7.0);
    }

    #[test]
    fn position_bias_cancels_to_tie() {
        let verdict =
            judge_pair("m-a", "m-b", "p", "alpha", "beta", &SlotBiasJudge, &settings()).unwrap();
        // raw calls disagree, un-swapped average is level
        assert_eq!(verdict.score_a_first, (7.0, 5.0));
        assert_eq!(verdict.score_b_first, (7.0, 5.0));
        assert_eq!(verdict.averaged, (6.0, 6.0));
        assert_eq!(verdict.outcome, JudgeOutcome::Tie);
    }

    #[test]
    fn sub_delta_margin_is_a_tie() {
        struct NearTie;
        impl JudgeClient for NearTie {
            fn score(&self, r: &JudgeRequest) -> Result<JudgeScores, String> {
                // content-based margin of 0.4, below the 0.5 delta
                let s = |t: &str| if t == "alpha" { 7.4 } else { 7.0 };
                Ok(JudgeScores { score_1: s(&r.response_1), score_2: s(&r.response_2) })
            }
        }
        let verdict = judge_pair("a", "b", "p", "alpha", "beta", &NearTie, &settings()).unwrap();
        assert_eq!(verdict.outcome, JudgeOutcome::Tie);
    }

    #[test]
    fn retries_recover_from_transient_failures() {
        let judge = FlakyJudge { fail_first: std::cell::Cell::new(1) };
        let verdict = judge_pair("a", "b", "p", "x", "y", &judge, &settings()).unwrap();
        assert_eq!(verdict.score_a_first, (8.0, 6.0));
    }

    #[test]
    fn exhausted_retries_surface_an_error() {
        let judge = FlakyJudge { fail_first: std::cell::Cell::new(100) };
        let err = judge_pair("a", "b", "p", "x", "y", &judge, &settings()).unwrap_err();
        assert!(matches!(err, JudgeError::CallFailed { attempts: 3, .. }));
    }

    fn verdict_with(outcome: JudgeOutcome) -> Result<JudgeVerdict, JudgeError> {
        Ok(JudgeVerdict {
            model_a: "a".into(),
            model_b: "b".into(),
            score_a_first: (0.0, 0.0),
            score_b_first: (0.0, 0.0),
            averaged: (0.0, 0.0),
            outcome,
        })
    }

    #[test]
    fn tally_counts_sum_to_non_error_verdicts() {
        let results = vec![
            verdict_with(JudgeOutcome::Win),
            verdict_with(JudgeOutcome::Win),
            verdict_with(JudgeOutcome::Tie),
            verdict_with(JudgeOutcome::Lose),
            Err(JudgeError::NonFiniteScores),
        ];
        let t = tally(&results).unwrap();
        assert_eq!((t.wins, t.ties, t.loses, t.errors), (2, 1, 1, 1));
        assert_eq!(t.wins + t.ties + t.loses, results.len() - t.errors);
    }

    #[test]
    fn empty_tally_is_all_zero() {
        let t = tally(&[]).unwrap();
        assert_eq!((t.wins, t.ties, t.loses, t.errors), (0, 0, 0, 0));
    }

    #[test]
    fn judge_wire_schema_is_stable() {
        let req = JudgeRequest {
            system_guideline: "g".into(),
            prompt: "p".into(),
            response_1: "a".into(),
            response_2: "b".into(),
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"system_guideline":"g","prompt":"p","response_1":"a","response_2":"b"}"#
        );
        let scores: JudgeScores = serde_json::from_str(r#"{"score_1":8.0,"score_2":6.5}"#).unwrap();
        assert_eq!((scores.score_1, scores.score_2), (8.0, 6.5));
    }

    #[test]
    fn mixed_pairs_are_rejected() {
        let mut other = verdict_with(JudgeOutcome::Win).unwrap();
        other.model_b = "c".into();
        let results = vec![verdict_with(JudgeOutcome::Win), Ok(other)];
        assert!(matches!(tally(&results), Err(JudgeError::MixedPairs(_))));
    }
}
