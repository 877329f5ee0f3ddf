//! Pluggable judge and rewriter transports.
//!
//! Endpoints are strings: `mock:<name>` selects a built-in deterministic
//! client (tests and offline runs), `cmd:<program>` spawns a process per
//! call with the JSON request on stdin and the JSON response on stdout,
//! and `template` selects the built-in rewriter fallback.

use std::io::Write;
use std::process::{Command, Stdio};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use ipforge_core::evalharness::{JudgeClient, JudgeRequest, JudgeScores};
use ipforge_core::preprocess::{RewriteError, RewriteStyle, Rewriter, TemplateRewriter};

/// Deterministic judge that scores by response content (longer and more
/// specific wins), independent of slot position.
pub struct ContentJudge;

impl JudgeClient for ContentJudge {
    fn score(&self, request: &JudgeRequest) -> Result<JudgeScores, String> {
        let score = |text: &str| {
            let chars = text.chars().count() as f64;
            5.0 + (chars / 40.0).min(5.0)
        };
        Ok(JudgeScores {
            score_1: score(&request.response_1),
            score_2: score(&request.response_2),
        })
    }
}

/// Judge with pure position bias: slot 1 always outscores slot 2. Exists to
/// demonstrate that the swap-and-average protocol cancels it.
pub struct PositionBiasJudge;

impl JudgeClient for PositionBiasJudge {
    fn score(&self, _request: &JudgeRequest) -> Result<JudgeScores, String> {
        Ok(JudgeScores { score_1: 7.0, score_2: 5.0 })
    }
}

/// Judge backed by a subprocess speaking JSON on stdin/stdout.
pub struct CommandJudge {
    program: String,
}

fn run_command_json<Req: Serialize, Resp: for<'a> Deserialize<'a>>(
    program: &str,
    request: &Req,
) -> Result<Resp, String> {
    let mut child = Command::new(program)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("spawn {program}: {e}"))?;
    let body = serde_json::to_vec(request).map_err(|e| e.to_string())?;
    child
        .stdin
        .as_mut()
        .ok_or("no stdin")?
        .write_all(&body)
        .map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{program} exited with {}", out.status));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("bad response from {program}: {e}"))
}

impl JudgeClient for CommandJudge {
    fn score(&self, request: &JudgeRequest) -> Result<JudgeScores, String> {
        run_command_json(&self.program, request)
    }
}

/// Resolves a judge endpoint string to a client.
pub fn judge_client(endpoint: &str) -> Result<Box<dyn JudgeClient>> {
    match endpoint {
        "mock:consistent" => Ok(Box::new(ContentJudge)),
        "mock:position-bias" => Ok(Box::new(PositionBiasJudge)),
        other => match other.strip_prefix("cmd:") {
            Some(program) => Ok(Box::new(CommandJudge { program: program.to_string() })),
            None => bail!("unknown judge endpoint {other:?} (use mock:consistent, mock:position-bias, or cmd:<program>)"),
        },
    }
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    text: &'a str,
    style: RewriteStyle,
}

#[derive(Deserialize)]
struct RewriteResponse {
    text: String,
}

/// Rewriter backed by a subprocess speaking JSON on stdin/stdout.
pub struct CommandRewriter {
    program: String,
}

impl Rewriter for CommandRewriter {
    fn rewrite(&self, text: &str, style: RewriteStyle) -> Result<String, RewriteError> {
        let response: RewriteResponse =
            run_command_json(&self.program, &RewriteRequest { text, style })
                .map_err(RewriteError::Client)?;
        Ok(response.text)
    }
}

/// Resolves a rewriter endpoint string to a client.
pub fn rewriter_client(endpoint: &str) -> Result<Box<dyn Rewriter>> {
    match endpoint {
        "template" => Ok(Box::new(TemplateRewriter)),
        other => match other.strip_prefix("cmd:") {
            Some(program) => Ok(Box::new(CommandRewriter { program: program.to_string() })),
            None => bail!("unknown rewriter endpoint {other:?} (use template or cmd:<program>)"),
        },
    }
}

/// Preference ranker backed by a subprocess: `RankRequest` JSON on stdin,
/// `RankResponse` JSON on stdout.
pub struct CommandRanker {
    pub program: String,
}

impl ipforge_core::align::PreferenceRanker for CommandRanker {
    fn rank(&self, prompt: &str, responses: &[String]) -> Result<Vec<usize>, String> {
        let request = ipforge_core::align::RankRequest {
            prompt: prompt.to_string(),
            responses: responses.to_vec(),
        };
        let response: ipforge_core::align::RankResponse =
            run_command_json(&self.program, &request)?;
        Ok(response.ranking)
    }
}
