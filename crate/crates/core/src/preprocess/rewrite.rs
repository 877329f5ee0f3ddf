//! Rewriting-based up-sampling for book documents.
//!
//! Each source document is rewritten into alternative expressions (summary,
//! conversation) by an external text-transform client. Sources are never
//! removed; outputs carry provenance attributes. A deterministic template
//! fallback stands in when no client is reachable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Document};

/// Rewrite styles. Wire value matches the transport contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteStyle {
    Summary,
    Conversation,
}

impl RewriteStyle {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewriteStyle::Summary => "summary",
            RewriteStyle::Conversation => "conversation",
        }
    }
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("rewriter failed: {0}")]
    Client(String),
}

/// Text-transform client: request {"text","style"} in, {"text"} out.
pub trait Rewriter {
    fn rewrite(&self, text: &str, style: RewriteStyle) -> Result<String, RewriteError>;
}

/// Built-in fallback that embeds the source under a fixed scaffold per
/// style. Deterministic, so pipeline runs stay reproducible offline.
pub struct TemplateRewriter;

impl Rewriter for TemplateRewriter {
    fn rewrite(&self, text: &str, style: RewriteStyle) -> Result<String, RewriteError> {
        Ok(match style {
            RewriteStyle::Summary => {
                format!("Summary of the source passage:\n{text}\nKey points restated in brief.")
            }
            RewriteStyle::Conversation => format!(
                "Q: What does the source passage explain?\nA: {text}\nQ: Can you restate the essentials?\nA: See the passage above."
            ),
        })
    }
}

/// A (doc, style) combination that produced no output, and why.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewriteSkip {
    pub id: String,
    pub style: Option<RewriteStyle>,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct RewriteOutcome {
    pub new_documents: Vec<Document>,
    pub skipped: Vec<RewriteSkip>,
}

/// Rewrites each Book document into every requested style. Output documents
/// carry `rewritten_from` (source id) and `rewrite_style` attributes and the
/// id `<source>-rw-<style>`. Client failures skip that (doc, style) pair and
/// are recorded, never fatal.
pub fn rewrite_upsample(
    docs: &[Document],
    styles: &[RewriteStyle],
    rewriter: &dyn Rewriter,
) -> RewriteOutcome {
    let mut outcome = RewriteOutcome::default();
    for doc in docs {
        if doc.category != Category::Book {
            outcome.skipped.push(RewriteSkip {
                id: doc.id.clone(),
                style: None,
                reason: "not a Book document".to_string(),
            });
            continue;
        }
        for &style in styles {
            match rewriter.rewrite(&doc.text, style) {
                Ok(text) => {
                    let new_doc = Document::new(
                        format!("{}-rw-{}", doc.id, style.as_str()),
                        text,
                        doc.category,
                        doc.language,
                    )
                    .with_attribute("rewritten_from", doc.id.clone())
                    .with_attribute("rewrite_style", style.as_str());
                    outcome.new_documents.push(new_doc);
                }
                Err(e) => outcome.skipped.push(RewriteSkip {
                    id: doc.id.clone(),
                    style: Some(style),
                    reason: e.to_string(),
                }),
            }
        }
    }
    outcome
}
