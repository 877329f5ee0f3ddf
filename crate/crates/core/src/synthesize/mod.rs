//! Synthetic training documents built from patents and examiner file
//! wrappers: claims + cited-patent + wrapper concatenations, cross-patent
//! text pairs at paragraph and sentence level, and instruction-style
//! samples wrapping those pairs.

mod concat;
mod instruction;
mod link;
mod segment;
mod xfile;

pub use concat::{build_wrapper_concat, build_xfile_concat};
pub use instruction::{build_xfile_instruction, InstructionTemplate};
pub use link::{canonical_patent_number, link_wrapper, PatentIndex, Resolution, WrapperLink};
pub use xfile::{
    extract_xfile_pairs, extract_xfile_pairs_with, verbatim_in_patent, ComparisonRef,
    ReferenceExtractor, RuleBasedExtractor, XFileExtraction, XFileOptions,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("examined patent {0} not present in the index")]
    ExaminedMissing(String),
    #[error("no resolved cited patent to concatenate")]
    NothingToConcat,
    #[error("pairs reference more than one patent pair")]
    InconsistentPairs,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("template error: {0}")]
    Template(String),
}

/// Granularity of an extracted text pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLevel {
    Paragraph,
    Sentence,
}

/// A pair of technically-linked text spans, one from the patent under
/// examination and one from a cited patent, located through the examiner's
/// comparison comment. Both texts are verbatim substrings of their source
/// patent fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XFilePair {
    pub level: PairLevel,
    pub examined_text: String,
    pub cited_text: String,
    pub examined_pn: String,
    pub cited_pn: String,
    /// The wrapper comment span that linked the two texts.
    pub wrapper_span: String,
}

impl XFilePair {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.examined_text.is_empty() || self.cited_text.is_empty() {
            return Err(SynthesisError::Invalid("pair texts must be nonempty".to_string()));
        }
        if self.examined_pn == self.cited_pn {
            return Err(SynthesisError::Invalid("pair must span two distinct patents".to_string()));
        }
        Ok(())
    }
}

/// What kind of synthetic document a text is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    WrapperConcat,
    XfileConcat,
    XfileInstruction,
}

/// A synthesized training document with its source record ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticDoc {
    pub text: String,
    pub kind: SynthKind,
    pub provenance: Vec<String>,
}

impl SyntheticDoc {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.text.is_empty() {
            return Err(SynthesisError::Invalid("empty text".to_string()));
        }
        if self.provenance.is_empty() {
            return Err(SynthesisError::Invalid("empty provenance".to_string()));
        }
        Ok(())
    }
}
