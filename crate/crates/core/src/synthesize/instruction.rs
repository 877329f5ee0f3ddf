//! Instruction-style training samples that wrap extracted text pairs in a
//! two-turn compare-these-patents template.

use std::fs;
use std::path::Path;

use crate::corpus::PatentRecord;
use crate::synthesize::{SynthKind, SyntheticDoc, SynthesisError, XFilePair};

/// Built-in two-turn template. The human turn embeds both patents' claims
/// and description; the model turn enumerates the extracted pairs.
const XFILE_INSTRUCTION_EN: &str = "human:\n\
Here are two patents, compare these two patents and extract the sentence pairs from each which is technically closest in presentation.\n\
Here is the claims and description from Patent {{examined_pn}}:\n\
{{examined_body}}\n\
Here is the claims and description from Patent {{cited_pn}}:\n\
{{cited_body}}\n\
gpt:\n\
Here are the technically closest sentence pairs in these two patents\u{ff1a}\n\
{{pairs}}";

/// A text template with `{{placeholder}}` slots.
#[derive(Debug, Clone)]
pub struct InstructionTemplate {
    body: String,
}

impl InstructionTemplate {
    /// Looks up a shipped template by id.
    pub fn builtin(template_id: &str) -> Option<Self> {
        match template_id {
            "xfile-instruction-en" => Some(Self { body: XFILE_INSTRUCTION_EN.to_string() }),
            _ => None,
        }
    }

    /// Loads a template from a text file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SynthesisError> {
        let body = fs::read_to_string(path.as_ref())
            .map_err(|e| SynthesisError::Template(format!("cannot read template: {e}")))?;
        Ok(Self { body })
    }

    pub fn render(&self, slots: &[(&str, &str)]) -> String {
        let mut out = self.body.clone();
        for (name, value) in slots {
            out = out.replace(&format!("{{{{{name}}}}}"), value);
        }
        out
    }
}

fn patent_body(patent: &PatentRecord) -> String {
    let mut body = patent.claims.join("\n");
    if !patent.description.is_empty() {
        if !body.is_empty() {
            body.push('\n');
        }
        body.push_str(
            &patent.description.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n"),
        );
    }
    body
}

fn render_pairs(pairs: &[XFilePair]) -> String {
    let mut out = String::new();
    for (i, pair) in pairs.iter().enumerate() {
        out.push_str(&format!(
            "{}.\n{}\u{ff08}from {}\u{ff09}\u{ff0c}\n{}\u{ff08}from {}\u{ff09}\u{ff1b}\n",
            i + 1,
            pair.examined_text,
            pair.examined_pn,
            pair.cited_text,
            pair.cited_pn
        ));
    }
    out
}

/// Renders the two-turn instruction sample for one patent pair. All pairs
/// must reference the same (examined, cited) patents, which must match the
/// records supplied.
pub fn build_xfile_instruction(
    pairs: &[XFilePair],
    examined: &PatentRecord,
    cited: &PatentRecord,
    template: &InstructionTemplate,
) -> Result<SyntheticDoc, SynthesisError> {
    if pairs.is_empty() {
        return Err(SynthesisError::Invalid("no pairs to render".to_string()));
    }
    let (e_pn, c_pn) = (&pairs[0].examined_pn, &pairs[0].cited_pn);
    if pairs.iter().any(|p| &p.examined_pn != e_pn || &p.cited_pn != c_pn) {
        return Err(SynthesisError::InconsistentPairs);
    }
    if e_pn != &examined.patent_number || c_pn != &cited.patent_number {
        return Err(SynthesisError::Invalid("pairs do not reference the supplied patents".to_string()));
    }
    for pair in pairs {
        pair.validate()?;
    }

    let examined_body = patent_body(examined);
    let cited_body = patent_body(cited);
    let pairs_text = render_pairs(pairs);
    let text = template.render(&[
        ("examined_pn", e_pn.as_str()),
        ("cited_pn", c_pn.as_str()),
        ("examined_body", examined_body.as_str()),
        ("cited_body", cited_body.as_str()),
        ("pairs", pairs_text.as_str()),
    ]);

    let doc = SyntheticDoc {
        text,
        kind: SynthKind::XfileInstruction,
        provenance: vec![e_pn.clone(), c_pn.clone()],
    };
    doc.validate()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use crate::synthesize::PairLevel;

    fn patent(pn: &str, claim: &str) -> PatentRecord {
        PatentRecord {
            patent_number: pn.to_string(),
            claims: vec![claim.to_string()],
            description: vec![],
            abstract_text: String::new(),
            ipc_code: String::new(),
            family_id: String::new(),
            language: Language::En,
        }
    }

    fn pair(e_text: &str, c_text: &str) -> XFilePair {
        XFilePair {
            level: PairLevel::Sentence,
            examined_text: e_text.to_string(),
            cited_text: c_text.to_string(),
            examined_pn: "US 1".to_string(),
            cited_pn: "US 2".to_string(),
            wrapper_span: "span".to_string(),
        }
    }

    #[test]
    fn renders_two_turn_scaffold_with_numbered_pairs() {
        let template = InstructionTemplate::builtin("xfile-instruction-en").unwrap();
        let doc = build_xfile_instruction(
            &[pair("an electronic device", "a display device"), pair("second pair e", "second pair c")],
            &patent("US 1", "1. An electronic device."),
            &patent("US 2", "1. A display device."),
            &template,
        )
        .unwrap();
        assert!(doc.text.starts_with("human:\n"));
        assert!(doc.text.contains("gpt:\n"));
        assert!(doc.text.contains("Here is the claims and description from Patent US 1:"));
        assert!(doc.text.contains("1.\nan electronic device\u{ff08}from US 1\u{ff09}\u{ff0c}"));
        assert!(doc.text.contains("2.\nsecond pair e"));
        assert!(doc.text.contains("a display device\u{ff08}from US 2\u{ff09}\u{ff1b}"));
        assert_eq!(doc.kind, SynthKind::XfileInstruction);
        // pairs render in input order
        let first = doc.text.find("an electronic device\u{ff08}").unwrap();
        let second = doc.text.find("second pair e").unwrap();
        assert!(first < second);
    }

    #[test]
    fn empty_pairs_are_a_precondition_error() {
        let template = InstructionTemplate::builtin("xfile-instruction-en").unwrap();
        let err = build_xfile_instruction(&[], &patent("US 1", "c"), &patent("US 2", "c"), &template)
            .unwrap_err();
        assert!(matches!(err, SynthesisError::Invalid(_)));
    }

    #[test]
    fn mixed_patent_numbers_are_rejected() {
        let template = InstructionTemplate::builtin("xfile-instruction-en").unwrap();
        let mut other = pair("x", "y");
        other.cited_pn = "US 3".to_string();
        let err = build_xfile_instruction(
            &[pair("a", "b"), other],
            &patent("US 1", "c"),
            &patent("US 2", "c"),
            &template,
        )
        .unwrap_err();
        assert_eq!(err, SynthesisError::InconsistentPairs);
    }

    #[test]
    fn unknown_builtin_id_is_none_and_files_load() {
        assert!(InstructionTemplate::builtin("nope").is_none());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.txt");
        std::fs::write(&path, "X {{examined_pn}} Y {{pairs}}").unwrap();
        let template = InstructionTemplate::from_file(&path).unwrap();
        let doc = build_xfile_instruction(
            &[pair("e", "c")],
            &patent("US 1", "claim"),
            &patent("US 2", "claim"),
            &template,
        )
        .unwrap();
        assert!(doc.text.starts_with("X US 1 Y"));
    }
}
