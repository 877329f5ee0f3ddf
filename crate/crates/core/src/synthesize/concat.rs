//! Scaffolded concatenation documents: examined claims, cited patent full
//! text, and the file-wrapper comments, laid out under fixed section
//! headers so every synthesized corpus shares one shape.

use crate::corpus::PatentRecord;
use crate::synthesize::link::WrapperLink;
use crate::synthesize::{SynthKind, SyntheticDoc, SynthesisError};

fn push_examined_header(out: &mut String, pn: &str) {
    out.push_str("Patent under Examnation(PN:");
    out.push_str(pn);
    out.push_str("):\n");
}

fn push_public_block(out: &mut String, patent: &PatentRecord) {
    out.push_str("Public Patent(PN:");
    out.push_str(&patent.patent_number);
    out.push_str(")\n");
    if !patent.claims.is_empty() {
        out.push_str("Claims:\n");
        for claim in &patent.claims {
            out.push_str(claim);
            out.push('\n');
        }
    }
    if !patent.description.is_empty() {
        out.push_str("Description:\n");
        for para in &patent.description {
            out.push_str(&para.text);
            out.push('\n');
        }
    }
}

/// Concatenates the examined patent's claims, each resolved cited patent's
/// claims and description, and the wrapper comments, in that order. Block
/// headers are fixed; empty sections are omitted rather than left as bare
/// headers. Fails if no cited patent resolved.
pub fn build_wrapper_concat(link: &WrapperLink) -> Result<SyntheticDoc, SynthesisError> {
    if link.cited.is_empty() {
        return Err(SynthesisError::NothingToConcat);
    }

    let mut text = String::new();
    push_examined_header(&mut text, &link.examined.patent_number);
    if !link.examined.claims.is_empty() {
        text.push_str("Claims:\n");
        for claim in &link.examined.claims {
            text.push_str(claim);
            text.push('\n');
        }
    }
    for cited in &link.cited {
        push_public_block(&mut text, cited);
    }
    text.push_str("File Wrapper:\n");
    for section in &link.wrapper.comment_sections {
        text.push_str(section);
        text.push('\n');
    }

    let mut provenance = vec![link.examined.patent_number.clone()];
    provenance.extend(link.cited.iter().map(|p| p.patent_number.clone()));
    provenance.push(format!("wrapper:{}", link.wrapper.examined_patent_number));

    let doc = SyntheticDoc { text, kind: SynthKind::WrapperConcat, provenance };
    doc.validate()?;
    Ok(doc)
}

/// Recombines two cross-referenced patents into one document: the examined
/// claims followed by the cited patent's full text under the same scaffold,
/// without the wrapper block.
pub fn build_xfile_concat(
    examined: &PatentRecord,
    cited: &PatentRecord,
) -> Result<SyntheticDoc, SynthesisError> {
    let mut text = String::new();
    push_examined_header(&mut text, &examined.patent_number);
    if !examined.claims.is_empty() {
        text.push_str("Claims:\n");
        for claim in &examined.claims {
            text.push_str(claim);
            text.push('\n');
        }
    }
    push_public_block(&mut text, cited);

    let doc = SyntheticDoc {
        text,
        kind: SynthKind::XfileConcat,
        provenance: vec![examined.patent_number.clone(), cited.patent_number.clone()],
    };
    doc.validate()?;
    Ok(doc)
}
