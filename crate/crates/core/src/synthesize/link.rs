//! Patent-number canonicalization and wrapper-to-patent resolution.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{FileWrapperRecord, PatentRecord};
use crate::synthesize::SynthesisError;

/// Canonical form of a patent number: uppercase, alphanumerics only, with
/// a trailing kind code (one letter plus optional digit) stripped. Office
/// variants like "US 2014/0078104 A1", "US2014/0078104A1", and
/// "us 2014 0078104" all collapse to "US20140078104".
pub fn canonical_patent_number(raw: &str) -> String {
    let mut compact: String = raw
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_uppercase())
        .collect();

    // Strip one trailing kind code if digits still remain without it.
    let bytes = compact.as_bytes();
    let mut cut = compact.len();
    if bytes.last().is_some_and(u8::is_ascii_digit)
        && compact.len() >= 2
        && bytes[compact.len() - 2].is_ascii_uppercase()
    {
        cut = compact.len() - 2;
    } else if bytes.last().is_some_and(u8::is_ascii_uppercase) {
        cut = compact.len() - 1;
    }
    if cut < compact.len() && compact[..cut].bytes().any(|b| b.is_ascii_digit()) {
        compact.truncate(cut);
    }
    compact
}

/// Read-only lookup from canonical patent number to record.
#[derive(Debug, Clone, Default)]
pub struct PatentIndex {
    by_canonical: HashMap<String, PatentRecord>,
}

impl PatentIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = PatentRecord>) -> Self {
        let mut index = Self::new();
        for rec in records {
            index.insert(rec);
        }
        index
    }

    pub fn insert(&mut self, record: PatentRecord) {
        self.by_canonical.insert(canonical_patent_number(&record.patent_number), record);
    }

    pub fn get(&self, patent_number: &str) -> Option<&PatentRecord> {
        self.by_canonical.get(&canonical_patent_number(patent_number))
    }

    pub fn len(&self) -> usize {
        self.by_canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_canonical.is_empty()
    }
}

/// Whether a wrapper-referenced patent number resolved against the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Resolved,
    Missing,
}

/// A wrapper joined to its examined patent and whichever cited patents the
/// index could resolve.
#[derive(Debug, Clone)]
pub struct WrapperLink {
    pub examined: PatentRecord,
    pub cited: Vec<PatentRecord>,
    pub wrapper: FileWrapperRecord,
    /// Original cited numbers mapped to their resolution state.
    pub resolution: BTreeMap<String, Resolution>,
}

/// Resolves a wrapper's patent numbers against the index. Unresolved cited
/// numbers are flagged and the link is still returned; an unresolved
/// examined patent makes the link unusable and is an error.
pub fn link_wrapper(
    wrapper: &FileWrapperRecord,
    index: &PatentIndex,
) -> Result<WrapperLink, SynthesisError> {
    let violations = crate::corpus::validate_wrapper(wrapper);
    if !violations.is_empty() {
        return Err(SynthesisError::Invalid(
            violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ));
    }

    let examined = index
        .get(&wrapper.examined_patent_number)
        .cloned()
        .ok_or_else(|| SynthesisError::ExaminedMissing(wrapper.examined_patent_number.clone()))?;

    let mut cited = Vec::new();
    let mut resolution = BTreeMap::new();
    for pn in &wrapper.cited_patent_numbers {
        match index.get(pn) {
            Some(rec) => {
                cited.push(rec.clone());
                resolution.insert(pn.clone(), Resolution::Resolved);
            }
            None => {
                resolution.insert(pn.clone(), Resolution::Missing);
            }
        }
    }

    Ok(WrapperLink { examined, cited, wrapper: wrapper.clone(), resolution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;

    fn patent(pn: &str) -> PatentRecord {
        PatentRecord {
            patent_number: pn.to_string(),
            claims: vec!["1. A device.".to_string()],
            description: vec![],
            abstract_text: String::new(),
            ipc_code: String::new(),
            family_id: String::new(),
            language: Language::En,
        }
    }

    #[test]
    fn canonicalization_unifies_office_variants() {
        assert_eq!(canonical_patent_number("US 2014/0078104 A1"), "US20140078104");
        assert_eq!(canonical_patent_number("US2014/0078104A1"), "US20140078104");
        assert_eq!(canonical_patent_number("us 2014 0078104"), "US20140078104");
        assert_eq!(canonical_patent_number("CN207366793U"), "CN207366793");
        assert_eq!(canonical_patent_number("CN111865430A"), "CN111865430");
        assert_eq!(canonical_patent_number("US 2023/0333692 A1"), "US20230333692");
    }

    #[test]
    fn canonicalization_keeps_pure_letter_prefixes() {
        // no digits would remain, so nothing is stripped
        assert_eq!(canonical_patent_number("US"), "US");
        assert_eq!(canonical_patent_number(""), "");
    }

    #[test]
    fn index_lookup_is_format_insensitive() {
        let index = PatentIndex::from_records([patent("US 2014/0078104 A1")]);
        assert!(index.get("US2014/0078104A1").is_some());
        assert!(index.get("us 2014/0078104").is_some());
        assert!(index.get("US 9999/9999999").is_none());
    }

    fn wrapper(examined: &str, cited: &[&str]) -> FileWrapperRecord {
        FileWrapperRecord {
            examined_patent_number: examined.to_string(),
            cited_patent_numbers: cited.iter().map(|s| s.to_string()).collect(),
            comment_sections: vec!["comment".to_string()],
            language: Language::En,
        }
    }

    #[test]
    fn link_resolves_both_sides() {
        let index =
            PatentIndex::from_records([patent("US 2023/0333692 A1"), patent("US 2014/0078104 A1")]);
        let w = wrapper("US 2023/0333692 A1", &["US 2014/0078104 A1"]);
        let link = link_wrapper(&w, &index).unwrap();
        assert_eq!(link.cited.len(), 1);
        assert_eq!(link.resolution["US 2014/0078104 A1"], Resolution::Resolved);
    }

    #[test]
    fn absent_cited_patent_is_flagged_missing() {
        let index = PatentIndex::from_records([patent("US 2023/0333692 A1")]);
        let w = wrapper("US 2023/0333692 A1", &["US 2014/0078104 A1"]);
        let link = link_wrapper(&w, &index).unwrap();
        assert!(link.cited.is_empty());
        assert_eq!(link.resolution["US 2014/0078104 A1"], Resolution::Missing);
    }

    #[test]
    fn unresolved_examined_patent_is_fatal() {
        let index = PatentIndex::from_records([patent("US 2014/0078104 A1")]);
        let w = wrapper("US 2023/0333692 A1", &["US 2014/0078104 A1"]);
        let err = link_wrapper(&w, &index).unwrap_err();
        assert_eq!(err, SynthesisError::ExaminedMissing("US 2023/0333692 A1".to_string()));
    }

    #[test]
    fn empty_cited_list_fails_validation_upstream() {
        let index = PatentIndex::from_records([patent("US 2023/0333692 A1")]);
        let w = wrapper("US 2023/0333692 A1", &[]);
        assert!(matches!(link_wrapper(&w, &index), Err(SynthesisError::Invalid(_))));
    }
}
