//! Rule-based and classifier-backed quality filtering.

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

fn default_min_length() -> usize {
    1
}

fn default_symbol_ratio() -> f64 {
    1.0
}

/// Keyword, length, symbol-ratio, and classifier rules. The classifier is a
/// runtime plug-in; only its threshold lives in config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRuleSet {
    #[serde(default)]
    pub blacklist_keywords: Vec<String>,
    #[serde(default)]
    pub whitelist_keywords: Vec<String>,
    #[serde(default = "default_min_length")]
    pub min_length_chars: usize,
    #[serde(default = "default_symbol_ratio")]
    pub max_symbol_ratio: f64,
    /// Documents scoring below this are removed when a classifier is wired in.
    #[serde(default)]
    pub classifier_threshold: Option<f64>,
}

impl Default for FilterRuleSet {
    fn default() -> Self {
        Self {
            blacklist_keywords: Vec::new(),
            whitelist_keywords: Vec::new(),
            min_length_chars: default_min_length(),
            max_symbol_ratio: default_symbol_ratio(),
            classifier_threshold: None,
        }
    }
}

impl FilterRuleSet {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_length_chars < 1 {
            return Err("min_length_chars must be >= 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.max_symbol_ratio) {
            return Err("max_symbol_ratio must be in [0, 1]".to_string());
        }
        if let Some(t) = self.classifier_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err("classifier_threshold must be in [0, 1]".to_string());
            }
        }
        Ok(())
    }
}

/// Scoring plug-in mapping a document to a quality score in [0, 1].
pub trait QualityClassifier: Sync {
    fn score(&self, doc: &Document) -> Result<f64, String>;
}

/// Why a document was removed. A removed document lists every rule it hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    Blacklist,
    MinLength,
    MaxSymbolRatio,
    Classifier,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovedDocument {
    pub id: String,
    pub reasons: Vec<FilterReason>,
}

#[derive(Debug)]
pub struct FilterReport {
    pub kept: Vec<Document>,
    pub removed: Vec<RemovedDocument>,
    /// Ids whose classifier call failed; these pass through (fail-open) but
    /// are tagged so a broken model never silently drops corpus.
    pub classifier_errors: Vec<String>,
}

/// Applies the rule set to each document. A document is removed iff it hits
/// a blacklist keyword with no whitelist override, is shorter than
/// `min_length_chars`, exceeds `max_symbol_ratio`, or scores below the
/// classifier threshold. Document text is never mutated.
pub fn filter_documents(
    docs: Vec<Document>,
    rules: &FilterRuleSet,
    classifier: Option<&dyn QualityClassifier>,
) -> FilterReport {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    let mut classifier_errors = Vec::new();

    for doc in docs {
        let mut reasons = Vec::new();

        let blacklisted = rules.blacklist_keywords.iter().any(|k| !k.is_empty() && doc.text.contains(k.as_str()));
        let whitelisted = rules.whitelist_keywords.iter().any(|k| !k.is_empty() && doc.text.contains(k.as_str()));
        if blacklisted && !whitelisted {
            reasons.push(FilterReason::Blacklist);
        }

        if doc.text.chars().count() < rules.min_length_chars {
            reasons.push(FilterReason::MinLength);
        }

        if symbol_ratio(&doc.text) > rules.max_symbol_ratio {
            reasons.push(FilterReason::MaxSymbolRatio);
        }

        if let (Some(threshold), Some(model)) = (rules.classifier_threshold, classifier) {
            match model.score(&doc) {
                Ok(score) => {
                    if score < threshold {
                        reasons.push(FilterReason::Classifier);
                    }
                }
                Err(_) => classifier_errors.push(doc.id.clone()),
            }
        }

        if reasons.is_empty() {
            kept.push(doc);
        } else {
            removed.push(RemovedDocument { id: doc.id, reasons });
        }
    }

    FilterReport { kept, removed, classifier_errors }
}

/// Fraction of characters that are neither alphanumeric nor whitespace.
/// Unicode-aware, so CJK ideographs count as letters.
fn symbol_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut symbols = 0usize;
    for c in text.chars() {
        total += 1;
        if !c.is_alphanumeric() && !c.is_whitespace() {
            symbols += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        symbols as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, Language};

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text, Category::Web, Language::En)
    }

    struct FixedScore(f64);
    impl QualityClassifier for FixedScore {
        fn score(&self, _doc: &Document) -> Result<f64, String> {
            Ok(self.0)
        }
    }

    struct Broken;
    impl QualityClassifier for Broken {
        fn score(&self, _doc: &Document) -> Result<f64, String> {
            Err("model offline".to_string())
        }
    }

    #[test]
    fn blacklist_keyword_removes_document() {
        let rules = FilterRuleSet {
            blacklist_keywords: vec!["casino".to_string()],
            ..FilterRuleSet::default()
        };
        let report = filter_documents(vec![doc("a", "visit our casino today")], &rules, None);
        assert!(report.kept.is_empty());
        assert_eq!(report.removed[0].reasons, vec![FilterReason::Blacklist]);
    }

    #[test]
    fn whitelist_overrides_blacklist() {
        let rules = FilterRuleSet {
            blacklist_keywords: vec!["casino".to_string()],
            whitelist_keywords: vec!["patent".to_string()],
            ..FilterRuleSet::default()
        };
        let report = filter_documents(vec![doc("a", "a patent dispute about a casino")], &rules, None);
        assert_eq!(report.kept.len(), 1);
    }

    #[test]
    fn short_document_removed_with_min_length_reason() {
        let rules = FilterRuleSet { min_length_chars: 10, ..FilterRuleSet::default() };
        let report = filter_documents(vec![doc("a", "hi")], &rules, None);
        assert_eq!(report.removed[0].reasons, vec![FilterReason::MinLength]);
    }

    #[test]
    fn clean_document_kept_without_classifier() {
        let rules = FilterRuleSet::default();
        let report = filter_documents(vec![doc("a", "an ordinary sentence")], &rules, None);
        assert_eq!(report.kept.len(), 1);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn reasons_enumerate_every_triggered_rule() {
        let rules = FilterRuleSet {
            blacklist_keywords: vec!["@@".to_string()],
            min_length_chars: 10,
            max_symbol_ratio: 0.2,
            ..FilterRuleSet::default()
        };
        let report = filter_documents(vec![doc("a", "@@#$%")], &rules, None);
        assert_eq!(
            report.removed[0].reasons,
            vec![FilterReason::Blacklist, FilterReason::MinLength, FilterReason::MaxSymbolRatio]
        );
    }

    #[test]
    fn classifier_below_threshold_removes() {
        let rules = FilterRuleSet { classifier_threshold: Some(0.5), ..FilterRuleSet::default() };
        let report = filter_documents(vec![doc("a", "text")], &rules, Some(&FixedScore(0.2)));
        assert_eq!(report.removed[0].reasons, vec![FilterReason::Classifier]);
    }

    #[test]
    fn broken_classifier_fails_open_with_tag() {
        let rules = FilterRuleSet { classifier_threshold: Some(0.5), ..FilterRuleSet::default() };
        let report = filter_documents(vec![doc("a", "text")], &rules, Some(&Broken));
        assert_eq!(report.kept.len(), 1);
        assert_eq!(report.classifier_errors, vec!["a".to_string()]);
    }

    #[test]
    fn filtering_never_mutates_text() {
        let original = "  spaced   text with UPPER and 标点。  ";
        let rules = FilterRuleSet::default();
        let report = filter_documents(vec![doc("a", original)], &rules, None);
        assert_eq!(report.kept[0].text, original);
    }

    #[test]
    fn cjk_counts_as_letters_for_symbol_ratio() {
        let rules = FilterRuleSet { max_symbol_ratio: 0.3, ..FilterRuleSet::default() };
        let report = filter_documents(vec![doc("a", "一种光电接收器，包括壳体。")], &rules, None);
        assert_eq!(report.kept.len(), 1);
    }
}
