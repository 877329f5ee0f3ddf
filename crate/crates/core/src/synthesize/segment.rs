//! Offset-preserving sentence and clause segmentation.
//!
//! Spans index into the original text, so any assembled run of clauses is a
//! verbatim substring of its source. English sentences end at {. ! ?} plus
//! any closing quotes; Chinese sentences end at {。！？；}. Clauses split
//! within a sentence at commas, semicolons, and colons in either script.

use crate::corpus::Language;

/// Half-open byte range into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

fn is_en_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_zh_terminal(c: char) -> bool {
    matches!(c, '。' | '！' | '？' | '；')
}

fn is_closing_quote(c: char) -> bool {
    matches!(c, '”' | '"' | '\'' | '’' | ')' | '）' | '」' | '』')
}

/// Clause separators inside a sentence, both scripts.
fn is_clause_separator(c: char) -> bool {
    matches!(c, ',' | ';' | ':' | '，' | '：')
}

/// Sentence spans of `text`. Terminal punctuation and closing quotes stay
/// inside the sentence; inter-sentence whitespace stays outside.
pub fn sentences(text: &str, language: Language) -> Vec<Span> {
    let is_terminal: fn(char) -> bool = match language {
        Language::En => is_en_terminal,
        Language::Zh => is_zh_terminal,
    };

    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        if !is_terminal(c) {
            continue;
        }
        // For English a period only terminates before whitespace, a closing
        // quote, or end of text, so "2014/0078104" stays whole.
        let next = chars.peek().map(|&(_, n)| n);
        let terminates = match language {
            Language::Zh => true,
            Language::En => match next {
                None => true,
                Some(n) => n.is_whitespace() || is_closing_quote(n),
            },
        };
        if !terminates {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, n)) = chars.peek() {
            if is_closing_quote(n) {
                chars.next();
                end = j + n.len_utf8();
            } else {
                break;
            }
        }
        spans.push(Span { start: start.take().unwrap(), end });
    }
    if let Some(s) = start {
        let end = text.len();
        if s < end {
            spans.push(Span { start: s, end });
        }
    }
    spans
}

/// Clause spans within one sentence span. Separators sit between clauses
/// and belong to neither; the final clause keeps the sentence terminal.
pub fn clauses(text: &str, sentence: Span) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = sentence.start;
    let slice = &text[sentence.start..sentence.end];
    for (off, c) in slice.char_indices() {
        if is_clause_separator(c) {
            let abs = sentence.start + off;
            push_trimmed(text, Span { start, end: abs }, &mut spans);
            start = abs + c.len_utf8();
        }
    }
    push_trimmed(text, Span { start, end: sentence.end }, &mut spans);
    spans
}

fn push_trimmed(text: &str, span: Span, out: &mut Vec<Span>) {
    let raw = span.text(text);
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return;
    }
    let lead = raw.len() - raw.trim_start().len();
    let trail = raw.len() - raw.trim_end().len();
    out.push(Span { start: span.start + lead, end: span.end - trail });
}

/// Fragments of free text for overlap matching: split at clause separators
/// and any sentence terminal of either script. Used on wrapper fragments,
/// which can mix both languages.
pub fn rough_clauses(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        if is_clause_separator(c) || is_en_terminal(c) || is_zh_terminal(c) {
            push_trimmed(text, Span { start, end: i }, &mut spans);
            start = i + c.len_utf8();
        }
    }
    push_trimmed(text, Span { start, end: text.len() }, &mut spans);
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts<'a>(source: &'a str, spans: &[Span]) -> Vec<&'a str> {
        spans.iter().map(|s| s.text(source)).collect()
    }

    #[test]
    fn english_sentences_split_on_terminals_with_quotes() {
        let text = "First sentence. Second one! Is this third? “Quoted end.” Trailing";
        let spans = sentences(text, Language::En);
        assert_eq!(
            texts(text, &spans),
            vec!["First sentence.", "Second one!", "Is this third?", "“Quoted end.”", "Trailing"]
        );
    }

    #[test]
    fn english_periods_inside_numbers_do_not_split() {
        let text = "Claims priority to 2014/0078104 filed 1.5 years ago. Next.";
        let spans = sentences(text, Language::En);
        assert_eq!(spans.len(), 2);
    }

    #[test]
    fn leading_claim_number_becomes_its_own_sentence() {
        let text = "1. An electronic device comprising: a display layer.";
        let spans = sentences(text, Language::En);
        assert_eq!(texts(text, &spans)[0], "1.");
        assert!(texts(text, &spans)[1].starts_with("An electronic device"));
    }

    #[test]
    fn chinese_sentences_split_on_cjk_terminals() {
        let text = "一种光电接收器。包括壳体；还包括支架！";
        let spans = sentences(text, Language::Zh);
        assert_eq!(texts(text, &spans), vec!["一种光电接收器。", "包括壳体；", "还包括支架！"]);
    }

    #[test]
    fn ascii_period_does_not_end_chinese_sentences() {
        let text = "1.一种光电接收器，其特征在于。";
        let spans = sentences(text, Language::Zh);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].text(text), text);
    }

    #[test]
    fn clauses_keep_offsets_and_terminal() {
        let text = "An electronic device comprising: a display layer; a sensor layer, done.";
        let sent = sentences(text, Language::En)[0];
        let spans = clauses(text, sent);
        assert_eq!(
            texts(text, &spans),
            vec!["An electronic device comprising", "a display layer", "a sensor layer", "done."]
        );
        // spans are verbatim substrings by construction
        for s in &spans {
            assert!(!text[s.start..s.end].is_empty());
        }
    }

    #[test]
    fn chinese_clauses_split_on_fullwidth_commas_only() {
        let text = "所述接收器包括壳体、支架和元件，所述壳体设有安装面。";
        let sent = sentences(text, Language::Zh)[0];
        let spans = clauses(text, sent);
        assert_eq!(
            texts(text, &spans),
            vec!["所述接收器包括壳体、支架和元件", "所述壳体设有安装面。"]
        );
    }

    #[test]
    fn clause_run_reassembles_verbatim() {
        let text = "alpha: beta; gamma, delta.";
        let sent = sentences(text, Language::En)[0];
        let spans = clauses(text, sent);
        let run = &text[spans[0].start..spans[2].end];
        assert_eq!(run, "alpha: beta; gamma");
    }
}
