//! Cross-patent text-pair extraction.
//!
//! Examiner comments restate claim language from the patent under
//! examination next to quoted or paraphrased passages of a cited patent,
//! naming the claim and the cited paragraph range. Extraction runs in
//! three stages per comment span: resolve which cited patent and claim the
//! span compares (regex rules standing in for a trained recognizer, behind
//! a pluggable trait), cut the paragraph-level pair from the named claim
//! and paragraph range, then locate the sentence-level pair by matching
//! the span's quote/anchor fragments back to clause runs of the source
//! texts. All emitted texts are verbatim substrings of their patents
//! because runs are assembled from byte offsets, never re-synthesized.

use regex::Regex;

use crate::corpus::{Language, PatentRecord};
use crate::preprocess::shingle_set;
use crate::synthesize::link::{canonical_patent_number, WrapperLink};
use crate::synthesize::segment::{clauses, rough_clauses, sentences, Span};
use crate::synthesize::{PairLevel, XFilePair};

/// One comparison reference inside a wrapper comment: which examined claim
/// is being compared against which cited description paragraphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRef {
    pub claim_number: usize,
    pub para_start: u32,
    pub para_end: u32,
    /// Byte position of the paragraph reference inside the span, used to
    /// associate it with the nearest preceding patent-number mention.
    pub position: usize,
}

/// Pluggable reference extraction. The default is rule-based; a learned
/// recognizer can be swapped in behind the same trait.
pub trait ReferenceExtractor {
    fn references(&self, section: &str) -> Vec<ComparisonRef>;
    /// Patent-number-like mentions with their byte positions.
    fn patent_numbers(&self, section: &str) -> Vec<(usize, String)>;
}

/// Regex-rule extractor covering the examiner phrasings in English and
/// Chinese office actions.
pub struct RuleBasedExtractor {
    strong_claim: Regex,
    weak_claim: Regex,
    para_en: Regex,
    para_zh: Regex,
    patent_number: Regex,
}

impl Default for RuleBasedExtractor {
    fn default() -> Self {
        Self {
            // subject-position claim mentions take precedence over passing
            // references like "the device of claim 1"
            strong_claim: Regex::new(r"(?i)instant\s+claims?\s+(\d+)|权利要求\s*(\d+)").unwrap(),
            weak_claim: Regex::new(r"(?i)claims?\s+(\d+)").unwrap(),
            para_en: Regex::new(r"(?i)paragraphs?\s+(\d+)(?:\s*(?:-|–|—|~|to|through)\s*(\d+))?").unwrap(),
            para_zh: Regex::new(r"说明书(?:第)?\s*(\d+)(?:\s*[-–—~～至]\s*(\d+))?\s*段").unwrap(),
            patent_number: Regex::new(
                r"[A-Z]{2}\s*[0-9]{4}/[0-9]{6,8}\s*[A-Z][0-9]?|[A-Z]{2}[0-9]{6,12}[A-Z]?[0-9]?",
            )
            .unwrap(),
        }
    }
}

impl ReferenceExtractor for RuleBasedExtractor {
    fn references(&self, section: &str) -> Vec<ComparisonRef> {
        let parse = |m: Option<regex::Match>| m.and_then(|x| x.as_str().parse::<usize>().ok());
        let mut strong: Vec<(usize, usize)> = Vec::new();
        for cap in self.strong_claim.captures_iter(section) {
            let n = parse(cap.get(1)).or_else(|| parse(cap.get(2)));
            if let Some(n) = n {
                strong.push((cap.get(0).unwrap().start(), n));
            }
        }
        let mut weak: Vec<(usize, usize)> = Vec::new();
        for cap in self.weak_claim.captures_iter(section) {
            if let Some(n) = parse(cap.get(1)) {
                weak.push((cap.get(0).unwrap().start(), n));
            }
        }

        let mut refs = Vec::new();
        for re in [&self.para_en, &self.para_zh] {
            for cap in re.captures_iter(section) {
                let position = cap.get(0).unwrap().start();
                let Some(start) = parse(cap.get(1)) else { continue };
                let end = parse(cap.get(2)).unwrap_or(start);
                let claim = nearest_preceding(&strong, position)
                    .or_else(|| nearest_preceding(&weak, position));
                let Some(claim_number) = claim else { continue };
                refs.push(ComparisonRef {
                    claim_number,
                    para_start: start.min(end) as u32,
                    para_end: start.max(end) as u32,
                    position,
                });
            }
        }
        refs.sort_by_key(|r| r.position);
        refs.dedup_by(|a, b| {
            a.claim_number == b.claim_number && a.para_start == b.para_start && a.para_end == b.para_end
        });
        refs
    }

    fn patent_numbers(&self, section: &str) -> Vec<(usize, String)> {
        self.patent_number
            .find_iter(section)
            .map(|m| (m.start(), m.as_str().to_string()))
            .collect()
    }
}

fn nearest_preceding(mentions: &[(usize, usize)], position: usize) -> Option<usize> {
    mentions.iter().rev().find(|(pos, _)| *pos <= position).map(|(_, n)| *n)
}

/// Tunables for sentence-level pair location.
#[derive(Debug, Clone)]
pub struct XFileOptions {
    /// Shingle size for overlap matching; finer than dedup shingles so
    /// short paraphrased fragments still overlap.
    pub overlap_shingle_chars: usize,
    /// Quoted fragments shorter than this are term glosses, not passages.
    pub min_quote_chars: usize,
    /// A wrapper-fragment clause counts as located only above this score.
    pub min_clause_match: f64,
    /// Quote/anchor pairs scoring below this fall back to direct matching.
    pub min_pair_score: f64,
}

impl Default for XFileOptions {
    fn default() -> Self {
        Self {
            overlap_shingle_chars: 3,
            min_quote_chars: 12,
            min_clause_match: 0.2,
            min_pair_score: 0.05,
        }
    }
}

/// Extraction output: pairs in span order, plus skipped spans with reasons.
#[derive(Debug, Default)]
pub struct XFileExtraction {
    pub pairs: Vec<XFilePair>,
    pub skipped: Vec<String>,
}

/// Extracts paragraph- and sentence-level pairs with the rule extractor and
/// default options.
pub fn extract_xfile_pairs(link: &WrapperLink) -> XFileExtraction {
    extract_xfile_pairs_with(link, &RuleBasedExtractor::default(), &XFileOptions::default())
}

/// Extraction with a caller-supplied extractor and options.
pub fn extract_xfile_pairs_with(
    link: &WrapperLink,
    extractor: &dyn ReferenceExtractor,
    opts: &XFileOptions,
) -> XFileExtraction {
    let mut out = XFileExtraction::default();
    let lang = link.wrapper.language;
    let cited_by_canon: Vec<(String, &PatentRecord)> = link
        .cited
        .iter()
        .map(|p| (canonical_patent_number(&p.patent_number), p))
        .collect();
    if cited_by_canon.is_empty() {
        out.skipped.push("no resolved cited patents".to_string());
        return out;
    }
    // Examiner comments introduce a reference by number once and then cite
    // it by name, so the most recent mention carries across sections.
    let mut carried: Option<&PatentRecord> = None;

    for section in &link.wrapper.comment_sections {
        // patent mentions that resolve to a cited record, by position
        let mentions: Vec<(usize, &PatentRecord)> = extractor
            .patent_numbers(section)
            .into_iter()
            .filter_map(|(pos, raw)| {
                let canon = canonical_patent_number(&raw);
                cited_by_canon.iter().find(|(c, _)| *c == canon).map(|(_, p)| (pos, *p))
            })
            .collect();
        if let Some((_, last)) = mentions.last() {
            carried = Some(*last);
        }
        let refs = extractor.references(section);
        if refs.is_empty() {
            continue;
        }

        for r in refs {
            let cited = mentions
                .iter()
                .rev()
                .find(|(pos, _)| *pos <= r.position)
                .map(|(_, p)| *p)
                .or(carried)
                .unwrap_or(cited_by_canon[0].1);

            if r.claim_number == 0 {
                out.skipped.push("claim number 0 is not a valid reference".to_string());
                continue;
            }
            let Some(claim_text) = link.examined.claims.get(r.claim_number - 1) else {
                out.skipped.push(format!(
                    "claim {} not present in {}",
                    r.claim_number, link.examined.patent_number
                ));
                continue;
            };
            let paras = cited.paragraphs_in_range(r.para_start, r.para_end);
            if paras.is_empty() {
                out.skipped.push(format!(
                    "paragraphs {}-{} not present in {}",
                    r.para_start, r.para_end, cited.patent_number
                ));
                continue;
            }
            let cited_para_text =
                paras.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n");

            out.pairs.push(XFilePair {
                level: PairLevel::Paragraph,
                examined_text: claim_text.clone(),
                cited_text: cited_para_text,
                examined_pn: link.examined.patent_number.clone(),
                cited_pn: cited.patent_number.clone(),
                wrapper_span: section.clone(),
            });

            let examined_src = vec![SegmentedSource::new(claim_text, lang)];
            let cited_src: Vec<SegmentedSource> =
                paras.iter().map(|p| SegmentedSource::new(&p.text, lang)).collect();
            let sentence_pair = quote_guided_pair(section, &examined_src, &cited_src, opts)
                .or_else(|| direct_pair(&examined_src, &cited_src, opts));
            if let Some((examined_text, cited_text)) = sentence_pair {
                out.pairs.push(XFilePair {
                    level: PairLevel::Sentence,
                    examined_text,
                    cited_text,
                    examined_pn: link.examined.patent_number.clone(),
                    cited_pn: cited.patent_number.clone(),
                    wrapper_span: section.clone(),
                });
            }
        }
    }
    out
}

/// A source text segmented into sentences and their clauses.
struct SegmentedSource<'a> {
    text: &'a str,
    sents: Vec<(Span, Vec<Span>)>,
}

impl<'a> SegmentedSource<'a> {
    fn new(text: &'a str, language: Language) -> Self {
        let sents = sentences(text, language)
            .into_iter()
            .map(|s| {
                let cs = clauses(text, s);
                (s, cs)
            })
            .collect();
        Self { text, sents }
    }
}

/// Coverage of `frag`'s shingles by `candidate`: |F and C| / |F|. The
/// wrapper fragment abbreviates or lightly edits the source passage, so
/// what locates the original is how much of the fragment it covers.
fn coverage(frag: &str, candidate: &str, n: usize) -> f64 {
    if frag.chars().count() < n {
        return if candidate.contains(frag) { 1.0 } else { 0.0 };
    }
    let fs = shingle_set(frag, n);
    if fs.is_empty() {
        return 0.0;
    }
    let cs = shingle_set(candidate, n);
    fs.iter().filter(|s| cs.contains(*s)).count() as f64 / fs.len() as f64
}

fn jaccard(a: &str, b: &str, n: usize) -> f64 {
    let sa = shingle_set(a, n);
    let sb = shingle_set(b, n);
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count();
    (inter as f64) / (sa.len() + sb.len() - inter) as f64
}

/// A located clause run within one sentence of one source.
struct Located {
    text: String,
    quality: f64,
}

/// Finds the clause run best covering the wrapper fragment. Per sentence,
/// each fragment clause is matched to its best source clause; the winning
/// sentence is the one with the highest length-weighted mean coverage, and
/// the run spans the earliest to latest matched clause. Ties keep the
/// earliest sentence and clause.
fn locate(frag: &str, sources: &[SegmentedSource], opts: &XFileOptions) -> Option<Located> {
    let n = opts.overlap_shingle_chars;
    let frag_clauses: Vec<&str> = {
        let spans = rough_clauses(frag);
        spans.iter().map(|s| s.text(frag)).filter(|t| t.chars().count() >= 2).collect()
    };
    if frag_clauses.is_empty() {
        return None;
    }
    let weights: Vec<f64> = frag_clauses.iter().map(|t| t.chars().count() as f64).collect();
    let total_weight: f64 = weights.iter().sum();

    let mut best: Option<(f64, Located)> = None;
    for source in sources {
        for (_, clause_spans) in &source.sents {
            if clause_spans.is_empty() {
                continue;
            }
            let mut matched: Vec<Option<usize>> = vec![None; frag_clauses.len()];
            let mut quality = 0.0;
            for (fi, fc) in frag_clauses.iter().enumerate() {
                let mut best_clause: Option<(f64, usize)> = None;
                for (ci, cs) in clause_spans.iter().enumerate() {
                    let score = coverage(fc, cs.text(source.text), n);
                    if best_clause.is_none_or(|(q, _)| score > q) {
                        best_clause = Some((score, ci));
                    }
                }
                if let Some((score, ci)) = best_clause {
                    if score >= opts.min_clause_match {
                        matched[fi] = Some(ci);
                    }
                    quality += weights[fi] * score;
                }
            }
            quality /= total_weight;
            let hit: Vec<usize> = matched.iter().flatten().copied().collect();
            if hit.is_empty() {
                continue;
            }
            if best.as_ref().is_none_or(|(q, _)| quality > *q) {
                let lo = *hit.iter().min().unwrap();
                let hi = *hit.iter().max().unwrap();
                let run = Span { start: clause_spans[lo].start, end: clause_spans[hi].end };
                best = Some((quality, Located { text: run.text(source.text).to_string(), quality }));
            }
        }
    }
    best.map(|(_, l)| l)
}

/// A quoted fragment and the anchor text that introduces it.
struct QuoteAnchor {
    quote: String,
    anchor: String,
}

fn find_quote_anchors(section: &str, opts: &XFileOptions) -> Vec<QuoteAnchor> {
    let chars: Vec<(usize, char)> = section.char_indices().collect();
    let mut quotes: Vec<(usize, usize, usize)> = Vec::new(); // (open idx, content start, content end)
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let close = match c {
            '“' => Some('”'),
            '「' => Some('」'),
            '『' => Some('』'),
            '"' => Some('"'),
            _ => None,
        };
        if let Some(close) = close {
            if let Some(j) = chars[i + 1..].iter().position(|&(_, x)| x == close) {
                let end_idx = i + 1 + j;
                quotes.push((pos, chars.get(i + 1).map_or(pos, |&(p, _)| p), chars[end_idx].0));
                i = end_idx + 1;
                continue;
            }
        }
        i += 1;
    }

    let strip_label = Regex::new(r"^(?:(?i)instant\s+)?(?i)claims?\s+\d+\s*[:：.]?\s*|^权利要求\s*\d+\s*[:：]?\s*").unwrap();
    let mut out = Vec::new();
    for (open_pos, content_start, content_end) in quotes {
        let quote = section[content_start..content_end].to_string();
        if quote.chars().count() < opts.min_quote_chars {
            continue;
        }
        let anchor_end = find_paren_open(&chars, open_pos).unwrap_or(open_pos);
        let anchor_start = find_anchor_start(&chars, anchor_end);
        let mut anchor = section[anchor_start..anchor_end].trim();
        anchor = anchor.trim_start_matches(|c: char| ",.;:，。；：、 \t".contains(c)).trim_end_matches(|c: char| "，,、 \t".contains(c));
        let anchor = strip_label.replace(anchor, "").to_string();
        if anchor.chars().count() < 2 {
            continue;
        }
        out.push(QuoteAnchor { quote, anchor });
    }
    out
}

/// Scans left from a quote for the parenthesis that introduces it, passing
/// over a short introducer like "相当于" but stopping at any boundary.
fn find_paren_open(chars: &[(usize, char)], quote_pos: usize) -> Option<usize> {
    let idx = chars.iter().position(|&(p, _)| p == quote_pos)?;
    let mut walked = 0;
    for k in (0..idx).rev() {
        let (pos, c) = chars[k];
        if c == '(' || c == '（' {
            return Some(pos);
        }
        if is_anchor_boundary(c) {
            return None;
        }
        walked += 1;
        if walked > 12 {
            return None;
        }
    }
    None
}

fn is_anchor_boundary(c: char) -> bool {
    matches!(c, ')' | '）' | '”' | '"' | '」' | '』' | '\n' | '。' | '！' | '？' | '；')
}

fn find_anchor_start(chars: &[(usize, char)], anchor_end: usize) -> usize {
    let idx = chars.iter().position(|&(p, _)| p >= anchor_end).unwrap_or(chars.len());
    for k in (0..idx).rev() {
        let (pos, c) = chars[k];
        if is_anchor_boundary(c) {
            return pos + c.len_utf8();
        }
    }
    0
}

/// Sentence-level pair through the quote/anchor structure of the span: one
/// fragment belongs to each patent; the assignment with the higher joint
/// location quality wins, and the best-scoring quote provides the pair.
fn quote_guided_pair(
    section: &str,
    examined: &[SegmentedSource],
    cited: &[SegmentedSource],
    opts: &XFileOptions,
) -> Option<(String, String)> {
    let mut best: Option<(f64, (String, String))> = None;
    for qa in find_quote_anchors(section, opts) {
        let quote_e = locate(&qa.quote, examined, opts);
        let quote_c = locate(&qa.quote, cited, opts);
        let anchor_e = locate(&qa.anchor, examined, opts);
        let anchor_c = locate(&qa.anchor, cited, opts);

        let straight = pair_score(&anchor_e, &quote_c);
        let crossed = pair_score(&quote_e, &anchor_c);
        let (score, pair) = if straight >= crossed {
            (straight, (anchor_e, quote_c))
        } else {
            (crossed, (quote_e, anchor_c))
        };
        if score <= 0.0 {
            continue;
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            if let (Some(e), Some(c)) = pair {
                best = Some((score, (e.text, c.text)));
            }
        }
    }
    match best {
        Some((score, pair)) if score >= opts.min_pair_score => Some(pair),
        _ => None,
    }
}

fn pair_score(examined: &Option<Located>, cited: &Option<Located>) -> f64 {
    match (examined, cited) {
        (Some(e), Some(c)) => e.quality * c.quality,
        _ => 0.0,
    }
}

/// Fallback when the span carries no usable quote structure: the sentence
/// pair with maximal shingle Jaccard, ties to the earliest examined then
/// cited sentence.
fn direct_pair(
    examined: &[SegmentedSource],
    cited: &[SegmentedSource],
    opts: &XFileOptions,
) -> Option<(String, String)> {
    let n = opts.overlap_shingle_chars;
    let mut best: Option<(f64, (String, String))> = None;
    for es in examined {
        for (e_span, _) in &es.sents {
            let e_text = e_span.text(es.text);
            for cs in cited {
                for (c_span, _) in &cs.sents {
                    let c_text = c_span.text(cs.text);
                    let score = jaccard(e_text, c_text, n);
                    if score > 0.0 && best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, (e_text.to_string(), c_text.to_string())));
                    }
                }
            }
        }
    }
    best.map(|(_, pair)| pair)
}

/// True when `text` appears verbatim in the patent's claims, description,
/// or abstract (clause runs may join adjacent paragraphs with newlines).
pub fn verbatim_in_patent(text: &str, patent: &PatentRecord) -> bool {
    if patent.claims.join("\n").contains(text) {
        return true;
    }
    let description: String =
        patent.description.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n");
    description.contains(text) || (!patent.abstract_text.is_empty() && patent.abstract_text.contains(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_extractor_reads_english_references() {
        let span = "Claims 1-5 and 7 are rejected as anticipated by Lee (US 2014/0078104 A1).\n\
                    Instant Claim 1: An electronic device, (\u{201c}quoted\u{201d} (Lee, paragraph 104)) and more.";
        let ex = RuleBasedExtractor::default();
        let refs = ex.references(span);
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].claim_number, 1);
        assert_eq!((refs[0].para_start, refs[0].para_end), (104, 104));
        let pns = ex.patent_numbers(span);
        assert_eq!(pns.len(), 1);
        assert_eq!(canonical_patent_number(&pns[0].1), "US20140078104");
    }

    #[test]
    fn rule_extractor_reads_chinese_ranges() {
        let span = "1.权利要求1请求保护一种光电接收器，对比文件1（CN207366793U）公开了以下技术特征（参见说明书5-11段，图3-5）：";
        let ex = RuleBasedExtractor::default();
        let refs = ex.references(span);
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].claim_number, 1);
        assert_eq!((refs[0].para_start, refs[0].para_end), (5, 11));
        let pns = ex.patent_numbers(span);
        assert!(pns.iter().any(|(_, p)| canonical_patent_number(p) == "CN207366793"));
    }

    #[test]
    fn strong_claim_mentions_beat_passing_references() {
        let span = "Instant Claim 2: The electronic device of claim 1, wherein the circuit \
                    filters noise. (\u{201c}The first signal processor includes an amplifier.\u{201d} \
                    (Lee, paragraph 296))";
        let ex = RuleBasedExtractor::default();
        let refs = ex.references(span);
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].claim_number, 2);
    }

    #[test]
    fn quote_anchor_extraction_strips_labels_and_separators() {
        let span = "Instant Claim 1: An electronic device comprising: a display layer, \
                    (\u{201c}The display device includes a panel and controller circuits.\u{201d} \
                    (Lee, paragraph 104))";
        let qas = find_quote_anchors(span, &XFileOptions::default());
        assert_eq!(qas.len(), 1);
        assert_eq!(qas[0].quote, "The display device includes a panel and controller circuits.");
        assert_eq!(qas[0].anchor, "An electronic device comprising: a display layer");
    }

    #[test]
    fn short_quotes_are_ignored_as_term_glosses() {
        let span = "所述热沉（相当于“固定支架”）位于底座上";
        let qas = find_quote_anchors(span, &XFileOptions::default());
        assert!(qas.is_empty());
    }

    fn simple_patent(pn: &str) -> crate::corpus::PatentRecord {
        crate::corpus::PatentRecord {
            patent_number: pn.to_string(),
            claims: vec!["1. A device.".to_string()],
            description: vec![],
            abstract_text: String::new(),
            ipc_code: String::new(),
            family_id: String::new(),
            language: Language::En,
        }
    }

    fn simple_wrapper(sections: &[&str]) -> crate::corpus::FileWrapperRecord {
        crate::corpus::FileWrapperRecord {
            examined_patent_number: "US 1000001".to_string(),
            cited_patent_numbers: vec!["US 1000002".to_string()],
            comment_sections: sections.iter().map(|s| s.to_string()).collect(),
            language: Language::En,
        }
    }

    fn linked(sections: &[&str]) -> crate::synthesize::link::WrapperLink {
        let index = crate::synthesize::link::PatentIndex::from_records([
            simple_patent("US 1000001"),
            simple_patent("US 1000002"),
        ]);
        crate::synthesize::link::link_wrapper(&simple_wrapper(sections), &index).unwrap()
    }

    #[test]
    fn wrapper_without_comparison_spans_yields_no_pairs() {
        let link = linked(&["DETAILED ACTION", "The applicant's response has been entered."]);
        let extraction = extract_xfile_pairs(&link);
        assert!(extraction.pairs.is_empty());
    }

    #[test]
    fn out_of_range_and_zero_claim_references_are_skipped() {
        let link = linked(&[
            "Instant Claim 0: preamble only (US 1000002, paragraph 3)",
            "Instant Claim 9: missing claim (US 1000002, paragraph 3)",
        ]);
        let extraction = extract_xfile_pairs(&link);
        assert!(extraction.pairs.is_empty());
        assert_eq!(extraction.skipped.len(), 2);
    }

    #[test]
    fn coverage_measures_fragment_containment() {
        assert_eq!(coverage("abcde", "xx abcde yy", 3), 1.0);
        assert!(coverage("abcdefgh", "abcd", 3) < 0.5);
        assert_eq!(coverage("ab", "zabz", 3), 1.0);
        assert_eq!(coverage("ab", "zz", 3), 0.0);
    }
}
