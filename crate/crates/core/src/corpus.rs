//! Corpus data model and line-delimited ingestion.
//!
//! Records live in JSONL files, one record per line. Loading validates each
//! line against the record invariants: good lines become typed records,
//! bad lines become per-line rejections with a reason, and one unreadable
//! file is the only fatal error. Input order is always preserved.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Corpus language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "en")]
    En,
    #[serde(rename = "zh")]
    Zh,
}

/// The eleven data categories a document can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Web,
    News,
    Patent,
    Paper,
    Book,
    Chat,
    Exam,
    Code,
    FileWrapper,
    ResearchReport,
    SupervisedData,
}

impl Category {
    /// All categories, in declaration order.
    pub const ALL: [Category; 11] = [
        Category::Web,
        Category::News,
        Category::Patent,
        Category::Paper,
        Category::Book,
        Category::Chat,
        Category::Exam,
        Category::Code,
        Category::FileWrapper,
        Category::ResearchReport,
        Category::SupervisedData,
    ];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Category::Web => "Web",
            Category::News => "News",
            Category::Patent => "Patent",
            Category::Paper => "Paper",
            Category::Book => "Book",
            Category::Chat => "Chat",
            Category::Exam => "Exam",
            Category::Code => "Code",
            Category::FileWrapper => "FileWrapper",
            Category::ResearchReport => "ResearchReport",
            Category::SupervisedData => "SupervisedData",
        };
        f.write_str(name)
    }
}

/// One corpus document. Immutable after construction; attributes keep
/// whatever keys the source carried (dedup keys on "doi", "patent_family",
/// and "patent_number", but unknown keys pass through untouched).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub category: Category,
    pub language: Language,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    /// Filled after tokenization; 0 means unknown.
    #[serde(default)]
    pub token_count: u64,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, category: Category, language: Language) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            category,
            language,
            attributes: BTreeMap::new(),
            token_count: 0,
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }
}

/// A description paragraph with its source paragraph index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub idx: u32,
    pub text: String,
}

/// Structured patent record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_number: String,
    pub claims: Vec<String>,
    pub description: Vec<Paragraph>,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    /// IPC Section+Class prefix, e.g. "H01". May be empty.
    #[serde(default)]
    pub ipc_code: String,
    #[serde(default)]
    pub family_id: String,
    pub language: Language,
}

impl PatentRecord {
    /// Description paragraphs with indices in `[start, end]`, in order.
    pub fn paragraphs_in_range(&self, start: u32, end: u32) -> Vec<&Paragraph> {
        self.description.iter().filter(|p| p.idx >= start && p.idx <= end).collect()
    }
}

/// Patent-office examination record for one application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileWrapperRecord {
    pub examined_patent_number: String,
    pub cited_patent_numbers: Vec<String>,
    pub comment_sections: Vec<String>,
    pub language: Language,
}

/// One violated invariant, identified by the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub detail: String,
}

impl Violation {
    fn new(field: &str, detail: impl Into<String>) -> Self {
        Self { field: field.to_string(), detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.detail)
    }
}

/// Which JSONL schema a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Document,
    Patent,
    Wrapper,
}

/// A line that failed parsing or validation. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Result of loading one JSONL corpus file.
#[derive(Debug, Clone)]
pub struct LoadReport<T> {
    pub records: Vec<T>,
    pub rejected: Vec<RejectedLine>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Validates a document against its invariants. Total: returns every
/// violation, the empty list iff the document is valid.
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    let mut violations = Vec::new();
    if doc.id.is_empty() {
        violations.push(Violation::new("id", "empty id"));
    }
    if doc.text.is_empty() {
        violations.push(Violation::new("text", "empty text"));
    }
    violations
}

/// Validates a patent record against its invariants.
pub fn validate_patent(rec: &PatentRecord) -> Vec<Violation> {
    let mut violations = Vec::new();
    if rec.patent_number.is_empty() {
        violations.push(Violation::new("patent_number", "empty patent_number"));
    }
    if rec.claims.is_empty() && rec.description.is_empty() {
        violations.push(Violation::new("claims", "claims may be empty only if description is nonempty"));
    }
    for w in rec.description.windows(2) {
        if w[1].idx <= w[0].idx {
            violations.push(Violation::new(
                "description",
                format!("paragraph indices not strictly increasing at idx {}", w[1].idx),
            ));
            break;
        }
    }
    violations
}

/// Validates a file-wrapper record against its invariants.
pub fn validate_wrapper(rec: &FileWrapperRecord) -> Vec<Violation> {
    let mut violations = Vec::new();
    if rec.examined_patent_number.is_empty() {
        violations.push(Violation::new("examined_patent_number", "empty examined_patent_number"));
    }
    if rec.cited_patent_numbers.is_empty() {
        violations.push(Violation::new("cited_patent_numbers", "empty cited_patent_numbers"));
    }
    violations
}

/// Record types loadable from JSONL corpus files.
pub trait CorpusRecord: DeserializeOwned + Serialize {
    fn record_id(&self) -> &str;
    fn validate(&self) -> Vec<Violation>;
}

impl CorpusRecord for Document {
    fn record_id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> Vec<Violation> {
        validate_document(self)
    }
}

impl CorpusRecord for PatentRecord {
    fn record_id(&self) -> &str {
        &self.patent_number
    }

    fn validate(&self) -> Vec<Violation> {
        validate_patent(self)
    }
}

impl CorpusRecord for FileWrapperRecord {
    fn record_id(&self) -> &str {
        &self.examined_patent_number
    }

    fn validate(&self) -> Vec<Violation> {
        validate_wrapper(self)
    }
}

/// Records loaded from one corpus file, by schema.
#[derive(Debug, Clone)]
pub enum CorpusFile {
    Documents(LoadReport<Document>),
    Patents(LoadReport<PatentRecord>),
    Wrappers(LoadReport<FileWrapperRecord>),
}

impl CorpusFile {
    pub fn rejected(&self) -> &[RejectedLine] {
        match self {
            CorpusFile::Documents(r) => &r.rejected,
            CorpusFile::Patents(r) => &r.rejected,
            CorpusFile::Wrappers(r) => &r.rejected,
        }
    }

    pub fn record_count(&self) -> usize {
        match self {
            CorpusFile::Documents(r) => r.records.len(),
            CorpusFile::Patents(r) => r.records.len(),
            CorpusFile::Wrappers(r) => r.records.len(),
        }
    }
}

/// Loads one JSONL corpus file under the named schema.
pub fn load_corpus(path: impl AsRef<Path>, schema: Schema) -> Result<CorpusFile, CorpusError> {
    Ok(match schema {
        Schema::Document => CorpusFile::Documents(load_records(path)?),
        Schema::Patent => CorpusFile::Patents(load_records(path)?),
        Schema::Wrapper => CorpusFile::Wrappers(load_records(path)?),
    })
}

/// Loads one JSONL file of records. Malformed or invalid lines are rejected
/// per line, never fatally; only an unreadable file is an error. Lines that
/// are not valid UTF-8 are rejected rather than lossily replaced so that
/// downstream dedup hashing stays byte-stable.
pub fn load_records<T: CorpusRecord>(path: impl AsRef<Path>) -> Result<LoadReport<T>, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_records(&bytes))
}

/// Parses records out of raw JSONL bytes. Split out from file I/O so tests
/// and in-memory callers share the exact same semantics.
pub fn parse_records<T: CorpusRecord>(bytes: &[u8]) -> LoadReport<T> {
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (i, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let raw_line = strip_cr(raw_line);
        if raw_line.is_empty() {
            continue;
        }
        let line = match std::str::from_utf8(raw_line) {
            Ok(s) => s,
            Err(_) => {
                rejected.push(RejectedLine { line: line_no, reason: "invalid utf-8".to_string() });
                continue;
            }
        };
        let record: T = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RejectedLine { line: line_no, reason: describe_parse_error(&e, line) });
                continue;
            }
        };
        let violations = record.validate();
        if !violations.is_empty() {
            let reason = violations.iter().map(|v| v.detail.clone()).collect::<Vec<_>>().join("; ");
            rejected.push(RejectedLine { line: line_no, reason });
            continue;
        }
        if !seen_ids.insert(record.record_id().to_string()) {
            rejected.push(RejectedLine {
                line: line_no,
                reason: format!("duplicate id {:?}", record.record_id()),
            });
            continue;
        }
        records.push(record);
    }

    LoadReport { records, rejected }
}

fn strip_cr(line: &[u8]) -> &[u8] {
    match line.last() {
        Some(b'\r') => &line[..line.len() - 1],
        _ => line,
    }
}

/// Turns a serde error into a field-oriented reason where possible, so the
/// per-line report reads like the validation report.
fn describe_parse_error(err: &serde_json::Error, line: &str) -> String {
    // Unknown enum value errors mention the field content; map the common
    // case (bad category) onto the field name the violation convention uses.
    let msg = err.to_string();
    if msg.contains("unknown variant") {
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(line) {
            if let Some(cat) = value.get("category").and_then(|v| v.as_str()) {
                if !Category::ALL.iter().any(|c| c.to_string() == cat) {
                    return format!("category: unknown value {cat:?}");
                }
            }
            if let Some(lang) = value.get("language").and_then(|v| v.as_str()) {
                if lang != "en" && lang != "zh" {
                    return format!("language: unknown value {lang:?}");
                }
            }
        }
    }
    format!("malformed record: {msg}")
}

/// Serializes records to JSONL, one record per line, trailing newline.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for record in records {
        // serde_json::to_vec on our own types cannot fail
        let line = serde_json::to_vec(record).expect("serializable record");
        out.extend_from_slice(&line);
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(&out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Serializes records to an in-memory JSONL buffer.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        let line = serde_json::to_vec(record).expect("serializable record");
        out.extend_from_slice(&line);
        out.push(b'\n');
    }
    out
}
