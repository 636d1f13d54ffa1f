//! Line-delimited corpus ingestion and length statistics.
//!
//! Input records are JSON objects, one per line, with string fields `id` and
//! `text`. Records that fail validation go to a [`RejectSink`] with an added
//! `error` field; the stream itself keeps going.

use crate::error::{Error, Result};
use crate::tokenize::TokenCounter;
use serde::{Deserialize, Serialize};
use std::borrow::Borrow;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

/// Token count above which a document is bucketed as long.
pub const LONG_DOC_TOKENS: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    doc_id: Arc<str>,
    text: Arc<str>,
    char_len: usize,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Result<Self, String> {
        let doc_id = doc_id.into();
        let text = text.into();
        if doc_id.is_empty() {
            return Err("empty id".into());
        }
        if text.is_empty() {
            return Err("empty text".into());
        }
        let char_len = text.chars().count();
        Ok(Document {
            doc_id: doc_id.into(),
            text: text.into(),
            char_len,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Length in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.char_len
    }
}

/// A record that failed validation, in the input format plus `error`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub id: Option<String>,
    pub text: Option<String>,
    pub error: String,
    pub line: usize,
}

pub trait RejectSink {
    fn reject(&mut self, reject: Reject) -> Result<()>;
}

impl RejectSink for Vec<Reject> {
    fn reject(&mut self, reject: Reject) -> Result<()> {
        self.push(reject);
        Ok(())
    }
}

/// Writes rejects as JSON lines.
pub struct JsonlRejects<W: Write> {
    out: W,
}

impl<W: Write> JsonlRejects<W> {
    pub fn new(out: W) -> Self {
        JsonlRejects { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RejectSink for JsonlRejects<W> {
    fn reject(&mut self, reject: Reject) -> Result<()> {
        serde_json::to_writer(&mut self.out, &reject)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

impl<S: RejectSink + ?Sized> RejectSink for &std::cell::RefCell<S> {
    fn reject(&mut self, reject: Reject) -> Result<()> {
        self.borrow_mut().reject(reject)
    }
}

impl<S: RejectSink + ?Sized> RejectSink for &mut S {
    fn reject(&mut self, reject: Reject) -> Result<()> {
        (**self).reject(reject)
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<serde_json::Value>,
}

/// Streaming reader over a line-delimited corpus. Yields documents in input
/// order; only I/O and sink failures surface as `Err`.
pub struct CorpusReader<R, S> {
    lines: std::io::Lines<R>,
    line_no: usize,
    namespace: Option<String>,
    seen: HashSet<Arc<str>>,
    sink: S,
    rejected: usize,
}

/// Streams documents from `source`, routing malformed records to `sink`.
pub fn load_corpus<R: BufRead, S: RejectSink>(source: R, sink: S) -> CorpusReader<R, S> {
    CorpusReader {
        lines: source.lines(),
        line_no: 0,
        namespace: None,
        seen: HashSet::new(),
        sink,
        rejected: 0,
    }
}

/// Opens a corpus file. Fails immediately if the file cannot be opened.
pub fn open_corpus<S: RejectSink>(path: impl AsRef<Path>, sink: S) -> Result<CorpusReader<BufReader<File>, S>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(load_corpus(BufReader::new(file), sink))
}

impl<R: BufRead, S: RejectSink> CorpusReader<R, S> {
    /// Prefixes every doc id with `namespace:`; used when several corpus files
    /// are mixed in one run so their ids cannot collide.
    pub fn with_namespace(mut self, namespace: impl Into<String>) -> Self {
        self.namespace = Some(namespace.into());
        self
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn lines_read(&self) -> usize {
        self.line_no
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    fn parse(&mut self, line: &str) -> Result<Document, Reject> {
        let reject = |id: Option<String>, text: Option<String>, error: String| Reject {
            id,
            text,
            error,
            line: self.line_no,
        };
        let raw: RawRecord = match serde_json::from_str(line) {
            Ok(raw) => raw,
            Err(e) => return Err(reject(None, None, format!("malformed record: {e}"))),
        };
        let id = match raw.id {
            Some(serde_json::Value::String(s)) => Some(s),
            _ => None,
        };
        let text = match raw.text {
            Some(serde_json::Value::String(s)) => Some(s),
            _ => None,
        };
        let (id, text) = match (id, text) {
            (None, text) => return Err(reject(None, text, "missing or non-string id".into())),
            (id, None) => return Err(reject(id, None, "missing or non-string text".into())),
            (Some(id), Some(text)) => (id, text),
        };
        let full_id = match &self.namespace {
            Some(ns) => format!("{ns}:{id}"),
            None => id.clone(),
        };
        if self.seen.contains(full_id.as_str()) {
            return Err(reject(Some(id), Some(text), "duplicate id".into()));
        }
        match Document::new(full_id, text) {
            Ok(doc) => {
                self.seen.insert(doc.doc_id.clone());
                Ok(doc)
            }
            Err(e) => Err(reject(Some(id), None, e)),
        }
    }
}

impl<R: BufRead, S: RejectSink> Iterator for CorpusReader<R, S> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::Stream(e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse(&line) {
                Ok(doc) => return Some(Ok(doc)),
                Err(reject) => {
                    self.rejected += 1;
                    if let Err(e) = self.sink.reject(reject) {
                        return Some(Err(e));
                    }
                }
            }
        }
    }
}

/// Reads every document of a corpus file into memory, discarding rejects.
pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    open_corpus(path, Vec::new())?.collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_docs: usize,
    pub count_le_8192_tokens: usize,
    pub count_gt_8192_tokens: usize,
    pub mean_char_len: f64,
    /// Characters per token; `None` for an empty corpus.
    pub measured_encoding_rate: Option<f64>,
    pub total_chars: u64,
    pub total_tokens: u64,
}

impl CorpusStats {
    pub fn pct_le(&self) -> f64 {
        pct(self.count_le_8192_tokens, self.total_docs)
    }

    pub fn pct_gt(&self) -> f64 {
        pct(self.count_gt_8192_tokens, self.total_docs)
    }
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

pub fn compute_corpus_stats<I, D>(docs: I, tokenizer: &dyn TokenCounter) -> CorpusStats
where
    I: IntoIterator<Item = D>,
    D: Borrow<Document>,
{
    let mut stats = CorpusStats {
        total_docs: 0,
        count_le_8192_tokens: 0,
        count_gt_8192_tokens: 0,
        mean_char_len: 0.0,
        measured_encoding_rate: None,
        total_chars: 0,
        total_tokens: 0,
    };
    for doc in docs {
        let doc = doc.borrow();
        let tokens = tokenizer.count(doc.text());
        stats.total_docs += 1;
        stats.total_chars += doc.char_len() as u64;
        stats.total_tokens += tokens as u64;
        if tokens <= LONG_DOC_TOKENS {
            stats.count_le_8192_tokens += 1;
        } else {
            stats.count_gt_8192_tokens += 1;
        }
    }
    if stats.total_docs > 0 {
        stats.mean_char_len = stats.total_chars as f64 / stats.total_docs as f64;
        if stats.total_tokens > 0 {
            stats.measured_encoding_rate = Some(stats.total_chars as f64 / stats.total_tokens as f64);
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::WhitespaceTokenizer;
    use std::io::Cursor;

    fn read(input: &str) -> (Vec<Document>, Vec<Reject>) {
        let mut rejects = Vec::new();
        let docs = load_corpus(Cursor::new(input), &mut rejects)
            .collect::<Result<Vec<_>>>()
            .unwrap();
        (docs, rejects)
    }

    #[test]
    fn three_good_lines_in_order() {
        let (docs, rejects) = read(
            "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\",\"text\":\"two\"}\n{\"id\":\"c\",\"text\":\"three\"}\n",
        );
        let ids: Vec<_> = docs.iter().map(|d| d.doc_id()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(rejects.is_empty());
    }

    #[test]
    fn empty_stream() {
        let (docs, rejects) = read("");
        assert!(docs.is_empty());
        assert!(rejects.is_empty());
    }

    #[test]
    fn missing_text_goes_to_rejects() {
        let (docs, rejects) =
            read("{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\"}\n{\"id\":\"c\",\"text\":\"three\"}\n");
        assert_eq!(docs.len(), 2);
        assert_eq!(rejects.len(), 1);
        assert_eq!(rejects[0].id.as_deref(), Some("b"));
        assert_eq!(rejects[0].line, 2);
        assert!(rejects[0].error.contains("text"));
    }

    #[test]
    fn malformed_empty_and_duplicate_records_rejected() {
        let (docs, rejects) = read(
            "not json\n{\"id\":\"\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"\"}\n{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n{\"id\":7,\"text\":\"y\"}\n",
        );
        assert_eq!(docs.len(), 1);
        assert_eq!(rejects.len(), 5);
        assert!(rejects[3].error.contains("duplicate"));
    }

    #[test]
    fn char_len_counts_scalar_values() {
        let doc = Document::new("x", "héllo wörld").unwrap();
        assert_eq!(doc.char_len(), 11);
        assert_eq!(doc.char_len(), doc.text().chars().count());
    }

    #[test]
    fn namespace_prefixes_ids() {
        let docs: Vec<_> = load_corpus(Cursor::new("{\"id\":\"a\",\"text\":\"t\"}\n"), Vec::new())
            .with_namespace("fineweb")
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs[0].doc_id(), "fineweb:a");
    }

    #[test]
    fn jsonl_rejects_keep_input_fields() {
        let mut sink = JsonlRejects::new(Vec::new());
        let _: Vec<_> = load_corpus(Cursor::new("{\"id\":\"b\"}\n"), &mut sink).collect();
        let out = String::from_utf8(sink.into_inner()).unwrap();
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["id"], "b");
        assert!(v["error"].as_str().unwrap().contains("text"));
    }

    #[test]
    fn stats_direct_ratio() {
        let doc = Document::new("a", "abc defg").unwrap();
        let stats = compute_corpus_stats([&doc], &WhitespaceTokenizer);
        assert_eq!(stats.measured_encoding_rate, Some(4.0));
        assert_eq!(stats.count_le_8192_tokens, 1);
    }

    #[test]
    fn stats_empty_corpus_has_undefined_rate() {
        let stats = compute_corpus_stats(Vec::<Document>::new(), &WhitespaceTokenizer);
        assert_eq!(stats.total_docs, 0);
        assert_eq!(stats.measured_encoding_rate, None);
    }

    #[test]
    fn all_short_docs_land_in_lower_bucket() {
        let docs: Vec<_> = (0..50)
            .map(|i| Document::new(format!("d{i}"), "word ".repeat(100 + i)).unwrap())
            .collect();
        let stats = compute_corpus_stats(&docs, &WhitespaceTokenizer);
        assert_eq!(stats.count_gt_8192_tokens, 0);
        assert_eq!(stats.pct_le(), 100.0);
    }

    #[test]
    fn stats_boundary_is_inclusive() {
        let at = Document::new("at", "w ".repeat(LONG_DOC_TOKENS)).unwrap();
        let over = Document::new("over", "w ".repeat(LONG_DOC_TOKENS + 1)).unwrap();
        let stats = compute_corpus_stats([&at, &over], &WhitespaceTokenizer);
        assert_eq!(stats.count_le_8192_tokens, 1);
        assert_eq!(stats.count_gt_8192_tokens, 1);
    }
}
