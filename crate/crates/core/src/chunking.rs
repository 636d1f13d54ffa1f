//! Newline split followed by greedy paragraph packing.
//!
//! A paragraph is a maximal run of text without `\n`; empty runs are dropped.
//! Paragraphs are appended to a buffer while the buffer's joined length
//! (single-newline separators included) stays within the granularity `s`.
//! A paragraph longer than `s` on its own is kept whole as a single chunk.

use crate::corpus::Document;
use crate::error::{Error, Result};
use std::sync::Arc;

/// Default character budget per chunk.
pub const DEFAULT_GRANULARITY: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaChunk {
    pub parent_doc_id: Arc<str>,
    /// 1-based position within the parent document.
    pub ordinal: usize,
    pub text: String,
    pub char_len: usize,
    pub paragraphs: usize,
}

impl MetaChunk {
    /// True when a single paragraph alone exceeds the budget.
    pub fn is_oversized(&self, s: usize) -> bool {
        self.char_len > s
    }
}

/// Splits `text` into packed chunks. Each item is `(text, char_len, paragraphs)`.
pub fn pack_paragraphs(text: &str, s: usize) -> Vec<(String, usize, usize)> {
    let mut chunks = Vec::new();
    let mut buf = String::new();
    let mut buf_len = 0usize;
    let mut buf_paras = 0usize;
    for para in text.split('\n').filter(|p| !p.is_empty()) {
        let para_len = para.chars().count();
        if buf_paras == 0 {
            buf.push_str(para);
            buf_len = para_len;
            buf_paras = 1;
        } else if buf_len + 1 + para_len <= s {
            buf.push('\n');
            buf.push_str(para);
            buf_len += 1 + para_len;
            buf_paras += 1;
        } else {
            chunks.push((std::mem::take(&mut buf), buf_len, buf_paras));
            buf.push_str(para);
            buf_len = para_len;
            buf_paras = 1;
        }
    }
    if buf_paras > 0 {
        chunks.push((buf, buf_len, buf_paras));
    }
    chunks
}

pub fn chunk_document(doc: &Document, s: usize) -> Result<Vec<MetaChunk>> {
    if s < 1 {
        return Err(Error::Config("granularity must be at least 1".into()));
    }
    let parent: Arc<str> = doc.doc_id().into();
    let chunks: Vec<MetaChunk> = pack_paragraphs(doc.text(), s)
        .into_iter()
        .enumerate()
        .map(|(i, (text, char_len, paragraphs))| MetaChunk {
            parent_doc_id: parent.clone(),
            ordinal: i + 1,
            text,
            char_len,
            paragraphs,
        })
        .collect();
    if chunks.is_empty() {
        log::warn!("document {} has no non-empty paragraphs", doc.doc_id());
    }
    Ok(chunks)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChunkDiagnostics {
    pub documents: usize,
    pub chunks: usize,
    pub oversized: usize,
    pub empty_documents: usize,
}

/// Lazily chunks a document stream at one granularity.
pub struct CorpusChunks<I> {
    docs: I,
    s: usize,
    pending: std::vec::IntoIter<MetaChunk>,
    diagnostics: ChunkDiagnostics,
}

impl<I> CorpusChunks<I> {
    pub fn diagnostics(&self) -> ChunkDiagnostics {
        self.diagnostics
    }
}

impl<I, D> Iterator for CorpusChunks<I>
where
    I: Iterator<Item = D>,
    D: std::borrow::Borrow<Document>,
{
    type Item = MetaChunk;

    fn next(&mut self) -> Option<MetaChunk> {
        loop {
            if let Some(chunk) = self.pending.next() {
                return Some(chunk);
            }
            let doc = self.docs.next()?;
            // s was validated in chunk_corpus, so this cannot fail.
            let chunks = chunk_document(doc.borrow(), self.s).unwrap_or_default();
            let d = &mut self.diagnostics;
            d.documents += 1;
            d.chunks += chunks.len();
            d.oversized += chunks.iter().filter(|c| c.is_oversized(self.s)).count();
            if chunks.is_empty() {
                d.empty_documents += 1;
            }
            self.pending = chunks.into_iter();
        }
    }
}

pub fn chunk_corpus<I, D>(docs: I, s: usize) -> Result<CorpusChunks<I::IntoIter>>
where
    I: IntoIterator<Item = D>,
    D: std::borrow::Borrow<Document>,
{
    if s < 1 {
        return Err(Error::Config("granularity must be at least 1".into()));
    }
    Ok(CorpusChunks {
        docs: docs.into_iter(),
        s,
        pending: Vec::new().into_iter(),
        diagnostics: ChunkDiagnostics::default(),
    })
}
