//! Post-hoc structural checks over synthesized records.
//!
//! Everything here is recomputed from the stored record, the index, and
//! optionally the source corpus; nothing is taken from the synthesis run.

use crate::chunking::chunk_document;
use crate::corpus::Document;
use crate::synthesis::{PositionStrategy, SynthesizedDocument};
use crate::tokenize::TokenCounter;
use crate::vindex::Index;
use crate::SEPARATOR;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    NegativeReused,
    SelfNegative,
    UnknownChunk,
    OrderBroken,
    HeadPrefix,
    BelowTarget,
    TokenCount,
    TextMismatch,
    MetaMismatch,
    SpanOutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub record: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.record, self.kind, self.detail)
    }
}

pub struct Validator<'a> {
    index: &'a Index,
    tokenizer: &'a dyn TokenCounter,
    target_tokens: Option<usize>,
    sources: HashMap<&'a str, &'a Document>,
}

impl<'a> Validator<'a> {
    pub fn new(index: &'a Index, tokenizer: &'a dyn TokenCounter) -> Self {
        Validator {
            index,
            tokenizer,
            target_tokens: None,
            sources: HashMap::new(),
        }
    }

    /// Also enforce `token_len >= target` for untruncated records.
    pub fn with_target(mut self, target_tokens: usize) -> Self {
        self.target_tokens = Some(target_tokens);
        self
    }

    /// Source documents; when present, meta spans are checked against a fresh
    /// chunking of the source.
    pub fn with_sources(mut self, docs: &'a [Document]) -> Self {
        self.sources = docs.iter().map(|d| (d.doc_id(), d)).collect();
        self
    }

    pub fn validate(&self, rec: &SynthesizedDocument) -> Vec<Violation> {
        let mut v = Findings {
            record: &rec.synth_id,
            out: Vec::new(),
        };
        let meta = &rec.meta;
        let text_len = rec.text.chars().count();

        let mut seen = HashSet::new();
        for id in rec.negative_ids() {
            if !seen.insert(id) {
                v.flag(ViolationKind::NegativeReused, format!("chunk {id} used twice"));
            }
            match self.index.record(id) {
                None => v.flag(ViolationKind::UnknownChunk, format!("chunk {id} not in index")),
                Some(r) if *r.parent_doc_id == *meta.source_doc => v.flag(
                    ViolationKind::SelfNegative,
                    format!("chunk {id} comes from the source document"),
                ),
                Some(_) => {}
            }
        }

        let mut prev_ordinal = 0;
        let mut prev_end = 0;
        for c in &meta.chunks {
            if c.ordinal <= prev_ordinal {
                v.flag(
                    ViolationKind::OrderBroken,
                    format!("ordinal {} after {prev_ordinal}", c.ordinal),
                );
            }
            if c.meta_span[0] < prev_end || c.meta_span[1] < c.meta_span[0] {
                v.flag(
                    ViolationKind::OrderBroken,
                    format!("meta span {:?} out of order", c.meta_span),
                );
            }
            if c.meta_span[1] > text_len {
                v.flag(
                    ViolationKind::SpanOutOfBounds,
                    format!("meta span {:?} past end {text_len}", c.meta_span),
                );
            }
            prev_ordinal = c.ordinal;
            prev_end = c.meta_span[1];
        }
        if v.out
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::UnknownChunk | ViolationKind::SpanOutOfBounds))
        {
            return v.out;
        }

        // Rebuild the expected text from provenance alone.
        let mut rebuilt = String::new();
        let mut ext_starts = Vec::with_capacity(meta.chunks.len());
        let mut pos = 0usize;
        for c in &meta.chunks {
            let meta_text = rec.char_slice(c.meta_span);
            let mut pieces: Vec<&str> = c
                .negatives
                .iter()
                .map(|&id| self.index.record(id).map(|r| r.text.as_str()).unwrap_or(""))
                .collect();
            pieces.extend(std::iter::repeat_n(meta_text, c.self_copies));
            let slot = c.meta_slot.min(pieces.len());
            pieces.insert(slot, meta_text);
            if !rebuilt.is_empty() {
                rebuilt.push(SEPARATOR);
                pos += 1;
            }
            ext_starts.push(pos);
            let joined = pieces.join("\n");
            pos += joined.chars().count();
            rebuilt.push_str(&joined);

            let expected_meta_start = ext_starts.last().copied().unwrap()
                + pieces[..slot].iter().map(|p| p.chars().count() + 1).sum::<usize>();
            if c.meta_span[0] != expected_meta_start {
                v.flag(
                    ViolationKind::TextMismatch,
                    format!(
                        "chunk {} meta span starts at {}, layout says {expected_meta_start}",
                        c.ordinal, c.meta_span[0]
                    ),
                );
            }
            if meta.position == PositionStrategy::Head
                && (c.meta_slot != 0 || c.meta_span[0] != *ext_starts.last().unwrap())
            {
                v.flag(
                    ViolationKind::HeadPrefix,
                    format!("chunk {} does not open with its meta-chunk", c.ordinal),
                );
            }
        }
        let matches = if meta.truncated {
            rebuilt.starts_with(&rec.text)
        } else {
            rebuilt == rec.text
        };
        if !matches {
            v.flag(
                ViolationKind::TextMismatch,
                "text differs from provenance reconstruction".into(),
            );
        }

        let recount = self.tokenizer.count(&rec.text);
        if recount != rec.token_len {
            v.flag(
                ViolationKind::TokenCount,
                format!("stored {} tokens, recounted {recount}", rec.token_len),
            );
        }
        if let Some(target) = self.target_tokens {
            if recount < target {
                v.flag(
                    ViolationKind::BelowTarget,
                    format!("{recount} tokens < target {target}"),
                );
            }
        }

        if let Some(src) = self.sources.get(meta.source_doc.as_str()) {
            match chunk_document(src, meta.granularity) {
                Ok(metas) => {
                    if !meta.truncated && metas.len() != meta.chunks.len() {
                        v.flag(
                            ViolationKind::MetaMismatch,
                            format!("{} meta-chunks recorded, source has {}", meta.chunks.len(), metas.len()),
                        );
                    }
                    for (c, m) in meta.chunks.iter().zip(&metas) {
                        if c.ordinal != m.ordinal || rec.char_slice(c.meta_span) != m.text {
                            v.flag(
                                ViolationKind::MetaMismatch,
                                format!("chunk {} differs from source", c.ordinal),
                            );
                        }
                    }
                }
                Err(e) => v.flag(ViolationKind::MetaMismatch, e.to_string()),
            }
        }
        v.out
    }
}

struct Findings<'r> {
    record: &'r str,
    out: Vec<Violation>,
}

impl Findings<'_> {
    fn flag(&mut self, kind: ViolationKind, detail: String) {
        self.out.push(Violation {
            record: self.record.to_string(),
            kind,
            detail,
        });
    }
}
