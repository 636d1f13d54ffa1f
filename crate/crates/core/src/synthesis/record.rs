use super::{NegativeBudget, PositionStrategy, SelectionStrategy};
use crate::error::{Error, Result};
use crate::vindex::ChunkId;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// One output line of a synthesized dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedDocument {
    #[serde(rename = "id")]
    pub synth_id: String,
    pub text: String,
    pub token_len: usize,
    pub meta: RecordMeta,
    /// Cosine between each meta-chunk and each of its negatives, in
    /// provenance order. Not persisted; `report` recomputes it from ids.
    #[serde(skip)]
    pub negative_similarities: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub source_doc: String,
    pub granularity: usize,
    pub strategy: SelectionStrategy,
    pub position: PositionStrategy,
    pub seed: u64,
    #[serde(default)]
    pub truncated: bool,
    pub budget: NegativeBudget,
    pub chunks: Vec<ChunkProvenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkProvenance {
    pub ordinal: usize,
    /// Char range `[start, end)` of the meta-chunk in the record text.
    pub meta_span: [usize; 2],
    pub negatives: Vec<ChunkId>,
    pub meta_slot: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub self_copies: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl SynthesizedDocument {
    pub fn synth_id_for(doc_id: &str) -> String {
        format!("{doc_id}.ext")
    }

    /// The text under a `[start, end)` char span.
    pub fn char_slice(&self, span: [usize; 2]) -> &str {
        char_slice(&self.text, span[0], span[1])
    }

    pub fn negative_ids(&self) -> impl Iterator<Item = ChunkId> + '_ {
        self.meta.chunks.iter().flat_map(|c| c.negatives.iter().copied())
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut idx = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let b0 = idx.nth(start).unwrap_or(text.len());
    let b1 = if end > start {
        idx.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b0
    };
    &text[b0..b1]
}

/// Streams records from a dataset file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<impl Iterator<Item = Result<SynthesizedDocument>>> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(move |(i, line)| {
            let line = line.map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::Record {
                line: i + 1,
                reason: e.to_string(),
            })
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_slice_handles_multibyte() {
        let s = "aé\nbç";
        assert_eq!(char_slice(s, 0, 2), "aé");
        assert_eq!(char_slice(s, 3, 5), "bç");
        assert_eq!(char_slice(s, 5, 5), "");
        assert_eq!(char_slice(s, 2, 2), "");
    }
}
