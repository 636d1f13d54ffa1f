//! Exact flat index over chunk embeddings.
//!
//! Queries scan every record; results are ordered by descending cosine score
//! with ties broken by ascending `chunk_id`, so identical inputs always give
//! identical rankings.
//!
//! Snapshot layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "LSYNIDX\0"
//! version    u32
//! dimension  u32
//! count      u64
//! granularity u64
//! provider   u8, then 7 reserved zero bytes
//! records    count x { chunk_id u64, ordinal u32, doc_len u32, doc_off u64, text_len u64, text_off u64 }
//! embeddings count x dimension x f32
//! heap_len   u64, then heap bytes (UTF-8 doc ids and texts)
//! checksum   SHA-256 of everything above
//! ```

use crate::chunking::{chunk_corpus, MetaChunk};
use crate::corpus::Document;
use crate::embedding::{dot, Embedder, EmbedderConfig, EmbeddingVector, Provider};
use crate::error::{Error, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

pub const MAGIC: &[u8; 8] = b"LSYNIDX\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8;
const RECORD_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8;
const CHECKSUM_LEN: usize = 32;

pub type ChunkId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkRecord {
    pub chunk_id: ChunkId,
    pub parent_doc_id: Arc<str>,
    pub ordinal: usize,
    pub text: String,
    pub char_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalCandidate {
    pub chunk_id: ChunkId,
    pub score: f32,
    pub rank: usize,
}

/// Query result. `short` is set when fewer than `k` records were eligible.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub candidates: Vec<RetrievalCandidate>,
    pub short: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    dim: usize,
    granularity: usize,
    provider: Provider,
    records: Vec<ChunkRecord>,
    embeddings: Vec<f32>,
    by_doc: HashMap<Arc<str>, Vec<ChunkId>>,
}

/// Score order: descending score, then ascending id.
pub fn candidate_order(a: &(f32, ChunkId), b: &(f32, ChunkId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

impl Index {
    fn from_parts(
        dim: usize,
        granularity: usize,
        provider: Provider,
        records: Vec<ChunkRecord>,
        embeddings: Vec<f32>,
    ) -> Self {
        let mut by_doc: HashMap<Arc<str>, Vec<ChunkId>> = HashMap::new();
        for r in &records {
            by_doc.entry(r.parent_doc_id.clone()).or_default().push(r.chunk_id);
        }
        Index {
            dim,
            granularity,
            provider,
            records,
            embeddings,
            by_doc,
        }
    }

    /// Embeds and inserts `chunks`; ids follow input order.
    pub fn build<I>(chunks: I, cfg: &EmbedderConfig, granularity: usize) -> Result<Self>
    where
        I: IntoIterator<Item = MetaChunk>,
    {
        let embedder = Embedder::new(cfg)?;
        let chunks: Vec<MetaChunk> = chunks.into_iter().collect();
        if chunks.is_empty() {
            return Err(Error::Config("cannot build an index from zero chunks".into()));
        }
        let dim = embedder.dimension();
        let vectors: Vec<EmbeddingVector> = match &embedder {
            Embedder::Local(e) => chunks.par_iter().map(|c| e.embed(&c.text)).collect(),
            Embedder::Remote(_) => {
                let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
                embedder.embed_batch(&texts).map_err(|e| {
                    let at = match &e {
                        Error::Remote { start, .. } => *start,
                        _ => 0,
                    };
                    Error::ChunkEmbedding {
                        doc_id: chunks[at].parent_doc_id.to_string(),
                        ordinal: chunks[at].ordinal,
                        reason: e.to_string(),
                    }
                })?
            }
        };
        let mut embeddings = Vec::with_capacity(chunks.len() * dim);
        let mut records = Vec::with_capacity(chunks.len());
        for (id, (chunk, v)) in chunks.into_iter().zip(vectors).enumerate() {
            if v.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            embeddings.extend_from_slice(v.values());
            records.push(ChunkRecord {
                chunk_id: id as ChunkId,
                parent_doc_id: chunk.parent_doc_id,
                ordinal: chunk.ordinal,
                char_len: chunk.char_len,
                text: chunk.text,
            });
        }
        Ok(Self::from_parts(dim, granularity, cfg.provider, records, embeddings))
    }

    /// Chunks every document at granularity `s` and indexes the result.
    pub fn build_from_documents<I, D>(docs: I, s: usize, cfg: &EmbedderConfig) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: std::borrow::Borrow<Document>,
    {
        Self::build(chunk_corpus(docs, s)?, cfg, s)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn granularity(&self) -> usize {
        self.granularity
    }

    pub fn provider(&self) -> Provider {
        self.provider
    }

    pub fn records(&self) -> &[ChunkRecord] {
        &self.records
    }

    pub fn record(&self, id: ChunkId) -> Option<&ChunkRecord> {
        self.records.get(usize::try_from(id).ok()?)
    }

    pub fn embedding(&self, id: ChunkId) -> Option<&[f32]> {
        let i = usize::try_from(id).ok()?;
        if i >= self.records.len() {
            return None;
        }
        Some(&self.embeddings[i * self.dim..(i + 1) * self.dim])
    }

    /// Chunk ids whose parent is `doc_id`, in ordinal order.
    pub fn chunks_of(&self, doc_id: &str) -> &[ChunkId] {
        self.by_doc.get(doc_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn score(&self, query: &[f32], id: ChunkId) -> Option<f32> {
        self.embedding(id).map(|e| dot(query, e))
    }

    /// Up to `k` records most similar to `query` among those not excluded.
    pub fn query_top_k<F>(&self, query: &EmbeddingVector, k: usize, exclude: F) -> Result<TopK>
    where
        F: Fn(&ChunkRecord) -> bool,
    {
        self.query_top_k_below(query, k, None, exclude)
    }

    /// As [`Index::query_top_k`], additionally dropping candidates scoring
    /// above `ceiling`.
    pub fn query_top_k_below<F>(
        &self,
        query: &EmbeddingVector,
        k: usize,
        ceiling: Option<f32>,
        exclude: F,
    ) -> Result<TopK>
    where
        F: Fn(&ChunkRecord) -> bool,
    {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let q = query.values();
        let mut scored: Vec<(f32, ChunkId)> = self
            .records
            .iter()
            .filter(|r| !exclude(r))
            .map(|r| {
                let i = r.chunk_id as usize;
                (dot(q, &self.embeddings[i * self.dim..(i + 1) * self.dim]), r.chunk_id)
            })
            .filter(|(s, _)| ceiling.is_none_or(|c| *s <= c))
            .collect();
        let short = scored.len() < k;
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, candidate_order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(candidate_order);
        let candidates = scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, chunk_id))| RetrievalCandidate {
                chunk_id,
                score,
                rank: i + 1,
            })
            .collect();
        Ok(TopK { candidates, short })
    }

    /// Mean cosine over all unordered pairs of distinct records, in closed
    /// form: (|sum v|^2 - sum |v|^2) / (n (n - 1)).
    pub fn mean_pairwise_similarity(&self) -> Option<f64> {
        let n = self.records.len();
        if n < 2 {
            return None;
        }
        let mut sum = vec![0.0f64; self.dim];
        let mut self_sq = 0.0f64;
        for row in self.embeddings.chunks_exact(self.dim) {
            for (s, &x) in sum.iter_mut().zip(row) {
                *s += x as f64;
            }
            self_sq += row.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>();
        }
        let total_sq: f64 = sum.iter().map(|s| s * s).sum();
        Some((total_sq - self_sq) / (n as f64 * (n as f64 - 1.0)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut heap: Vec<u8> = Vec::new();
        let mut doc_offsets: HashMap<&str, u64> = HashMap::new();
        let mut table = Vec::with_capacity(self.records.len() * RECORD_LEN);
        for r in &self.records {
            let doc_off = *doc_offsets.entry(&r.parent_doc_id).or_insert_with(|| {
                let off = heap.len() as u64;
                heap.extend_from_slice(r.parent_doc_id.as_bytes());
                off
            });
            let text_off = heap.len() as u64;
            heap.extend_from_slice(r.text.as_bytes());
            table.extend_from_slice(&r.chunk_id.to_le_bytes());
            table.extend_from_slice(&(r.ordinal as u32).to_le_bytes());
            table.extend_from_slice(&(r.parent_doc_id.len() as u32).to_le_bytes());
            table.extend_from_slice(&doc_off.to_le_bytes());
            table.extend_from_slice(&(r.text.len() as u64).to_le_bytes());
            table.extend_from_slice(&text_off.to_le_bytes());
        }
        let mut out =
            Vec::with_capacity(HEADER_LEN + table.len() + self.embeddings.len() * 4 + 8 + heap.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.granularity as u64).to_le_bytes());
        out.push(self.provider.code());
        out.extend_from_slice(&[0u8; 7]);
        out.extend_from_slice(&table);
        for x in &self.embeddings {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(heap.len() as u64).to_le_bytes());
        out.extend_from_slice(&heap);
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::IndexFormat {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(fail("not an index snapshot (bad magic)".into()));
        }
        if bytes.len() < HEADER_LEN + 8 + CHECKSUM_LEN {
            return Err(fail("checksum mismatch: file truncated".into()));
        }
        let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != stored {
            return Err(fail("checksum mismatch: file truncated or corrupted".into()));
        }
        let mut cur = Cursor { buf: body, pos: 8 };
        let version = cur.u32();
        if version != FORMAT_VERSION {
            return Err(fail(format!(
                "format version {version} not supported (expected {FORMAT_VERSION})"
            )));
        }
        let dim = cur.u32() as usize;
        let count = cur.u64() as usize;
        let granularity = cur.u64() as usize;
        let provider = Provider::from_code(cur.take(8)[0]).ok_or_else(|| fail("unknown embedder provider".into()))?;
        let need = count
            .checked_mul(RECORD_LEN)
            .and_then(|t| dim.checked_mul(count)?.checked_mul(4)?.checked_add(t))
            .and_then(|t| t.checked_add(HEADER_LEN + 8))
            .ok_or_else(|| fail("header sizes overflow".into()))?;
        if dim == 0 || body.len() < need {
            return Err(fail("header inconsistent with file size".into()));
        }
        let mut raw = Vec::with_capacity(count);
        for _ in 0..count {
            raw.push((
                cur.u64(),
                cur.u32() as usize,
                cur.u32() as usize,
                cur.u64() as usize,
                cur.u64() as usize,
                cur.u64() as usize,
            ));
        }
        let embeddings: Vec<f32> = cur
            .take(count * dim * 4)
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let heap_len = cur.u64() as usize;
        if cur.buf.len() - cur.pos != heap_len {
            return Err(fail("string heap length mismatch".into()));
        }
        let heap = cur.take(heap_len);
        let slice = |off: usize, len: usize| -> Result<&str> {
            let end = off.checked_add(len).filter(|&e| e <= heap.len());
            let bytes = end
                .map(|e| &heap[off..e])
                .ok_or_else(|| fail("string out of bounds".into()))?;
            std::str::from_utf8(bytes).map_err(|_| fail("invalid UTF-8 in string heap".into()))
        };
        let mut doc_ids: HashMap<usize, Arc<str>> = HashMap::new();
        let mut records = Vec::with_capacity(count);
        for (i, (chunk_id, ordinal, doc_len, doc_off, text_len, text_off)) in raw.into_iter().enumerate() {
            if chunk_id != i as u64 {
                return Err(fail(format!("record {i} carries id {chunk_id}")));
            }
            let parent_doc_id = match doc_ids.get(&doc_off) {
                Some(id) if id.len() == doc_len => id.clone(),
                _ => {
                    let id: Arc<str> = slice(doc_off, doc_len)?.into();
                    doc_ids.insert(doc_off, id.clone());
                    id
                }
            };
            let text = slice(text_off, text_len)?.to_string();
            records.push(ChunkRecord {
                chunk_id,
                parent_doc_id,
                ordinal,
                char_len: text.chars().count(),
                text,
            });
        }
        Ok(Self::from_parts(dim, granularity, provider, records, embeddings))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        file.sync_all().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().unwrap())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().unwrap())
    }
}

pub fn build_index<I>(chunks: I, cfg: &EmbedderConfig, granularity: usize) -> Result<Index>
where
    I: IntoIterator<Item = MetaChunk>,
{
    Index::build(chunks, cfg, granularity)
}

pub fn save_index(index: &Index, path: impl AsRef<Path>) -> Result<()> {
    index.save(path)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index> {
    Index::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::hash_embed;

    fn small_index() -> Index {
        let docs = vec![
            Document::new("a", "apple banana\ncherry apple\nplum pear").unwrap(),
            Document::new("b", "banana split\nice cream sundae\napple pie").unwrap(),
        ];
        Index::build_from_documents(&docs, 5, &EmbedderConfig::local(32)).unwrap()
    }

    #[test]
    fn cardinality() {
        let idx = small_index();
        assert_eq!(idx.len(), 6);
        assert_eq!(idx.dimension(), 32);
        assert_eq!(idx.chunks_of("b"), &[3, 4, 5]);
    }

    #[test]
    fn self_query_ranks_first() {
        let idx = small_index();
        let q = hash_embed("ice cream sundae", 32);
        let top = idx.query_top_k(&q, 3, |_| false).unwrap();
        assert_eq!(top.candidates[0].chunk_id, 4);
        assert!((top.candidates[0].score - 1.0).abs() < 1e-6);
        assert_eq!(top.candidates[0].rank, 1);
    }

    #[test]
    fn exclusion_and_short_lists() {
        let idx = small_index();
        let q = hash_embed("apple", 32);
        let none = idx.query_top_k(&q, 3, |_| true).unwrap();
        assert!(none.candidates.is_empty() && none.short);
        let only_b = idx.query_top_k(&q, 10, |r| &*r.parent_doc_id == "a").unwrap();
        assert_eq!(only_b.candidates.len(), 3);
        assert!(only_b.short);
        assert!(only_b.candidates.iter().all(|c| c.chunk_id >= 3));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let docs = vec![
            Document::new("a", "same words").unwrap(),
            Document::new("b", "same words").unwrap(),
            Document::new("c", "same words").unwrap(),
        ];
        let idx = Index::build_from_documents(&docs, 100, &EmbedderConfig::local(16)).unwrap();
        let q = hash_embed("same words", 16);
        let ids: Vec<_> = idx
            .query_top_k(&q, 3, |_| false)
            .unwrap()
            .candidates
            .iter()
            .map(|c| c.chunk_id)
            .collect();
        assert_eq!(ids, [0, 1, 2]);
    }

    #[test]
    fn query_errors() {
        let idx = small_index();
        assert!(matches!(
            idx.query_top_k(&hash_embed("x", 8), 1, |_| false),
            Err(Error::Dimension { .. })
        ));
        assert!(idx.query_top_k(&hash_embed("x", 32), 0, |_| false).is_err());
    }

    #[test]
    fn empty_build_rejected() {
        assert!(Index::build(Vec::new(), &EmbedderConfig::local(8), 10).is_err());
    }

    #[test]
    fn bytes_round_trip_and_determinism() {
        let idx = small_index();
        let bytes = idx.to_bytes();
        assert_eq!(bytes, small_index().to_bytes());
        let back = Index::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn corrupted_snapshots_rejected() {
        let bytes = small_index().to_bytes();
        let p = Path::new("mem");
        let err = Index::from_bytes(&bytes[..bytes.len() - 10], p).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 3] ^= 1;
        assert!(Index::from_bytes(&flipped, p)
            .unwrap_err()
            .to_string()
            .contains("checksum"));
        let mut bad_version = bytes[..bytes.len() - CHECKSUM_LEN].to_vec();
        bad_version[8] = 9;
        let digest = Sha256::digest(&bad_version);
        bad_version.extend_from_slice(&digest);
        assert!(Index::from_bytes(&bad_version, p)
            .unwrap_err()
            .to_string()
            .contains("version"));
        assert!(Index::from_bytes(b"garbage", p).is_err());
    }

    #[test]
    fn mean_pairwise_matches_direct_sum() {
        let idx = small_index();
        let n = idx.len() as u64;
        let mut total = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += dot(idx.embedding(i).unwrap(), idx.embedding(j).unwrap()) as f64;
                }
            }
        }
        let direct = total / (n * (n - 1)) as f64;
        assert!((idx.mean_pairwise_similarity().unwrap() - direct).abs() < 1e-6);
    }
}
