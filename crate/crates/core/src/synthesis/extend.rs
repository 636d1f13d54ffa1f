use super::assemble::{assemble_extended_chunk, ExtendedChunk, NegativePiece};
use super::budget::compute_negative_budget;
use super::record::{char_slice, ChunkProvenance, RecordMeta, SynthesizedDocument};
use super::select::{select_negatives, CorpusSampler, Selection};
use super::SynthesisConfig;
use crate::chunking::chunk_document;
use crate::corpus::Document;
use crate::embedding::{dot, fnv1a64, Embedder};
use crate::error::{Error, Result};
use crate::vindex::{ChunkId, Index};
use crate::SEPARATOR;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BelowTarget,
    PoolExhausted,
    EmptyDocument,
    Failed,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BelowTarget => "below-target",
            RejectReason::PoolExhausted => "pool-exhausted",
            RejectReason::EmptyDocument => "empty-document",
            RejectReason::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtendOutcome {
    Accepted(SynthesizedDocument),
    Rejected { reason: RejectReason, detail: String },
}

impl ExtendOutcome {
    pub fn accepted(self) -> Option<SynthesizedDocument> {
        match self {
            ExtendOutcome::Accepted(doc) => Some(doc),
            ExtendOutcome::Rejected { .. } => None,
        }
    }
}

/// Per-document RNG seed, independent of processing order.
pub fn document_seed(run_seed: u64, doc_id: &str) -> u64 {
    run_seed ^ fnv1a64(doc_id.as_bytes())
}

fn check_compatible(index: &Index, embedder: &Embedder, cfg: &SynthesisConfig) -> Result<()> {
    cfg.validate()?;
    if index.granularity() != cfg.granularity {
        return Err(Error::Config(format!(
            "index was built at granularity {} but synthesis uses {}",
            index.granularity(),
            cfg.granularity
        )));
    }
    if embedder.dimension() != index.dimension() {
        return Err(Error::Dimension {
            expected: index.dimension(),
            actual: embedder.dimension(),
        });
    }
    Ok(())
}

/// Extends one meta-document with negatives mined from `index`.
///
/// `Err` is reserved for configuration and embedding failures; documents that
/// cannot reach the target come back as [`ExtendOutcome::Rejected`].
pub fn extend_document(
    doc: &Document,
    index: &Index,
    embedder: &Embedder,
    cfg: &SynthesisConfig,
) -> Result<ExtendOutcome> {
    check_compatible(index, embedder, cfg)?;
    extend_checked(doc, index, embedder, cfg)
}

fn extend_checked(doc: &Document, index: &Index, embedder: &Embedder, cfg: &SynthesisConfig) -> Result<ExtendOutcome> {
    let doc_id = doc.doc_id();
    let metas = chunk_document(doc, cfg.granularity)?;
    if metas.is_empty() {
        return Ok(ExtendOutcome::Rejected {
            reason: RejectReason::EmptyDocument,
            detail: "no non-empty paragraphs".into(),
        });
    }
    let budget = compute_negative_budget(doc.char_len() as u64, metas.len(), cfg);
    let k = budget.k;
    let mut rng = ChaCha8Rng::seed_from_u64(document_seed(cfg.seed, doc_id));
    let mut used: HashSet<ChunkId> = HashSet::new();
    let mut extended: Vec<ExtendedChunk> = Vec::with_capacity(metas.len());
    let mut similarities: Vec<Vec<f32>> = Vec::with_capacity(metas.len());

    for meta in &metas {
        if k == 0 {
            extended.push(assemble_extended_chunk(meta, &[], cfg.position, &mut rng));
            similarities.push(Vec::new());
            continue;
        }
        let query = embedder.embed_text(&meta.text)?;
        let foreign =
            |id: ChunkId| !used.contains(&id) && index.record(id).is_some_and(|r| &*r.parent_doc_id != doc_id);
        let sampler = CorpusSampler::new(index.len(), foreign);
        let pool = if cfg.selection.uses_pool() {
            let top = index.query_top_k_below(&query, cfg.candidate_pool.max(k), cfg.similarity_ceiling, |r| {
                &*r.parent_doc_id == doc_id || used.contains(&r.chunk_id)
            })?;
            if top.candidates.len() < k {
                return Ok(ExtendOutcome::Rejected {
                    reason: RejectReason::PoolExhausted,
                    detail: format!(
                        "meta-chunk {} needs {k} negatives, {} eligible",
                        meta.ordinal,
                        top.candidates.len()
                    ),
                });
            }
            top.candidates
        } else {
            Vec::new()
        };
        let selection = select_negatives(meta, &pool, k, cfg.selection, &mut rng, &sampler)?;
        if selection.len() < k {
            return Ok(ExtendOutcome::Rejected {
                reason: RejectReason::PoolExhausted,
                detail: format!(
                    "meta-chunk {} needs {k} negatives, {} eligible",
                    meta.ordinal,
                    selection.len()
                ),
            });
        }
        let (pieces, sims): (Vec<NegativePiece<'_>>, Vec<f32>) = match &selection {
            Selection::SelfCopies(n) => {
                let s = dot(query.values(), query.values());
                (vec![NegativePiece::SelfCopy; *n], vec![s; *n])
            }
            Selection::Chunks(ids) => ids
                .iter()
                .map(|&id| {
                    let record = index.record(id).expect("selected ids come from the index");
                    let s = index.score(query.values(), id).unwrap_or(0.0);
                    (NegativePiece::Chunk { id, text: &record.text }, s)
                })
                .unzip(),
        };
        if let Selection::Chunks(ids) = &selection {
            used.extend(ids.iter().copied());
        }
        extended.push(assemble_extended_chunk(meta, &pieces, cfg.position, &mut rng));
        similarities.push(sims);
    }

    // Concatenate extended chunks, translating spans to document offsets.
    let mut text = String::new();
    let mut offset = 0usize;
    let mut layout = Vec::with_capacity(extended.len());
    for ext in &extended {
        if !text.is_empty() {
            text.push(SEPARATOR);
            offset += 1;
        }
        layout.push(Placed {
            start: offset,
            meta: (offset + ext.meta_span.0, offset + ext.meta_span.1),
            negative_starts: ext.negative_starts.iter().map(|s| offset + s).collect(),
        });
        text.push_str(&ext.text);
        offset += ext.char_len;
    }

    let tokenizer = cfg.tokenizer.counter();
    let token_len = tokenizer.count(&text);
    if token_len < cfg.target_tokens {
        return Ok(ExtendOutcome::Rejected {
            reason: RejectReason::BelowTarget,
            detail: format!("{token_len} tokens < target {}", cfg.target_tokens),
        });
    }

    let total_chars = offset;
    let mut cut = total_chars;
    if cfg.truncate_to_target {
        cut = tokenizer.prefix_chars(&text, cfg.target_tokens).unwrap_or(total_chars);
        // An extended chunk is never separated from its meta-chunk.
        if let Some(p) = layout.iter().rev().find(|p| p.start < cut) {
            cut = cut.max(p.meta.1);
        }
    }
    let truncated = cut < total_chars;

    let mut chunks = Vec::with_capacity(extended.len());
    let mut negative_similarities = Vec::new();
    for ((ext, placed), sims) in extended.iter().zip(&layout).zip(&similarities) {
        if placed.start >= cut {
            break;
        }
        let kept = placed.negative_starts.iter().filter(|&&s| s < cut).count();
        let (negatives, self_copies) = if ext.self_copies > 0 {
            (Vec::new(), kept)
        } else {
            (ext.negatives[..kept].to_vec(), 0)
        };
        negative_similarities.extend_from_slice(&sims[..kept]);
        chunks.push(ChunkProvenance {
            ordinal: ext.ordinal,
            meta_span: [placed.meta.0, placed.meta.1],
            negatives,
            meta_slot: ext.meta_slot,
            self_copies,
        });
    }
    let (text, token_len) = if truncated {
        let t = char_slice(&text, 0, cut).to_string();
        let n = tokenizer.count(&t);
        (t, n)
    } else {
        (text, token_len)
    };

    Ok(ExtendOutcome::Accepted(SynthesizedDocument {
        synth_id: SynthesizedDocument::synth_id_for(doc_id),
        text,
        token_len,
        meta: RecordMeta {
            source_doc: doc_id.to_string(),
            granularity: cfg.granularity,
            strategy: cfg.selection,
            position: cfg.position,
            seed: cfg.seed,
            truncated,
            budget,
            chunks,
        },
        negative_similarities,
    }))
}

struct Placed {
    start: usize,
    meta: (usize, usize),
    negative_starts: Vec<usize>,
}

/// Receives synthesis results in input order.
pub trait DatasetSink {
    fn accept(&mut self, doc: &SynthesizedDocument) -> Result<()>;
    fn reject(&mut self, doc_id: &str, reason: RejectReason, detail: &str) -> Result<()>;
}

/// Writes accepted records and rejects as JSON lines.
pub struct JsonlDatasetSink<W: Write, R: Write> {
    dataset: W,
    rejects: R,
}

impl<W: Write, R: Write> JsonlDatasetSink<W, R> {
    pub fn new(dataset: W, rejects: R) -> Self {
        JsonlDatasetSink { dataset, rejects }
    }

    pub fn flush(&mut self) -> Result<()> {
        self.dataset.flush()?;
        self.rejects.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> (W, R) {
        (self.dataset, self.rejects)
    }
}

#[derive(Serialize)]
struct RejectLine<'a> {
    id: &'a str,
    error: &'a str,
    detail: &'a str,
}

impl<W: Write, R: Write> DatasetSink for JsonlDatasetSink<W, R> {
    fn accept(&mut self, doc: &SynthesizedDocument) -> Result<()> {
        serde_json::to_writer(&mut self.dataset, doc)?;
        self.dataset.write_all(b"\n")?;
        Ok(())
    }

    fn reject(&mut self, doc_id: &str, reason: RejectReason, detail: &str) -> Result<()> {
        let line = RejectLine {
            id: doc_id,
            error: reason.as_str(),
            detail,
        };
        serde_json::to_writer(&mut self.rejects, &line)?;
        self.rejects.write_all(b"\n")?;
        Ok(())
    }
}

impl DatasetSink for Vec<ExtendOutcome> {
    fn accept(&mut self, doc: &SynthesizedDocument) -> Result<()> {
        self.push(ExtendOutcome::Accepted(doc.clone()));
        Ok(())
    }

    fn reject(&mut self, _doc_id: &str, reason: RejectReason, detail: &str) -> Result<()> {
        self.push(ExtendOutcome::Rejected {
            reason,
            detail: detail.to_string(),
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub min: usize,
    pub mean: f64,
    pub p50: usize,
    pub p90: usize,
    pub p99: usize,
    pub max: usize,
}

impl LengthSummary {
    pub fn from_values(mut values: Vec<usize>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_unstable();
        let n = values.len();
        let rank = |q: f64| values[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(LengthSummary {
            min: values[0],
            mean: values.iter().sum::<usize>() as f64 / n as f64,
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: values[n - 1],
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub count: u64,
    pub mean: f64,
    pub std: f64,
    #[serde(skip)]
    m2: f64,
}

impl SimilaritySummary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.std = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).sqrt()
        } else {
            0.0
        };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub token_len: Option<LengthSummary>,
    /// Accepted token length over source token length.
    pub min_extension_ratio: Option<f64>,
    pub mean_extension_ratio: Option<f64>,
    pub strategy: String,
    /// Cosine between meta-chunks and their selected negatives.
    pub similarity: SimilaritySummary,
    pub interrupted: bool,
}

impl SynthesisReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    pub fn rejected_for(&self, reason: RejectReason) -> usize {
        self.rejected.get(reason.as_str()).copied().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "attempted {}  accepted {}  rejected {}\n",
            self.attempted,
            self.accepted,
            self.rejected_total()
        );
        for (reason, n) in &self.rejected {
            out.push_str(&format!("  {reason:<16} {n}\n"));
        }
        if let Some(t) = &self.token_len {
            out.push_str(&format!(
                "token_len min {} p50 {} p90 {} p99 {} max {} mean {:.1}\n",
                t.min, t.p50, t.p90, t.p99, t.max, t.mean
            ));
        }
        if let (Some(lo), Some(mean)) = (self.min_extension_ratio, self.mean_extension_ratio) {
            out.push_str(&format!("extension ratio min {lo:.1}x mean {mean:.1}x\n"));
        }
        out.push_str(&format!(
            "similarity [{}] mean {:.4} std {:.4} over {} negatives\n",
            self.strategy, self.similarity.mean, self.similarity.std, self.similarity.count
        ));
        if self.interrupted {
            out.push_str("INTERRUPTED: output is partial\n");
        }
        out
    }
}

/// Runs [`extend_document`] over a document stream, writing results to `sink`
/// in input order. Per-document failures are tallied; sink and input errors
/// abort the run.
pub fn synthesize_corpus<I, S>(
    docs: I,
    index: &Index,
    embedder: &Embedder,
    cfg: &SynthesisConfig,
    sink: &mut S,
    stop: Option<&AtomicBool>,
) -> Result<SynthesisReport>
where
    I: IntoIterator<Item = Result<Document>>,
    S: DatasetSink + ?Sized,
{
    check_compatible(index, embedder, cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let batch_size = (pool.current_num_threads() * 4).max(16);
    let tokenizer = cfg.tokenizer.counter();

    let mut report = SynthesisReport {
        strategy: cfg.selection.as_str().to_string(),
        ..Default::default()
    };
    let mut lengths = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut docs = docs.into_iter();
    loop {
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            report.interrupted = true;
            break;
        }
        let batch: Vec<Document> = docs.by_ref().take(batch_size).collect::<Result<_>>()?;
        if batch.is_empty() {
            break;
        }
        let outcomes: Vec<Result<ExtendOutcome>> = pool.install(|| {
            batch
                .par_iter()
                .map(|doc| extend_checked(doc, index, embedder, cfg))
                .collect()
        });
        for (doc, outcome) in batch.iter().zip(outcomes) {
            report.attempted += 1;
            let outcome = outcome.unwrap_or_else(|e| ExtendOutcome::Rejected {
                reason: RejectReason::Failed,
                detail: e.to_string(),
            });
            match outcome {
                ExtendOutcome::Accepted(synth) => {
                    sink.accept(&synth)?;
                    report.accepted += 1;
                    lengths.push(synth.token_len);
                    let source_tokens = tokenizer.count(doc.text()).max(1);
                    ratios.push(synth.token_len as f64 / source_tokens as f64);
                    for &s in &synth.negative_similarities {
                        report.similarity.push(s as f64);
                    }
                }
                ExtendOutcome::Rejected { reason, detail } => {
                    sink.reject(doc.doc_id(), reason, &detail)?;
                    *report.rejected.entry(reason.as_str().to_string()).or_default() += 1;
                }
            }
        }
    }
    report.token_len = LengthSummary::from_values(lengths);
    if !ratios.is_empty() {
        report.min_extension_ratio = ratios.iter().copied().reduce(f64::min);
        report.mean_extension_ratio = Some(ratios.iter().sum::<f64>() / ratios.len() as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbedderConfig;
    use crate::synthesis::PositionStrategy;

    fn corpus() -> Vec<Document> {
        let words = [
            "river", "stone", "cloud", "maple", "ember", "frost", "delta", "quartz", "harbor", "meadow",
        ];
        (0..12)
            .map(|i| {
                let paras: Vec<String> = (0..3)
                    .map(|j| {
                        (0..6)
                            .map(|w| words[(i + j * 3 + w) % words.len()])
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect();
                Document::new(format!("doc{i}"), paras.join("\n")).unwrap()
            })
            .collect()
    }

    fn setup(s: usize) -> (Vec<Document>, Index, Embedder) {
        let docs = corpus();
        let cfg = EmbedderConfig::local(64);
        let index = Index::build_from_documents(&docs, s, &cfg).unwrap();
        (docs, index, Embedder::new(&cfg).unwrap())
    }

    #[test]
    fn zero_budget_is_identity() {
        let (docs, index, emb) = setup(40);
        let cfg = SynthesisConfig {
            target_tokens: 1,
            encoding_rate: 1.0,
            adjustment: 1.0,
            granularity: 40,
            ..Default::default()
        };
        let out = extend_document(&docs[0], &index, &emb, &cfg)
            .unwrap()
            .accepted()
            .unwrap();
        assert_eq!(out.text, docs[0].text());
        assert_eq!(out.meta.budget.k, 0);
        assert!(out.negative_ids().next().is_none());
    }

    #[test]
    fn two_meta_chunks_top_k_head_structure() {
        let (docs, index, emb) = setup(80);
        let doc = &docs[3];
        let metas = chunk_document(doc, 80).unwrap();
        assert_eq!(metas.len(), 2);
        // Q - S = 319, so k = ceil(319 / (2 * 80)) = 2.
        let s = doc.char_len() as f64;
        let cfg = SynthesisConfig {
            target_tokens: 1,
            encoding_rate: s + 2.0 * 80.0 * 2.0 - 1.0,
            adjustment: 1.0,
            granularity: 80,
            ..Default::default()
        };
        let out = extend_document(doc, &index, &emb, &cfg).unwrap().accepted().unwrap();
        assert_eq!(out.meta.budget.k, 2);
        let ids: Vec<_> = out.negative_ids().collect();
        assert_eq!(ids.len(), 4);
        assert_eq!(ids.iter().collect::<HashSet<_>>().len(), 4);
        for &id in &ids {
            assert_ne!(&*index.record(id).unwrap().parent_doc_id, doc.doc_id());
        }
        let mut expected = Vec::new();
        for (meta, prov) in metas.iter().zip(&out.meta.chunks) {
            expected.push(meta.text.clone());
            for id in &prov.negatives {
                expected.push(index.record(*id).unwrap().text.clone());
            }
            assert_eq!(out.char_slice(prov.meta_span), meta.text);
        }
        assert_eq!(out.text, expected.join("\n"));
    }

    #[test]
    fn degenerate_corpus_all_rejected_below_target() {
        let (docs, index, emb) = setup(40);
        let cfg = SynthesisConfig {
            target_tokens: 1000,
            encoding_rate: 0.01,
            granularity: 40,
            ..Default::default()
        };
        let mut sink: Vec<ExtendOutcome> = Vec::new();
        let ten = docs.iter().take(10).cloned().map(Ok);
        let report = synthesize_corpus(ten, &index, &emb, &cfg, &mut sink, None).unwrap();
        assert_eq!(report.attempted, 10);
        assert_eq!(report.accepted, 0);
        assert_eq!(report.rejected_for(RejectReason::BelowTarget), 10);
    }

    #[test]
    fn pool_exhaustion_rejects() {
        let (docs, index, emb) = setup(40);
        let cfg = SynthesisConfig {
            target_tokens: 1_000_000,
            encoding_rate: 4.0,
            granularity: 40,
            ..Default::default()
        };
        let outcome = extend_document(&docs[0], &index, &emb, &cfg).unwrap();
        assert!(matches!(
            outcome,
            ExtendOutcome::Rejected {
                reason: RejectReason::PoolExhausted,
                ..
            }
        ));
    }

    #[test]
    fn granularity_mismatch_is_config_error() {
        let (docs, index, emb) = setup(40);
        let cfg = SynthesisConfig {
            granularity: 41,
            ..Default::default()
        };
        assert!(matches!(
            extend_document(&docs[0], &index, &emb, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn truncation_cuts_at_target_outside_meta_chunks() {
        let (docs, index, emb) = setup(40);
        for position in [PositionStrategy::Head, PositionStrategy::Tail, PositionStrategy::Random] {
            let cfg = SynthesisConfig {
                target_tokens: 40,
                encoding_rate: 6.0,
                granularity: 40,
                truncate_to_target: true,
                position,
                ..Default::default()
            };
            let out = extend_document(&docs[1], &index, &emb, &cfg)
                .unwrap()
                .accepted()
                .unwrap();
            assert!(out.meta.truncated);
            assert!(out.token_len >= 40);
            let len = out.text.chars().count();
            for c in &out.meta.chunks {
                assert!(c.meta_span[1] <= len);
            }
            if position == PositionStrategy::Head {
                // The cut lands exactly on the 40th token unless it had to
                // extend to finish a meta-chunk.
                let last = out.meta.chunks.last().unwrap();
                assert!(out.token_len == 40 || last.meta_span[1] == len);
            }
        }
    }

    #[test]
    fn length_summary_nearest_rank() {
        let s = LengthSummary::from_values((1..=100).collect()).unwrap();
        assert_eq!((s.min, s.p50, s.p90, s.p99, s.max), (1, 50, 90, 99, 100));
        assert!(LengthSummary::from_values(Vec::new()).is_none());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.5, 0.25, 0.75, 1.0, 0.0];
        let mut s = SimilaritySummary::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.std - var.sqrt()).abs() < 1e-12);
    }
}
