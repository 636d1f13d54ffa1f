//! Similarity statistics between meta-chunks and the negatives placed next to
//! them, grouped by selection strategy.

use crate::embedding::{dot, Embedder};
use crate::error::{Error, Result};
use crate::synthesis::{read_dataset, SynthesizedDocument};
use crate::vindex::Index;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub records: usize,
    pub meta_chunks: usize,
    pub negatives: usize,
    pub mean: f64,
    pub std: f64,
    /// Standard error of `mean`, clustered by meta-chunk.
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub strategies: BTreeMap<String, StrategyStats>,
    /// Mean cosine over all distinct pairs of indexed chunks.
    pub corpus_mean_pairwise: Option<f64>,
    pub index_chunks: usize,
}

#[derive(Default)]
struct Accumulator {
    records: usize,
    values: Vec<f64>,
    cluster_means: Vec<f64>,
}

impl Accumulator {
    fn finish(self) -> StrategyStats {
        let n = self.values.len();
        let mean = if n == 0 {
            0.0
        } else {
            self.values.iter().sum::<f64>() / n as f64
        };
        let std = sample_std(&self.values, mean);
        let m = self.cluster_means.len();
        let cluster_mean = if m == 0 {
            0.0
        } else {
            self.cluster_means.iter().sum::<f64>() / m as f64
        };
        let stderr = if m > 1 {
            sample_std(&self.cluster_means, cluster_mean) / (m as f64).sqrt()
        } else {
            0.0
        };
        StrategyStats {
            records: self.records,
            meta_chunks: m,
            negatives: n,
            mean,
            std,
            stderr,
        }
    }
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub struct SimilarityReporter<'a> {
    index: &'a Index,
    embedder: &'a Embedder,
    acc: BTreeMap<String, Accumulator>,
}

impl<'a> SimilarityReporter<'a> {
    pub fn new(index: &'a Index, embedder: &'a Embedder) -> Result<Self> {
        if embedder.dimension() != index.dimension() {
            return Err(Error::Dimension {
                expected: index.dimension(),
                actual: embedder.dimension(),
            });
        }
        Ok(SimilarityReporter {
            index,
            embedder,
            acc: BTreeMap::new(),
        })
    }

    pub fn add(&mut self, rec: &SynthesizedDocument) -> Result<()> {
        let acc = self.acc.entry(rec.meta.strategy.as_str().to_string()).or_default();
        acc.records += 1;
        for c in &rec.meta.chunks {
            if c.negatives.is_empty() && c.self_copies == 0 {
                continue;
            }
            let meta_vec = self.embedder.embed_text(rec.char_slice(c.meta_span))?;
            let q = meta_vec.values();
            let mut sims = Vec::with_capacity(c.negatives.len() + c.self_copies);
            for &id in &c.negatives {
                let e = self.index.embedding(id).ok_or_else(|| Error::Integrity {
                    record: rec.synth_id.clone(),
                    reason: format!("negative chunk {id} is not in the index"),
                })?;
                sims.push(dot(q, e) as f64);
            }
            let self_sim = dot(q, q) as f64;
            sims.extend(std::iter::repeat_n(self_sim, c.self_copies));
            acc.cluster_means.push(sims.iter().sum::<f64>() / sims.len() as f64);
            acc.values.extend(sims);
        }
        Ok(())
    }

    pub fn finish(self) -> SimilarityReport {
        SimilarityReport {
            strategies: self.acc.into_iter().map(|(k, v)| (k, v.finish())).collect(),
            corpus_mean_pairwise: self.index.mean_pairwise_similarity(),
            index_chunks: self.index.len(),
        }
    }
}

/// Recomputes meta/negative cosines for every record of the given datasets.
pub fn report_similarity<P: AsRef<Path>>(
    datasets: &[P],
    index: &Index,
    embedder: &Embedder,
) -> Result<SimilarityReport> {
    let mut reporter = SimilarityReporter::new(index, embedder)?;
    for path in datasets {
        for rec in read_dataset(path)? {
            reporter.add(&rec?)?;
        }
    }
    Ok(reporter.finish())
}

impl SimilarityReport {
    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>10} {:>9} {:>8} {:>9}\n",
            "strategy", "records", "negatives", "mean", "std", "stderr"
        );
        for (name, s) in &self.strategies {
            out.push_str(&format!(
                "{:<12} {:>8} {:>10} {:>9.4} {:>8.4} {:>9.5}\n",
                name, s.records, s.negatives, s.mean, s.std, s.stderr
            ));
        }
        if let Some(base) = self.corpus_mean_pairwise {
            out.push_str(&format!(
                "corpus mean pairwise similarity {:.4} over {} chunks\n",
                base, self.index_chunks
            ));
        }
        out
    }

    /// One JSON object per line: a line per strategy, then the baseline.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for (name, s) in &self.strategies {
            let mut v = serde_json::to_value(s)?;
            v["strategy"] = serde_json::Value::String(name.clone());
            out.push_str(&serde_json::to_string(&v)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&serde_json::json!({
            "baseline": "corpus-mean-pairwise",
            "mean": self.corpus_mean_pairwise,
            "chunks": self.index_chunks,
        }))?);
        out.push('\n');
        Ok(out)
    }
}
