use super::SelectionStrategy;
use crate::chunking::MetaChunk;
use crate::error::{Error, Result};
use crate::vindex::{ChunkId, RetrievalCandidate};
use rand::seq::index::sample;
use rand::Rng;
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Chunks(Vec<ChunkId>),
    /// `n` verbatim copies of the meta-chunk.
    SelfCopies(usize),
}

impl Selection {
    pub fn len(&self) -> usize {
        match self {
            Selection::Chunks(ids) => ids.len(),
            Selection::SelfCopies(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform draws from the whole index, restricted to eligible chunks.
pub struct CorpusSampler<F> {
    size: usize,
    eligible: F,
}

impl<F: Fn(ChunkId) -> bool> CorpusSampler<F> {
    pub fn new(size: usize, eligible: F) -> Self {
        CorpusSampler { size, eligible }
    }

    /// Up to `k` distinct eligible ids, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<ChunkId> {
        if k == 0 || self.size == 0 {
            return Vec::new();
        }
        let mut chosen = Vec::with_capacity(k);
        let mut seen = HashSet::with_capacity(k);
        let mut attempts = 0usize;
        let budget = 64 * k + 64;
        while chosen.len() < k && attempts < budget {
            attempts += 1;
            let id = rng.random_range(0..self.size) as ChunkId;
            if (self.eligible)(id) && seen.insert(id) {
                chosen.push(id);
            }
        }
        if chosen.len() < k {
            // Dense exclusions: finish from the explicit eligible list.
            let rest: Vec<ChunkId> = (0..self.size as ChunkId)
                .filter(|&id| (self.eligible)(id) && !seen.contains(&id))
                .collect();
            let need = (k - chosen.len()).min(rest.len());
            chosen.extend(sample(rng, rest.len(), need).into_iter().map(|i| rest[i]));
        }
        chosen
    }
}

/// Picks `k` negatives for `meta` from its ranked candidate `pool`.
///
/// The returned selection may be shorter than `k` when not enough candidates
/// exist; callers decide whether that is fatal.
pub fn select_negatives<R, F>(
    meta: &MetaChunk,
    pool: &[RetrievalCandidate],
    k: usize,
    strategy: SelectionStrategy,
    rng: &mut R,
    corpus: &CorpusSampler<F>,
) -> Result<Selection>
where
    R: Rng + ?Sized,
    F: Fn(ChunkId) -> bool,
{
    if k == 0 {
        return Ok(match strategy {
            SelectionStrategy::SelfRepeat => Selection::SelfCopies(0),
            _ => Selection::Chunks(Vec::new()),
        });
    }
    if strategy.uses_pool() && pool.is_empty() {
        return Err(Error::EmptyPool {
            doc_id: meta.parent_doc_id.to_string(),
            ordinal: meta.ordinal,
        });
    }
    let ids = match strategy {
        SelectionStrategy::SelfRepeat => return Ok(Selection::SelfCopies(k)),
        SelectionStrategy::TopK => pool.iter().take(k).map(|c| c.chunk_id).collect(),
        SelectionStrategy::TailK => pool.iter().rev().take(k).map(|c| c.chunk_id).collect(),
        SelectionStrategy::RandomR => {
            let n = k.min(pool.len());
            sample(rng, pool.len(), n)
                .into_iter()
                .map(|i| pool[i].chunk_id)
                .collect()
        }
        SelectionStrategy::RandomD => corpus.sample(rng, k),
    };
    Ok(Selection::Chunks(ids))
}
