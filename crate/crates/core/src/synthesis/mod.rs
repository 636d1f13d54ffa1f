//! Negative document extension.
//!
//! Each meta-document is chunked at granularity `s`; every meta-chunk gets the
//! same number `k` of negatives, picked by a [`SelectionStrategy`] from the
//! nearest eligible chunks of the index and placed around the meta-chunk by a
//! [`PositionStrategy`]. Extended chunks are joined in ordinal order.

mod assemble;
mod budget;
mod extend;
mod record;
mod select;

pub use assemble::{assemble_extended_chunk, ExtendedChunk, NegativePiece};
pub use budget::{compute_negative_budget, NegativeBudget};
pub use extend::{
    document_seed, extend_document, synthesize_corpus, DatasetSink, ExtendOutcome, JsonlDatasetSink, LengthSummary,
    RejectReason, SimilaritySummary, SynthesisReport,
};
pub use record::{read_dataset, ChunkProvenance, RecordMeta, SynthesizedDocument};
pub use select::{select_negatives, CorpusSampler, Selection};

use crate::chunking::DEFAULT_GRANULARITY;
use crate::error::{Error, Result};
use crate::tokenize::TokenizerKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_POOL: usize = 512;
pub const DEFAULT_ADJUSTMENT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    /// The meta-chunk itself, repeated k times.
    SelfRepeat,
    /// The k most similar pool entries, most similar first.
    #[default]
    TopK,
    /// k pool entries drawn uniformly without replacement.
    RandomR,
    /// The k least similar pool entries, least similar first.
    TailK,
    /// k chunks drawn uniformly from the whole index.
    RandomD,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 5] = [
        SelectionStrategy::SelfRepeat,
        SelectionStrategy::TopK,
        SelectionStrategy::RandomR,
        SelectionStrategy::TailK,
        SelectionStrategy::RandomD,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::SelfRepeat => "self-repeat",
            SelectionStrategy::TopK => "top-k",
            SelectionStrategy::RandomR => "random-r",
            SelectionStrategy::TailK => "tail-k",
            SelectionStrategy::RandomD => "random-d",
        }
    }

    pub fn uses_pool(self) -> bool {
        matches!(
            self,
            SelectionStrategy::TopK | SelectionStrategy::RandomR | SelectionStrategy::TailK
        )
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SelectionStrategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown selection strategy '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionStrategy {
    #[default]
    Head,
    Tail,
    Random,
}

impl PositionStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionStrategy::Head => "head",
            PositionStrategy::Tail => "tail",
            PositionStrategy::Random => "random",
        }
    }
}

impl fmt::Display for PositionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PositionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "head" => Ok(PositionStrategy::Head),
            "tail" => Ok(PositionStrategy::Tail),
            "random" => Ok(PositionStrategy::Random),
            _ => Err(format!("unknown position strategy '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Target length in tokens.
    pub target_tokens: usize,
    /// Characters per token.
    pub encoding_rate: f64,
    /// Over-provisioning factor applied to the character budget.
    pub adjustment: f64,
    pub granularity: usize,
    pub selection: SelectionStrategy,
    pub position: PositionStrategy,
    pub candidate_pool: usize,
    pub seed: u64,
    pub truncate_to_target: bool,
    /// Drop candidates scoring above this cosine (near-duplicates).
    pub similarity_ceiling: Option<f32>,
    pub tokenizer: TokenizerKind,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            target_tokens: 8192,
            encoding_rate: 4.0,
            adjustment: DEFAULT_ADJUSTMENT,
            granularity: DEFAULT_GRANULARITY,
            selection: SelectionStrategy::TopK,
            position: PositionStrategy::Head,
            candidate_pool: DEFAULT_POOL,
            seed: 0,
            truncate_to_target: false,
            similarity_ceiling: None,
            tokenizer: TokenizerKind::Whitespace,
            workers: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.target_tokens == 0 {
            return bad("target length must be positive");
        }
        if !(self.encoding_rate.is_finite() && self.encoding_rate > 0.0) {
            return bad("encoding rate must be a positive number");
        }
        if !(self.adjustment.is_finite() && self.adjustment >= 1.0) {
            return bad("adjustment factor w must be at least 1");
        }
        if self.granularity == 0 {
            return bad("granularity must be positive");
        }
        if self.candidate_pool == 0 {
            return bad("candidate pool must be positive");
        }
        Ok(())
    }
}
