//! Synthesis of long-context training documents from short-document corpora.
//!
//! The pipeline chunks every source document into meta-chunks, mines
//! semantically similar distractor chunks ("hard negatives") from a chunk-level
//! vector index built over the same corpus, and interleaves them so that the
//! dependencies between consecutive meta-chunks become long-range.
//!
//! Stages map onto modules:
//!
//! - [`corpus`]: JSONL ingestion, reject routing and length statistics.
//! - [`chunking`]: newline split plus greedy paragraph packing under a character budget.
//! - [`embedding`]: hashed bag-of-words embedder and a remote HTTP embedder.
//! - [`vindex`]: exact top-k cosine index with a versioned snapshot format.
//! - [`synthesis`]: negative budget, selection and placement strategies, document extension.
//! - [`validate`] and [`report`]: post-hoc checks and similarity statistics over output datasets.
//! - [`cli`]: the `longsynth` command line.

pub mod chunking;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod fixture;
pub mod report;
pub mod synthesis;
pub mod tokenize;
pub mod validate;
pub mod vindex;

pub use chunking::{chunk_corpus, chunk_document, MetaChunk, DEFAULT_GRANULARITY};
pub use corpus::{compute_corpus_stats, load_corpus, CorpusStats, Document};
pub use embedding::{Embedder, EmbedderConfig, EmbeddingVector, Provider};
pub use error::{Error, Result};
pub use synthesis::{
    compute_negative_budget, extend_document, synthesize_corpus, NegativeBudget, PositionStrategy, SelectionStrategy,
    SynthesisConfig, SynthesizedDocument,
};
pub use tokenize::{TokenCounter, TokenizerKind};
pub use vindex::{ChunkRecord, Index, RetrievalCandidate};

/// Joiner placed between concatenated pieces of a synthesized document.
pub const SEPARATOR: char = '\n';
