//! Regenerates the bundled fixture corpus.
//!
//! cargo run -p longsynth --example gen_fixture -- crates/core/fixtures/corpus_1k.jsonl

use longsynth::fixture::{topical_corpus, write_jsonl, FixtureSpec};

fn main() -> longsynth::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/fixtures/corpus_1k.jsonl".into());
    let docs = topical_corpus(&FixtureSpec::default());
    write_jsonl(&docs, &out)?;
    eprintln!("wrote {} documents to {out}", docs.len());
    Ok(())
}
