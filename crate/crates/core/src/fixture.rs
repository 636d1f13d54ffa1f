//! Deterministic synthetic corpora for tests and offline runs.
//!
//! Documents are built from pseudo-words: each document belongs to one topic
//! and mixes that topic's vocabulary with a shared, Zipf-weighted general
//! vocabulary, so that chunks of the same topic are measurably closer under
//! the hashed embedder than chunks of different topics.

use crate::corpus::Document;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub docs: usize,
    pub topics: usize,
    pub topic_words: usize,
    pub general_words: usize,
    /// Probability a word is drawn from the document's topic.
    pub topic_share: f64,
    pub paragraphs: (usize, usize),
    pub words_per_paragraph: (usize, usize),
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            docs: 1000,
            topics: 20,
            topic_words: 60,
            general_words: 400,
            topic_share: 0.3,
            paragraphs: (4, 14),
            words_per_paragraph: (40, 120),
            seed: 7,
        }
    }
}

fn vocabulary(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.random_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.random_range(0..ONSETS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())]
                )
            })
            .collect();
        if taken.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Topic-structured corpus; document `i` belongs to topic `i % topics`.
pub fn topical_corpus(spec: &FixtureSpec) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = HashSet::new();
    let general = vocabulary(&mut rng, spec.general_words, &mut taken);
    let topics: Vec<Vec<String>> = (0..spec.topics)
        .map(|_| vocabulary(&mut rng, spec.topic_words, &mut taken))
        .collect();
    (0..spec.docs)
        .map(|i| {
            let topic = &topics[i % spec.topics];
            let n_paras = rng.random_range(spec.paragraphs.0..=spec.paragraphs.1);
            let paras: Vec<String> = (0..n_paras)
                .map(|_| {
                    let n_words = rng.random_range(spec.words_per_paragraph.0..=spec.words_per_paragraph.1);
                    let mut para = String::new();
                    let mut sentence_left = 0;
                    for w in 0..n_words {
                        let word = if rng.random_bool(spec.topic_share) {
                            &topic[rng.random_range(0..topic.len())]
                        } else {
                            // Squared uniform skews draws toward the head of the list.
                            let u: f64 = rng.random();
                            &general[((u * u) * general.len() as f64) as usize]
                        };
                        if sentence_left == 0 {
                            if w > 0 {
                                para.push_str(". ");
                            }
                            sentence_left = rng.random_range(8..=15);
                            let mut cs = word.chars();
                            if let Some(c) = cs.next() {
                                para.extend(c.to_uppercase());
                                para.push_str(cs.as_str());
                            }
                        } else {
                            para.push(' ');
                            para.push_str(word);
                        }
                        sentence_left -= 1;
                    }
                    para.push('.');
                    para
                })
                .collect();
            Document::new(format!("doc-{i:05}"), paras.join("\n")).expect("fixture documents are non-empty")
        })
        .collect()
}

/// `short + long` documents; short ones have at most `short_max` whitespace
/// tokens, long ones strictly more than `long_min`.
pub fn length_mix_corpus(short: usize, long: usize, short_max: usize, long_min: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(short + long);
    let mut order: Vec<bool> = std::iter::repeat_n(false, short)
        .chain(std::iter::repeat_n(true, long))
        .collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for (i, is_long) in order.into_iter().enumerate() {
        let n = if is_long {
            rng.random_range(long_min + 1..=long_min * 2)
        } else {
            rng.random_range(1..=short_max)
        };
        let text = (0..n).map(|j| format!("w{}", j % 97)).collect::<Vec<_>>().join(" ");
        docs.push(Document::new(format!("len-{i:05}"), text).unwrap());
    }
    docs
}

#[derive(Serialize)]
struct Line<'a> {
    id: &'a str,
    text: &'a str,
}

pub fn write_jsonl(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(
            &mut out,
            &Line {
                id: d.doc_id(),
                text: d.text(),
            },
        )?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
