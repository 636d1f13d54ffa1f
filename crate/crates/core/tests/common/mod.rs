#![allow(dead_code)]

use longsynth::corpus::read_all;
use longsynth::embedding::hash_embed;
use longsynth::Document;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus_1k.jsonl")
}

pub fn fixture() -> Vec<Document> {
    read_all(fixture_path()).expect("bundled fixture")
}

/// Literal trace of the greedy packer: recompute the joined length of the
/// buffer from scratch for every paragraph.
pub fn naive_chunks(text: &str, s: usize) -> Vec<String> {
    let paragraphs: Vec<&str> = text.split('\n').filter(|p| !p.is_empty()).collect();
    let mut chunks: Vec<String> = Vec::new();
    let mut buffer: Vec<&str> = Vec::new();
    for r in paragraphs {
        let mut trial = buffer.clone();
        trial.push(r);
        let joined_len = trial.iter().map(|p| p.chars().count()).sum::<usize>() + trial.len() - 1;
        if buffer.is_empty() || joined_len <= s {
            buffer = trial;
        } else {
            chunks.push(buffer.join("\n"));
            buffer = vec![r];
        }
    }
    if !buffer.is_empty() {
        chunks.push(buffer.join("\n"));
    }
    chunks
}

#[derive(Clone, Copy, Debug)]
pub enum Behavior {
    /// Answer with the local hashed embedding of each text.
    Echo,
    /// Fail the first `n` requests with status 500, then echo.
    FailFirst(usize),
    /// Always fail with status 500.
    AlwaysFail,
    /// Answer with vectors of the wrong dimension.
    WrongDim,
}

/// Minimal embedding service on a loopback port. One thread per connection,
/// `Connection: close` on every response.
pub struct MockEmbedServer {
    pub url: String,
    pub batch_sizes: Arc<Mutex<Vec<usize>>>,
    pub requests: Arc<AtomicUsize>,
}

impl MockEmbedServer {
    pub fn start(dim: usize, behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let batch_sizes = Arc::new(Mutex::new(Vec::new()));
        let requests = Arc::new(AtomicUsize::new(0));
        let (sizes, count) = (batch_sizes.clone(), requests.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (sizes, count) = (sizes.clone(), count.clone());
                std::thread::spawn(move || serve(stream, dim, behavior, &sizes, &count));
            }
        });
        MockEmbedServer {
            url,
            batch_sizes,
            requests,
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, dim: usize, behavior: Behavior, sizes: &Mutex<Vec<usize>>, count: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).unwrap();
    let n = count.fetch_add(1, Ordering::SeqCst);
    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let texts: Vec<String> = req["texts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap().to_string())
        .collect();
    sizes.lock().unwrap().push(texts.len());

    let fail = match behavior {
        Behavior::FailFirst(k) => n < k,
        Behavior::AlwaysFail => true,
        _ => false,
    };
    let (status, payload) = if fail {
        ("500 Internal Server Error", "{}".to_string())
    } else {
        let d = if matches!(behavior, Behavior::WrongDim) {
            dim + 1
        } else {
            dim
        };
        let embeddings: Vec<Vec<f32>> = texts
            .iter()
            .map(|t| {
                let mut v = hash_embed(t, dim).into_values();
                v.resize(d, 0.0);
                v
            })
            .collect();
        ("200 OK", serde_json::json!({ "embeddings": embeddings }).to_string())
    };
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = out.flush();
}

/// Random document for the chunker oracle: `1..=max_paras` paragraphs of
/// `1..=4*s` chars, with stray blank lines and some non-ASCII characters.
pub struct DocGen {
    pool: String,
}

impl DocGen {
    pub fn new(max_len: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let alphabet = b"abcdefghijklmnopqrstuvwxyz      .,";
        let pool = (0..max_len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
            .collect();
        DocGen { pool }
    }

    pub fn document<R: rand::Rng>(&self, rng: &mut R, s: usize, max_paras: usize) -> String {
        let paras = rng.random_range(1..=max_paras);
        let max_len = (4 * s).min(self.pool.len());
        let mut text = String::new();
        for i in 0..paras {
            if i > 0 {
                text.push('\n');
                if rng.random_bool(0.1) {
                    text.push('\n');
                }
            }
            let len = rng.random_range(1..=max_len);
            if rng.random_bool(0.2) {
                text.push('ü');
                let start = rng.random_range(0..=self.pool.len() - len);
                text.push_str(&self.pool[start..start + len - 1]);
            } else {
                let start = rng.random_range(0..=self.pool.len() - len);
                text.push_str(&self.pool[start..start + len]);
            }
        }
        text
    }
}

/// k from the closed form, evaluated in floating point and rounded up.
pub fn budget_oracle(t: usize, e: f64, w: f64, meta_chars: u64, p: usize, s: usize) -> usize {
    let q = (t as f64 * e * w).round();
    let k = (q - meta_chars as f64) / (p as f64 * s as f64);
    if k <= 0.0 {
        0
    } else {
        k.ceil() as usize
    }
}
