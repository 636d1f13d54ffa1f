use super::SynthesisConfig;
use serde::{Deserialize, Serialize};

/// Per-document negative budget. All lengths are in characters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeBudget {
    /// Q = round(T * E * w)
    pub total_chars: u64,
    /// S, length of the meta-document.
    pub meta_chars: u64,
    /// L = Q - S
    pub remaining_chars: i64,
    /// P = L / p
    pub chars_per_meta_chunk: f64,
    /// k = ceil(P / s), never negative.
    pub k: usize,
    /// Set when S >= Q: nothing to add.
    pub skip: bool,
}

pub fn compute_negative_budget(meta_chars: u64, meta_chunks: usize, cfg: &SynthesisConfig) -> NegativeBudget {
    debug_assert!(meta_chunks >= 1);
    let p = meta_chunks.max(1) as u64;
    let total = (cfg.target_tokens as f64 * cfg.encoding_rate * cfg.adjustment).round() as u64;
    let remaining = total as i64 - meta_chars as i64;
    let k = if remaining > 0 {
        (remaining as u64).div_ceil(p * cfg.granularity as u64) as usize
    } else {
        0
    };
    NegativeBudget {
        total_chars: total,
        meta_chars,
        remaining_chars: remaining,
        chars_per_meta_chunk: remaining as f64 / p as f64,
        k,
        skip: remaining <= 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: usize, e: f64, w: f64, s: usize) -> SynthesisConfig {
        SynthesisConfig {
            target_tokens: t,
            encoding_rate: e,
            adjustment: w,
            granularity: s,
            ..Default::default()
        }
    }

    #[test]
    fn worked_example() {
        let b = compute_negative_budget(1000, 2, &cfg(1000, 4.0, 1.5, 500));
        assert_eq!(b.total_chars, 6000);
        assert_eq!(b.remaining_chars, 5000);
        assert_eq!(b.chars_per_meta_chunk, 2500.0);
        assert_eq!(b.k, 5);
        assert!(!b.skip);
    }

    #[test]
    fn meta_document_fills_target() {
        let b = compute_negative_budget(6000, 3, &cfg(1000, 4.0, 1.5, 500));
        assert_eq!(b.k, 0);
        assert!(b.skip);
        let b = compute_negative_budget(9000, 3, &cfg(1000, 4.0, 1.5, 500));
        assert_eq!((b.k, b.remaining_chars), (0, -3000));
    }

    #[test]
    fn partial_chunk_rounds_up() {
        let b = compute_negative_budget(0, 1, &cfg(100, 1.0, 1.0, 30));
        assert_eq!(b.k, 4);
    }
}
