use super::EmbeddingVector;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hashed bag-of-words: lowercase, split on non-alphanumeric runs, count
/// tokens into `dim` FNV-1a buckets, L2-normalize.
pub fn hash_embed(text: &str, dim: usize) -> EmbeddingVector {
    let mut counts = vec![0.0f32; dim];
    if dim == 0 {
        return EmbeddingVector::normalized(counts);
    }
    let lower = text.to_lowercase();
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        let bucket = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    let v = EmbeddingVector::normalized(counts);
    if v.is_zero() {
        log::warn!("text without tokens embedded as the zero vector");
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedEmbedder { dim }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        hash_embed(text, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic() {
        let a = hash_embed("The quick brown fox", 256);
        let b = hash_embed("The quick brown fox", 256);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn single_token_is_one_hot() {
        let v = hash_embed("Token token TOKEN!", 8);
        assert_eq!(v.values().iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(v.values().iter().cloned().fold(0.0, f32::max), 1.0);
        assert!((v.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shared_token_scores_higher() {
        let ab = hash_embed("alpha beta", 256);
        let ag = hash_embed("alpha gamma", 256);
        let de = hash_embed("delta epsilon", 256);
        assert!(ab.cosine(&ag) > ab.cosine(&de));
    }

    #[test]
    fn empty_text_is_zero() {
        assert!(hash_embed("", 16).is_zero());
        assert!(hash_embed(" -- ", 16).is_zero());
    }
}
