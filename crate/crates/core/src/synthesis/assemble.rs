use super::PositionStrategy;
use crate::chunking::MetaChunk;
use crate::vindex::ChunkId;
use crate::SEPARATOR;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativePiece<'a> {
    Chunk {
        id: ChunkId,
        text: &'a str,
    },
    /// Verbatim repeat of the meta-chunk.
    SelfCopy,
}

/// A meta-chunk with its negatives, laid out in placement order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedChunk {
    pub ordinal: usize,
    /// Index of the meta-chunk among the `negatives.len() + 1` pieces.
    pub meta_slot: usize,
    pub negatives: Vec<ChunkId>,
    pub self_copies: usize,
    pub text: String,
    pub char_len: usize,
    /// Char range of the meta-chunk within `text`.
    pub meta_span: (usize, usize),
    /// Char offset of each negative piece within `text`, in negative order.
    pub negative_starts: Vec<usize>,
}

pub fn assemble_extended_chunk<R: Rng + ?Sized>(
    meta: &MetaChunk,
    negatives: &[NegativePiece<'_>],
    position: PositionStrategy,
    rng: &mut R,
) -> ExtendedChunk {
    let n = negatives.len();
    let meta_slot = match position {
        PositionStrategy::Head => 0,
        PositionStrategy::Tail => n,
        PositionStrategy::Random if n == 0 => 0,
        PositionStrategy::Random => rng.random_range(0..=n),
    };
    let mut text = String::new();
    let mut pos = 0usize;
    let mut meta_span = (0, 0);
    let mut negative_starts = Vec::with_capacity(n);
    let push = |piece: &str, text: &mut String, pos: &mut usize| {
        if !text.is_empty() {
            text.push(SEPARATOR);
            *pos += 1;
        }
        let start = *pos;
        text.push_str(piece);
        *pos += piece.chars().count();
        start
    };
    let mut ids = Vec::new();
    let mut self_copies = 0;
    for (slot, piece) in negatives.iter().enumerate() {
        if slot == meta_slot {
            let start = push(&meta.text, &mut text, &mut pos);
            meta_span = (start, pos);
        }
        let piece_text = match *piece {
            NegativePiece::Chunk { id, text } => {
                ids.push(id);
                text
            }
            NegativePiece::SelfCopy => {
                self_copies += 1;
                meta.text.as_str()
            }
        };
        negative_starts.push(push(piece_text, &mut text, &mut pos));
    }
    if meta_slot == n {
        let start = push(&meta.text, &mut text, &mut pos);
        meta_span = (start, pos);
    }
    ExtendedChunk {
        ordinal: meta.ordinal,
        meta_slot,
        negatives: ids,
        self_copies,
        char_len: pos,
        text,
        meta_span,
        negative_starts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meta() -> MetaChunk {
        MetaChunk {
            parent_doc_id: "d".into(),
            ordinal: 1,
            text: "M".into(),
            char_len: 1,
            paragraphs: 1,
        }
    }

    const NEGS: [NegativePiece<'static>; 2] = [
        NegativePiece::Chunk { id: 1, text: "N1" },
        NegativePiece::Chunk { id: 2, text: "N2" },
    ];

    #[test]
    fn head_puts_meta_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ext = assemble_extended_chunk(&meta(), &NEGS, PositionStrategy::Head, &mut rng);
        assert_eq!(ext.text, "M\nN1\nN2");
        assert_eq!(ext.meta_span, (0, 1));
        assert_eq!(ext.negative_starts, [2, 5]);
        assert_eq!(ext.negatives, [1, 2]);
        assert_eq!(ext.char_len, 7);
    }

    #[test]
    fn tail_puts_meta_last() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ext = assemble_extended_chunk(&meta(), &NEGS, PositionStrategy::Tail, &mut rng);
        assert_eq!(ext.text, "N1\nN2\nM");
        assert_eq!(ext.meta_span, (6, 7));
        assert_eq!(ext.meta_slot, 2);
    }

    #[test]
    fn random_slot_is_uniform() {
        let mut counts = [0usize; 3];
        for seed in 0..3000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ext = assemble_extended_chunk(&meta(), &NEGS, PositionStrategy::Random, &mut rng);
            let expected_start = [0, 3, 6][ext.meta_slot];
            assert_eq!(ext.meta_span.0, expected_start);
            counts[ext.meta_slot] += 1;
        }
        for c in counts {
            let freq = c as f64 / 3000.0;
            assert!((freq - 1.0 / 3.0).abs() <= 0.03, "{counts:?}");
        }
    }

    #[test]
    fn self_copies_repeat_meta_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let copies = [NegativePiece::SelfCopy, NegativePiece::SelfCopy];
        let ext = assemble_extended_chunk(&meta(), &copies, PositionStrategy::Head, &mut rng);
        assert_eq!(ext.text, "M\nM\nM");
        assert_eq!(ext.self_copies, 2);
        assert!(ext.negatives.is_empty());
    }

    #[test]
    fn no_negatives_is_meta_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ext = assemble_extended_chunk(&meta(), &[], PositionStrategy::Random, &mut rng);
        assert_eq!(ext.text, "M");
        assert_eq!(ext.meta_slot, 0);
    }
}
