//! Decoding CTC outputs into gloss sequences and scoring them.

pub mod beam;
pub mod greedy;
pub mod report;
pub mod wer;

use thiserror::Error;

pub use beam::beam_decode;
pub use greedy::{collapse, greedy_decode};
pub use report::{alignment_report, AlignmentReport, CorpusSummary, EvalRecord};
pub use wer::{align, wer, AlignedPair, EditKind, WerReport};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("beam width must be at least 1, got {0}")]
    BeamWidth(usize),
    #[error("reference is empty, WER undefined")]
    EmptyReference,
    #[error("non-finite logits")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed evaluation record: {0}")]
    Record(String),
}

/// Best gloss sequence (blank-free) and its log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub glosses: Vec<usize>,
    pub log_score: f64,
    pub beam_width: usize,
}
