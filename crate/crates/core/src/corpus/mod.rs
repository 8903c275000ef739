//! Corpus data model: annotated entries, manifests, vocabularies,
//! statistics, frame archives and the synthetic generator.

mod entry;
pub mod frames;
pub mod manifest;
pub mod stats;
pub mod synth;
mod vocab;

use std::path::Path;

use thiserror::Error;

pub use entry::{CorpusEntry, Split};
pub use frames::FrameArchive;
pub use manifest::{load_manifest, parse_manifest, resolve_frames, write_manifest};
pub use stats::{compute_stats, CorpusStats, SplitStats};
pub use synth::{generate_synthetic, synthesize, SynthConfig, SynthCorpus};
pub use vocab::{build_vocabulary, GlossVocabulary};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: gloss field is empty")]
    EmptyGloss { line: usize },
    #[error("unknown split {0:?}, expected train, dev or test")]
    UnknownSplit(String),
    #[error("invalid entry: {0}")]
    Invalid(String),
    #[error("gloss {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("frame archive: {0}")]
    Archive(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
