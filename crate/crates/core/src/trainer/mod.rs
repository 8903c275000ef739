//! Optimisation, the training loop, evaluation and ablation runs.

pub mod ablation;
mod adam;
mod config;
mod data;
mod eval;
pub mod state;
mod train;

use std::path::Path;

use thiserror::Error;

pub use ablation::{run_ablation, AblationResult, AblationRow, ABLATION_ROWS};
pub use adam::{adam_step, lr_at, AdamHyper, AdamState};
pub use config::{Precision, TrainConfig};
pub use data::{Dataset, Sample};
pub use eval::{check_vocabulary, eval_video, evaluate, EvalOutcome, Hypothesis, ModelRecognizer, OracleRecognizer, Recognizer};
pub use state::{build_checkpoint, restore_model, restore_state, LoadedModel, TrainState};
pub use train::{
    bind_vocabulary, parse_metrics, train, MetricsRecord, TrainOutcome, BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_FILE,
};

use crate::config::ConfigError;
use crate::corpus::CorpusError;
use crate::decode::DecodeError;
use crate::nnkernel::KernelError;
use crate::objective::ObjectiveError;
use crate::tfnet::TfError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] TfError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("non-finite gradient in {param} at index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("non-finite loss on entry {id}")]
    NonFiniteLoss { id: u64 },
    #[error("epoch {epoch} outside the schedule of {epochs} epochs")]
    Epoch { epoch: usize, epochs: usize },
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("train state: {0}")]
    State(String),
    #[error("malformed metrics line {0:?}")]
    Metrics(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
