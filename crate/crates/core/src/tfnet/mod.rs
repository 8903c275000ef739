//! The time-frequency network and its input pipeline.

pub mod augment;
pub mod config;
pub mod dft;
pub mod model;
pub mod video;

pub use augment::{augment, apply_draw, eval_draw, resample_indices, sample_draw, AugmentConfig, AugmentDraw, AugmentMode};
pub use config::ModelConfig;
pub use dft::{dft_magnitude, dft_time};
pub use model::{
    fuse_classify, parameter_layout, Branch, BranchFeature, FeatureSequence, ForwardPass, LogitSequence, TfNet,
};
pub use video::VideoTensor;

use crate::config::ConfigError;
use crate::nnkernel::KernelError;

#[derive(Debug, thiserror::Error)]
pub enum TfError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input is {got:?} (channels, height, width) but the model expects {expected:?}")]
    Resolution {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("sequence of {frames} frames is shorter than the {required} the branches need; pad temporally")]
    TooShort { frames: usize, required: usize },
    #[error("crop {crop:?} does not fit frame {frame:?}")]
    Crop { crop: (usize, usize), frame: (usize, usize) },
    #[error("{0:?} branch is disabled")]
    BranchDisabled(Branch),
    #[error("parameters: {0}")]
    Parameters(String),
}
