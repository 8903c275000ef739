//! Time-frequency continuous sign language recognition on the CPU.
//!
//! The crate is organised along the recognition pipeline:
//!
//! * [`corpus`]: manifests, vocabularies, statistics, frame archives and a
//!   synthetic corpus generator.
//! * [`nnkernel`]: dense tensors, differentiable operators recorded on an
//!   explicit tape, gradient checking and the checkpoint format.
//! * [`tfnet`]: the frame-level CNN, the temporal and spectral sequence
//!   branches, fusion and classification, and video augmentation.
//! * [`objective`]: CTC and the auxiliary branch losses.
//! * [`decode`]: greedy and prefix beam-search decoding, WER and alignment
//!   reports.
//! * [`trainer`]: Adam, the learning-rate schedule, training, evaluation
//!   and ablation runs.
//! * [`cli`]: the `tfnet` command-line surface.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod decode;
pub mod nnkernel;
pub mod objective;
pub mod tfnet;
pub mod trainer;

pub use nnkernel::Scalar;
