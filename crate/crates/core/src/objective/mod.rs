//! Training objective: main CTC loss plus the two auxiliary branch losses,
//! summed without weights.

pub mod aux;
pub mod ctc;

use thiserror::Error;

use crate::nnkernel::{KernelError, Scalar, Tensor};

pub use aux::{aux_branch_loss, softened_kl, AuxLoss, SoftenedKl, DEFAULT_TEMPERATURE};
pub use ctc::{ctc_loss, ctc_nll_from_log_probs, required_frames};

/// Class index reserved for the CTC blank.
pub const BLANK: usize = 0;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("label sequence needs {required} frames but only {frames} are available")]
    Infeasible { frames: usize, required: usize },
    #[error("label id {id} outside 1..{classes}")]
    LabelOutOfRange { id: usize, classes: usize },
    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("label sequence has zero probability")]
    ZeroProbability,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl From<KernelError> for ObjectiveError {
    fn from(e: KernelError) -> Self {
        ObjectiveError::Shape(e.to_string())
    }
}

/// Non-empty gloss id sequence without blanks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSequence(Vec<usize>);

impl LabelSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self, ObjectiveError> {
        if ids.is_empty() {
            return Err(ObjectiveError::InvalidLabels("empty".into()));
        }
        if ids.contains(&BLANK) {
            return Err(ObjectiveError::InvalidLabels("contains the blank id".into()));
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn required_frames(&self) -> usize {
        required_frames(&self.0)
    }
}

/// Which auxiliary terms participate. The main CTC term is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossToggles {
    pub vae_t: bool,
    pub vae_f: bool,
}

impl Default for LossToggles {
    fn default() -> Self {
        Self {
            vae_t: true,
            vae_f: true,
        }
    }
}

/// `l_sum = l_vae_t + l_vae_f + l_ctc`, with disabled terms exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l_ctc: f64,
    pub l_vae_t: f64,
    pub l_vae_f: f64,
    pub l_sum: f64,
}

impl LossBreakdown {
    pub fn from_terms(l_ctc: f64, l_vae_t: f64, l_vae_f: f64) -> Self {
        Self {
            l_ctc,
            l_vae_t,
            l_vae_f,
            l_sum: l_vae_t + l_vae_f + l_ctc,
        }
    }
}

/// Logit matrices produced by one forward pass.
#[derive(Debug, Clone)]
pub struct OutputLogits<'a, S> {
    pub main: &'a Tensor<S>,
    pub aux_t: Option<&'a Tensor<S>>,
    pub aux_f: Option<&'a Tensor<S>>,
}

/// Cotangents for each logit matrix of [`OutputLogits`].
#[derive(Debug, Clone)]
pub struct LossGrads<S> {
    pub main: Tensor<S>,
    pub aux_t: Option<Tensor<S>>,
    pub aux_f: Option<Tensor<S>>,
}

/// Evaluates every enabled term. A term is enabled when its toggle is on
/// and the corresponding aux logits exist; otherwise it contributes 0 and
/// no gradient.
pub fn total_loss<S: Scalar>(
    outputs: &OutputLogits<'_, S>,
    labels: &LabelSequence,
    toggles: LossToggles,
    temperature: f64,
) -> Result<(LossBreakdown, LossGrads<S>), ObjectiveError> {
    let (l_ctc, mut grad_main) = ctc_loss(outputs.main, labels)?;
    let mut aux_term = |aux: Option<&Tensor<S>>, on: bool| -> Result<(f64, Option<Tensor<S>>), ObjectiveError> {
        match aux {
            Some(aux) if on => {
                let term = aux_branch_loss(aux, outputs.main, labels, temperature)?;
                grad_main.add_assign(&term.grad_main)?;
                Ok((term.value.as_f64(), Some(term.grad_aux)))
            }
            _ => Ok((0.0, None)),
        }
    };
    let (l_vae_t, aux_t) = aux_term(outputs.aux_t, toggles.vae_t)?;
    let (l_vae_f, aux_f) = aux_term(outputs.aux_f, toggles.vae_f)?;
    Ok((
        LossBreakdown::from_terms(l_ctc.as_f64(), l_vae_t, l_vae_f),
        LossGrads {
            main: grad_main,
            aux_t,
            aux_f,
        },
    ))
}
