//! Auxiliary per-branch alignment loss: CTC on the branch's own classifier
//! plus a temperature-softened KL term tying it to the main classifier.

use crate::nnkernel::ops::{log_softmax, softmax};
use crate::nnkernel::{Scalar, Tensor};

use super::ctc::ctc_loss;
use super::{LabelSequence, ObjectiveError};

pub const DEFAULT_TEMPERATURE: f64 = 8.0;

/// Mean over steps of `KL(p_main ‖ q_aux)` with
/// `p = softmax(main / τ)` and `q = softmax(aux / τ)`, together with its
/// gradients for both logit matrices.
#[derive(Debug, Clone)]
pub struct SoftenedKl<S> {
    pub value: S,
    pub grad_main: Tensor<S>,
    pub grad_aux: Tensor<S>,
}

pub fn softened_kl<S: Scalar>(
    main: &Tensor<S>,
    aux: &Tensor<S>,
    temperature: f64,
) -> Result<SoftenedKl<S>, ObjectiveError> {
    if main.shape() != aux.shape() {
        return Err(ObjectiveError::Shape(format!(
            "main logits {:?} vs aux logits {:?}",
            main.shape(),
            aux.shape()
        )));
    }
    if !(temperature > 0.0) {
        return Err(ObjectiveError::Shape(format!("temperature {temperature} must be positive")));
    }
    let (t, k) = main.dims2()?;
    let tau = S::lit(temperature);
    let steps = S::lit(t as f64);
    let mut value = S::zero();
    let mut grad_main = vec![S::zero(); t * k];
    let mut grad_aux = vec![S::zero(); t * k];
    for r in 0..t {
        let zm: Vec<S> = main.row(r).iter().map(|&v| v / tau).collect();
        let za: Vec<S> = aux.row(r).iter().map(|&v| v / tau).collect();
        let (lp, lq) = (log_softmax(&zm), log_softmax(&za));
        let (p, q) = (softmax(&zm), softmax(&za));
        let diff: Vec<S> = lp.iter().zip(&lq).map(|(&a, &b)| a - b).collect();
        let kl: S = p.iter().zip(&diff).map(|(&pc, &d)| pc * d).sum();
        value += kl;
        for c in 0..k {
            grad_aux[r * k + c] = (q[c] - p[c]) / (tau * steps);
            grad_main[r * k + c] = p[c] * (diff[c] - kl) / (tau * steps);
        }
    }
    Ok(SoftenedKl {
        value: value / steps,
        grad_main: Tensor::from_vec(&[t, k], grad_main)?,
        grad_aux: Tensor::from_vec(&[t, k], grad_aux)?,
    })
}

/// Value and gradients of one branch's auxiliary loss.
#[derive(Debug, Clone)]
pub struct AuxLoss<S> {
    pub value: S,
    pub ctc: S,
    pub kl: S,
    pub grad_aux: Tensor<S>,
    pub grad_main: Tensor<S>,
}

/// `CTC(aux_logits, labels) + KL_τ(main ‖ aux)`. The aux logits are the
/// branch feature passed through that branch's own classifier.
pub fn aux_branch_loss<S: Scalar>(
    aux_logits: &Tensor<S>,
    main_logits: &Tensor<S>,
    labels: &LabelSequence,
    temperature: f64,
) -> Result<AuxLoss<S>, ObjectiveError> {
    let (ctc, mut grad_aux) = ctc_loss(aux_logits, labels)?;
    let kl = softened_kl(main_logits, aux_logits, temperature)?;
    grad_aux.add_assign(&kl.grad_aux)?;
    Ok(AuxLoss {
        value: ctc + kl.value,
        ctc,
        kl: kl.value,
        grad_aux,
        grad_main: kl.grad_main,
    })
}
