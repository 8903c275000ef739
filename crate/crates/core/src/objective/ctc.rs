//! Connectionist temporal classification by log-space forward-backward.

use crate::nnkernel::ops::log_softmax_rows;
use crate::nnkernel::{Scalar, Tensor};

use super::{LabelSequence, ObjectiveError, BLANK};

/// `log(exp(a) + exp(b))` with `-inf` handled.
#[inline]
pub(crate) fn log_add<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Minimum number of frames a label sequence needs: one per label plus a
/// separating blank between equal neighbours.
pub fn required_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Blank-augmented label string `[∅, a1, ∅, a2, …, ∅]`.
fn extend_with_blanks(labels: &[usize]) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(BLANK);
    for &l in labels {
        ext.push(l);
        ext.push(BLANK);
    }
    ext
}

/// Log-space lattice of one sequence.
struct Lattice<S> {
    ext: Vec<usize>,
    alpha: Vec<S>,
    beta: Vec<S>,
    log_likelihood: S,
}

fn check_inputs<S: Scalar>(
    log_probs: &Tensor<S>,
    labels: &LabelSequence,
) -> Result<(usize, usize), ObjectiveError> {
    let (t, k) = log_probs.dims2()?;
    if let Some(&bad) = labels.ids().iter().find(|&&id| id >= k) {
        return Err(ObjectiveError::LabelOutOfRange { id: bad, classes: k });
    }
    let required = required_frames(labels.ids());
    if t < required {
        return Err(ObjectiveError::Infeasible {
            frames: t,
            required,
        });
    }
    Ok((t, k))
}

fn lattice<S: Scalar>(log_probs: &Tensor<S>, labels: &LabelSequence) -> Result<Lattice<S>, ObjectiveError> {
    let (t, _) = check_inputs(log_probs, labels)?;
    let ext = extend_with_blanks(labels.ids());
    let s_len = ext.len();
    let ninf = S::neg_infinity();
    let can_skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];

    let mut alpha = vec![ninf; t * s_len];
    alpha[0] = log_probs.at2(0, ext[0]);
    alpha[1] = log_probs.at2(0, ext[1]);
    for ti in 1..t {
        let (prev, cur) = alpha.split_at_mut(ti * s_len);
        let prev = &prev[(ti - 1) * s_len..];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == ninf {
                ninf
            } else {
                acc + log_probs.at2(ti, ext[s])
            };
        }
    }

    let mut beta = vec![ninf; t * s_len];
    let last = (t - 1) * s_len;
    beta[last + s_len - 1] = log_probs.at2(t - 1, ext[s_len - 1]);
    beta[last + s_len - 2] = log_probs.at2(t - 1, ext[s_len - 2]);
    for ti in (0..t - 1).rev() {
        let (cur, next) = beta.split_at_mut((ti + 1) * s_len);
        let cur = &mut cur[ti * s_len..];
        for s in 0..s_len {
            let mut acc = next[s];
            if s + 1 < s_len {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = if acc == ninf {
                ninf
            } else {
                acc + log_probs.at2(ti, ext[s])
            };
        }
    }

    let end = (t - 1) * s_len;
    let log_likelihood = log_add(alpha[end + s_len - 1], alpha[end + s_len - 2]);
    Ok(Lattice {
        ext,
        alpha,
        beta,
        log_likelihood,
    })
}

/// Negative log-likelihood from per-step log-probabilities. Entries may be
/// `-inf` (impossible emissions); NaN or `+inf` are rejected.
pub fn ctc_nll_from_log_probs<S: Scalar>(
    log_probs: &Tensor<S>,
    labels: &LabelSequence,
) -> Result<S, ObjectiveError> {
    if log_probs
        .data()
        .iter()
        .any(|v| v.is_nan() || *v == S::infinity())
    {
        return Err(ObjectiveError::NonFinite("log-probabilities".into()));
    }
    let lat = lattice(log_probs, labels)?;
    if lat.log_likelihood == S::neg_infinity() {
        return Err(ObjectiveError::ZeroProbability);
    }
    Ok(-lat.log_likelihood)
}

/// Per-sequence CTC loss `-log p(labels | logits)` and its gradient with
/// respect to the logits (`softmax - posterior occupancy`). Class 0 is the
/// blank.
pub fn ctc_loss<S: Scalar>(
    logits: &Tensor<S>,
    labels: &LabelSequence,
) -> Result<(S, Tensor<S>), ObjectiveError> {
    if !logits.all_finite() {
        return Err(ObjectiveError::NonFinite("logits".into()));
    }
    let log_probs = log_softmax_rows(logits)?;
    let lat = lattice(&log_probs, labels)?;
    if !lat.log_likelihood.is_finite() {
        return Err(ObjectiveError::ZeroProbability);
    }
    let (t, k) = log_probs.dims2()?;
    let s_len = lat.ext.len();
    let mut grad = log_probs.map(|v| v.exp());
    let g = grad.data_mut();
    for ti in 0..t {
        for s in 0..s_len {
            let a = lat.alpha[ti * s_len + s];
            let b = lat.beta[ti * s_len + s];
            if a == S::neg_infinity() || b == S::neg_infinity() {
                continue;
            }
            let cls = lat.ext[s];
            let occupancy = (a + b - log_probs.at2(ti, cls) - lat.log_likelihood).exp();
            g[ti * k + cls] -= occupancy;
        }
    }
    Ok((-lat.log_likelihood, grad))
}
