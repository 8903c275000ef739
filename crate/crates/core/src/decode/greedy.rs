use crate::nnkernel::ops::log_softmax;
use crate::nnkernel::{Scalar, Tensor};
use crate::objective::BLANK;

use super::DecodeResult;

/// Removes repeats, then blanks, from a frame-level path.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in path {
        if Some(c) != prev && c != BLANK {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Per-step argmax (lowest id on ties), collapsed. `log_score` is the
/// log-probability of the argmax path.
pub fn greedy_decode<S: Scalar>(logits: &Tensor<S>) -> DecodeResult {
    let (t, _) = logits.dims2().expect("logits are a matrix");
    let mut path = Vec::with_capacity(t);
    let mut log_score = 0.0;
    for r in 0..t {
        let row: Vec<f64> = logits.row(r).iter().map(|v| v.as_f64()).collect();
        let lp = log_softmax(&row);
        let mut best = 0;
        for (c, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = c;
            }
        }
        log_score += lp[best];
        path.push(best);
    }
    DecodeResult {
        glosses: collapse(&path),
        log_score,
        beam_width: 1,
    }
}
