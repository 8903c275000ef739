//! CTC prefix beam search.
//!
//! Hypotheses are collapsed label prefixes. Each carries the log-probability
//! of all paths producing it that end in a blank and of those ending in its
//! last label, so paths that collapse to the same prefix are merged.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::nnkernel::ops::log_softmax;
use crate::nnkernel::{Scalar, Tensor};
use crate::objective::BLANK;

use super::{DecodeError, DecodeResult};

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, Copy)]
struct PrefixScore {
    blank: f64,
    label: f64,
}

impl PrefixScore {
    const EMPTY: Self = Self {
        blank: f64::NEG_INFINITY,
        label: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.label)
    }
}

/// Higher total first; equal totals fall back to the lexicographically
/// smaller prefix.
fn rank(a: &(Vec<usize>, PrefixScore), b: &(Vec<usize>, PrefixScore)) -> Ordering {
    b.1.total()
        .partial_cmp(&a.1.total())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Prefix beam search keeping the `width` most probable prefixes per step.
pub fn beam_decode<S: Scalar>(logits: &Tensor<S>, width: usize) -> Result<DecodeResult, DecodeError> {
    if width < 1 {
        return Err(DecodeError::BeamWidth(width));
    }
    let (t, _) = logits.dims2().map_err(|e| DecodeError::Shape(e.to_string()))?;
    let mut beam: Vec<(Vec<usize>, PrefixScore)> = vec![(
        Vec::new(),
        PrefixScore {
            blank: 0.0,
            label: f64::NEG_INFINITY,
        },
    )];
    for r in 0..t {
        let row: Vec<f64> = logits.row(r).iter().map(|v| v.as_f64()).collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DecodeError::NonFinite);
        }
        let lp = log_softmax(&row);
        let mut next: BTreeMap<Vec<usize>, PrefixScore> = BTreeMap::new();
        for (prefix, score) in &beam {
            let total = score.total();
            let entry = next.entry(prefix.clone()).or_insert(PrefixScore::EMPTY);
            entry.blank = log_add(entry.blank, total + lp[BLANK]);
            let last = prefix.last().copied();
            if let Some(last) = last {
                entry.label = log_add(entry.label, score.label + lp[last]);
            }
            for (c, &lpc) in lp.iter().enumerate().skip(1) {
                let mut extended = prefix.clone();
                extended.push(c);
                let from = if Some(c) == last { score.blank } else { total };
                let e = next.entry(extended).or_insert(PrefixScore::EMPTY);
                e.label = log_add(e.label, from + lpc);
            }
        }
        beam = next.into_iter().collect();
        beam.sort_by(rank);
        beam.truncate(width);
    }
    let (glosses, score) = beam
        .into_iter()
        .min_by(rank)
        .expect("beam is never empty");
    Ok(DecodeResult {
        glosses,
        log_score: score.total(),
        beam_width: width,
    })
}
