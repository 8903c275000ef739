//! Word error rate by unit-cost Levenshtein alignment over gloss tokens.

use super::DecodeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Match,
    Substitution,
    Insertion,
    Deletion,
}

/// One column of an alignment. Insertions have no reference token and
/// deletions no hypothesis token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair<T> {
    pub kind: EditKind,
    pub reference: Option<T>,
    pub hypothesis: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerReport {
    pub ins: usize,
    pub del: usize,
    pub sub: usize,
    /// Reference length.
    pub sum: usize,
    pub wer_percent: f64,
}

impl WerReport {
    pub fn errors(&self) -> usize {
        self.ins + self.del + self.sub
    }
}

fn distance_table<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<Vec<usize>> {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = diag.min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
        }
    }
    d
}

/// Minimal-cost alignment. Walking back from the end, ties prefer the
/// diagonal (match or substitution), then insertion, then deletion.
pub fn align<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Vec<AlignedPair<T>> {
    let d = distance_table(reference, hypothesis);
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                ops.push(AlignedPair {
                    kind: if same {
                        EditKind::Match
                    } else {
                        EditKind::Substitution
                    },
                    reference: Some(reference[i - 1].clone()),
                    hypothesis: Some(hypothesis[j - 1].clone()),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ops.push(AlignedPair {
                kind: EditKind::Insertion,
                reference: None,
                hypothesis: Some(hypothesis[j - 1].clone()),
            });
            j -= 1;
        } else {
            ops.push(AlignedPair {
                kind: EditKind::Deletion,
                reference: Some(reference[i - 1].clone()),
                hypothesis: None,
            });
            i -= 1;
        }
    }
    ops.reverse();
    ops
}

/// `100 · (ins + del + sub) / |reference|`.
pub fn wer<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Result<WerReport, DecodeError> {
    if reference.is_empty() {
        return Err(DecodeError::EmptyReference);
    }
    Ok(report_from_alignment(&align(reference, hypothesis), reference.len()))
}

pub(crate) fn report_from_alignment<T>(ops: &[AlignedPair<T>], sum: usize) -> WerReport {
    let count = |k: EditKind| ops.iter().filter(|o| o.kind == k).count();
    let (ins, del, sub) = (
        count(EditKind::Insertion),
        count(EditKind::Deletion),
        count(EditKind::Substitution),
    );
    WerReport {
        ins,
        del,
        sub,
        sum,
        wer_percent: 100.0 * (ins + del + sub) as f64 / sum as f64,
    }
}
