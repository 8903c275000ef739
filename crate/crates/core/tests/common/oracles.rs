//! Brute-force reference implementations used as test oracles.

use std::collections::BTreeMap;

/// Every length-`t` string over `0..k`.
pub fn all_paths(t: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Merges repeats, then removes blanks (id 0).
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in path {
        if Some(c) != prev && c != 0 {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

pub fn softmax_rows(logits: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logits
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

fn path_prob(probs: &[Vec<f64>], path: &[usize]) -> f64 {
    path.iter().enumerate().map(|(t, &c)| probs[t][c]).product()
}

/// `-log Σ p(path)` over every alignment collapsing to `labels`.
pub fn ctc_brute(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    let probs = softmax_rows(logits);
    let k = logits[0].len();
    let total: f64 = all_paths(logits.len(), k)
        .iter()
        .filter(|p| collapse(p) == labels)
        .map(|p| path_prob(&probs, p))
        .sum();
    -total.ln()
}

/// Most probable collapsed labelling by full marginalisation; ties go to
/// the lexicographically smaller labelling.
pub fn exhaustive_decode(logits: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let probs = softmax_rows(logits);
    let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for p in all_paths(logits.len(), logits[0].len()) {
        *mass.entry(collapse(&p)).or_default() += path_prob(&probs, &p);
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (k, v) in mass {
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((k, v));
        }
    }
    let (k, v) = best.unwrap();
    (k, v.ln())
}

/// Minimal unit cost over every edit script turning `r` into `h`,
/// enumerated without memoisation.
pub fn edit_cost_search<T: PartialEq>(r: &[T], h: &[T]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, None) => 0,
        (Some(_), None) => r.len(),
        (None, Some(_)) => h.len(),
        (Some((a, rr)), Some((b, hh))) => {
            let keep = edit_cost_search(rr, hh) + usize::from(a != b);
            let del = 1 + edit_cost_search(rr, h);
            let ins = 1 + edit_cost_search(r, hh);
            keep.min(del).min(ins)
        }
    }
}

/// `(magnitude per k per channel)` by direct O(T²) summation.
pub fn naive_dft(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = x.len();
    let c = x[0].len();
    (0..t)
        .map(|k| {
            (0..c)
                .map(|ch| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, row) in x.iter().enumerate() {
                        let ang = -2.0 * std::f64::consts::PI * (k * n) as f64 / t as f64;
                        re += row[ch] * ang.cos();
                        im += row[ch] * ang.sin();
                    }
                    (re * re + im * im).sqrt()
                })
                .collect()
        })
        .collect()
}

pub fn matmul_bias(x: &[Vec<f64>], w: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; b.len()]; x.len()];
    for i in 0..x.len() {
        for j in 0..b.len() {
            let mut s = b[j];
            for k in 0..w.len() {
                s += x[i][k] * w[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// `x`: T×Cin rows, `w[o][i][k]`, zero padding.
pub fn conv1d_sliding(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], b: &[f64], stride: usize, pad: usize) -> Vec<Vec<f64>> {
    let t = x.len() as i64;
    let k = w[0][0].len();
    let t_out = (x.len() + 2 * pad - k) / stride + 1;
    let mut out = vec![vec![0.0; w.len()]; t_out];
    for (n, row) in out.iter_mut().enumerate() {
        for (o, cell) in row.iter_mut().enumerate() {
            let mut s = b[o];
            for (j, wk) in (0..k).map(|j| (j, j)) {
                let src = (n * stride + j) as i64 - pad as i64;
                if (0..t).contains(&src) {
                    for i in 0..x[0].len() {
                        s += w[o][i][wk] * x[src as usize][i];
                    }
                }
            }
            *cell = s;
        }
    }
    out
}

pub fn window_max(x: &[Vec<f64>], k: usize, s: usize) -> Vec<Vec<f64>> {
    let t_out = (x.len() - k) / s + 1;
    (0..t_out)
        .map(|n| {
            (0..x[0].len())
                .map(|c| (0..k).map(|j| x[n * s + j][c]).fold(f64::NEG_INFINITY, f64::max))
                .collect()
        })
        .collect()
}

/// Mean over steps of `Σ p log(p/q)` with `p`, `q` the softmax of the
/// logits divided by `tau`.
pub fn softened_kl(main: &[Vec<f64>], aux: &[Vec<f64>], tau: f64) -> f64 {
    let scale = |m: &[Vec<f64>]| -> Vec<Vec<f64>> { m.iter().map(|r| r.iter().map(|v| v / tau).collect()).collect() };
    let p = softmax_rows(&scale(main));
    let q = softmax_rows(&scale(aux));
    let mut total = 0.0;
    for (pr, qr) in p.iter().zip(&q) {
        for (a, b) in pr.iter().zip(qr) {
            if *a > 0.0 {
                total += a * (a / b).ln();
            }
        }
    }
    total / main.len() as f64
}
