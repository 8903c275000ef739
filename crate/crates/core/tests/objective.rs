mod common;

use common::oracles;
use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tfnet_core::nnkernel::{relative_error, Tensor};
use tfnet_core::objective::{
    aux_branch_loss, ctc_loss, required_frames, softened_kl, total_loss, LabelSequence, LossToggles, ObjectiveError,
    OutputLogits,
};

fn rows(t: &Tensor<f64>) -> Vec<Vec<f64>> {
    let (r, _) = t.dims2().unwrap();
    (0..r).map(|i| t.row(i).to_vec()).collect()
}

/// Random feasible instance: alphabet of `l` glosses plus blank.
fn instance(r: &mut ChaCha8Rng, max_t: usize, max_l: usize, max_u: usize) -> (Tensor<f64>, LabelSequence) {
    loop {
        let l = r.gen_range(1..=max_l);
        let u = r.gen_range(1..=max_u);
        let ids: Vec<usize> = (0..u).map(|_| r.gen_range(1..=l)).collect();
        if required_frames(&ids) > max_t {
            continue;
        }
        let t = r.gen_range(required_frames(&ids)..=max_t);
        let scale = r.gen_range(0.5..4.0);
        return (random_tensor(&[t, l + 1], r, scale), LabelSequence::new(ids).unwrap());
    }
}

#[test]
fn single_step_is_single_path() {
    let x = Tensor::from_rows(&[vec![0.3, -1.0, 2.0]]).unwrap();
    let (loss, _) = ctc_loss(&x, &LabelSequence::new(vec![2]).unwrap()).unwrap();
    let p = oracles::softmax_rows(&rows(&x));
    assert!((loss + p[0][2].ln()).abs() < 1e-14);
}

#[test]
fn uniform_two_steps_is_log_three() {
    let x = Tensor::<f64>::zeros(&[2, 3]);
    let (loss, _) = ctc_loss(&x, &LabelSequence::new(vec![1]).unwrap()).unwrap();
    assert!((loss - 3f64.ln()).abs() < 1e-14);
}

#[test]
fn repeated_label_needs_separating_blank() {
    let x = Tensor::<f64>::zeros(&[2, 3]);
    assert!(matches!(
        ctc_loss(&x, &LabelSequence::new(vec![1, 1]).unwrap()),
        Err(ObjectiveError::Infeasible { frames: 2, required: 3 })
    ));
    assert!(ctc_loss(&Tensor::<f64>::zeros(&[3, 3]), &LabelSequence::new(vec![1, 1]).unwrap()).is_ok());
    let bad = Tensor::from_rows(&[vec![0.0, f64::NAN, 0.0]]).unwrap();
    assert!(matches!(
        ctc_loss(&bad, &LabelSequence::new(vec![1]).unwrap()),
        Err(ObjectiveError::NonFinite(_))
    ));
    assert!(LabelSequence::new(vec![]).is_err());
    assert!(LabelSequence::new(vec![1, 0]).is_err());
    assert!(matches!(
        ctc_loss(&Tensor::<f64>::zeros(&[2, 3]), &LabelSequence::new(vec![3]).unwrap()),
        Err(ObjectiveError::LabelOutOfRange { .. })
    ));
}

#[test]
fn ctc_matches_brute_force() {
    let mut r = rng(11);
    for _ in 0..100 {
        let (x, labels) = instance(&mut r, 6, 4, 3);
        let (loss, _) = ctc_loss(&x, &labels).unwrap();
        let expect = oracles::ctc_brute(&rows(&x), labels.ids());
        assert!((loss - expect).abs() <= 1e-10 * expect.abs(), "{loss} vs {expect}");
    }
}

/// Occupancy of class `k` at step `t` among valid alignments, by enumeration.
fn posterior(logits: &[Vec<f64>], labels: &[usize]) -> Vec<Vec<f64>> {
    let probs = oracles::softmax_rows(logits);
    let (t, k) = (logits.len(), logits[0].len());
    let mut occ = vec![vec![0.0; k]; t];
    let mut total = 0.0;
    for p in oracles::all_paths(t, k) {
        if oracles::collapse(&p) != labels {
            continue;
        }
        let w: f64 = p.iter().enumerate().map(|(s, &c)| probs[s][c]).product();
        total += w;
        for (s, &c) in p.iter().enumerate() {
            occ[s][c] += w;
        }
    }
    occ.iter().map(|row| row.iter().map(|v| v / total).collect()).collect()
}

#[test]
fn ctc_gradient_is_softmax_minus_posterior() {
    let mut r = rng(12);
    for _ in 0..40 {
        let (x, labels) = instance(&mut r, 5, 3, 3);
        let (_, g) = ctc_loss(&x, &labels).unwrap();
        let probs = oracles::softmax_rows(&rows(&x));
        let post = posterior(&rows(&x), labels.ids());
        for (t, row) in rows(&g).iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert!((v - (probs[t][k] - post[t][k])).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ctc_gradient_matches_finite_differences() {
    let mut r = rng(13);
    let eps = 1e-5;
    for _ in 0..40 {
        let (x, labels) = instance(&mut r, 6, 4, 3);
        let (_, g) = ctc_loss(&x, &labels).unwrap();
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += eps;
            let mut minus = x.clone();
            minus.data_mut()[i] -= eps;
            let numeric = (ctc_loss(&plus, &labels).unwrap().0 - ctc_loss(&minus, &labels).unwrap().0) / (2.0 * eps);
            let rel = relative_error(g.data()[i], numeric);
            assert!(rel < 1e-6, "{} vs {numeric}: {rel}", g.data()[i]);
        }
    }
}

#[test]
fn appending_certain_blank_never_increases_loss() {
    let mut r = rng(14);
    for _ in 0..100 {
        let (x, labels) = instance(&mut r, 6, 4, 3);
        let (_, k) = x.dims2().unwrap();
        let mut extended = rows(&x);
        let mut blank = vec![-800.0; k];
        blank[0] = 0.0;
        extended.push(blank);
        let before = ctc_loss(&x, &labels).unwrap().0;
        let after = ctc_loss(&Tensor::from_rows(&extended).unwrap(), &labels).unwrap().0;
        assert!(after <= before + 1e-12, "{after} > {before}");
    }
}

#[test]
fn identical_logits_have_zero_kl() {
    let mut r = rng(15);
    let (x, labels) = instance(&mut r, 6, 4, 3);
    let aux = aux_branch_loss(&x, &x, &labels, 8.0).unwrap();
    assert!(aux.kl.abs() < 1e-15);
    assert!((aux.value - ctc_loss(&x, &labels).unwrap().0).abs() < 1e-15);
}

#[test]
fn kl_vanishes_at_high_temperature() {
    let mut r = rng(16);
    let a = random_tensor(&[4, 5], &mut r, 3.0);
    let b = random_tensor(&[4, 5], &mut r, 3.0);
    let mut prev = f64::INFINITY;
    for tau in [1.0, 10.0, 100.0, 1e4, 1e6] {
        let kl = softened_kl(&a, &b, tau).unwrap().value;
        assert!(kl < prev);
        prev = kl;
    }
    assert!(prev < 1e-10);
}

#[test]
fn kl_matches_direct_sum_and_gradients() {
    let mut r = rng(17);
    for _ in 0..30 {
        let (t, k) = (r.gen_range(1..6), r.gen_range(2..6));
        let a = random_tensor(&[t, k], &mut r, 3.0);
        let b = random_tensor(&[t, k], &mut r, 3.0);
        let tau = r.gen_range(0.5..10.0);
        let kl = softened_kl(&a, &b, tau).unwrap();
        let expect = oracles::softened_kl(&rows(&a), &rows(&b), tau);
        assert!((kl.value - expect).abs() < 1e-10);
        let eps = GRAD_EPS;
        for (which, grad) in [(0, &kl.grad_main), (1, &kl.grad_aux)] {
            for i in 0..a.len() {
                let f = |d: f64| {
                    let (mut p, mut q) = (rows(&a), rows(&b));
                    let m = if which == 0 { &mut p } else { &mut q };
                    m[i / k][i % k] += d;
                    oracles::softened_kl(&p, &q, tau)
                };
                let numeric = (f(eps) - f(-eps)) / (2.0 * eps);
                assert!(relative_error(grad.data()[i], numeric) < 1e-6, "{} vs {numeric}", grad.data()[i]);
            }
        }
    }
}

proptest! {
    #[test]
    fn kl_is_non_negative(a in proptest::collection::vec(-30.0f64..30.0, 6), b in proptest::collection::vec(-30.0f64..30.0, 6), tau in 0.1f64..20.0) {
        let a = Tensor::from_vec(&[2, 3], a).unwrap();
        let b = Tensor::from_vec(&[2, 3], b).unwrap();
        prop_assert!(softened_kl(&a, &b, tau).unwrap().value >= -1e-15);
    }
}

#[test]
fn total_loss_toggles() {
    let mut r = rng(18);
    let labels = LabelSequence::new(vec![1, 3]).unwrap();
    let main = random_tensor(&[5, 4], &mut r, 2.0);
    let at = random_tensor(&[5, 4], &mut r, 2.0);
    let af = random_tensor(&[5, 4], &mut r, 2.0);
    let outputs = OutputLogits {
        main: &main,
        aux_t: Some(&at),
        aux_f: Some(&af),
    };
    let tog = |vae_t, vae_f| LossToggles { vae_t, vae_f };
    let (all, grads) = total_loss(&outputs, &labels, tog(true, true), 8.0).unwrap();
    assert_eq!(all.l_sum, all.l_vae_t + all.l_vae_f + all.l_ctc);
    assert!(grads.aux_t.is_some() && grads.aux_f.is_some());

    let (ctc_only, grads) = total_loss(&outputs, &labels, tog(false, false), 8.0).unwrap();
    assert_eq!(ctc_only.l_sum, ctc_only.l_ctc);
    assert_eq!((ctc_only.l_vae_t, ctc_only.l_vae_f), (0.0, 0.0));
    assert!(grads.aux_t.is_none() && grads.aux_f.is_none());
    assert_eq!(grads.main, ctc_loss(&main, &labels).unwrap().1);

    let (no_f, _) = total_loss(&outputs, &labels, tog(true, false), 8.0).unwrap();
    assert!((all.l_sum - no_f.l_sum - all.l_vae_f).abs() < 1e-12);
    let (no_t, _) = total_loss(&outputs, &labels, tog(false, true), 8.0).unwrap();
    assert!((all.l_sum - no_t.l_sum - all.l_vae_t).abs() < 1e-12);

    let missing = OutputLogits {
        main: &main,
        aux_t: None,
        aux_f: Some(&af),
    };
    assert_eq!(total_loss(&missing, &labels, tog(true, true), 8.0).unwrap().0.l_vae_t, 0.0);
}
