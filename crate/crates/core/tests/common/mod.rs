#![allow(dead_code)]
pub mod gradops;
pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfnet_core::nnkernel::{grad_check_with, Evaluation, GradCheckReport, KernelError, ParamStore, Stencil, Tape, Tensor, Var};
use tfnet_core::objective::{total_loss, LabelSequence, LossToggles, OutputLogits, DEFAULT_TEMPERATURE};
use tfnet_core::tfnet::{ModelConfig, TfNet, VideoTensor};

pub const GRAD_EPS: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Five-point gradient check of `build` under the loss `Σ r·y + ½ Σ y²` with a fixed
/// random `r`.
pub fn check_graph<F>(store: &mut ParamStore<f64>, seed: u64, build: F) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var, KernelError>,
{
    let mut weights: Option<Vec<f64>> = None;
    let mut r = rng(seed ^ 0x5eed);
    grad_check_with(store, GRAD_EPS, Stencil::FivePoint, |store, with_grad| {
        let mut tape = Tape::new();
        let y = build(&mut tape, store)?;
        let yv = tape.value(y).clone();
        let w = weights.get_or_insert_with(|| (0..yv.len()).map(|_| r.gen_range(-1.0..1.0)).collect());
        let loss: f64 = yv.data().iter().zip(w.iter()).map(|(y, w)| w * y + 0.5 * y * y).sum();
        let fingerprint = tape.fingerprint();
        if with_grad {
            let seed: Vec<f64> = yv.data().iter().zip(w.iter()).map(|(y, w)| w + y).collect();
            tape.backward(vec![(y, Tensor::from_vec(yv.shape(), seed)?)], store)?;
        }
        Ok(Evaluation { loss, fingerprint })
    })
    .unwrap()
}

/// T=8, 8×8 RGB frames, C'=8, H_lstm=8, five glosses.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        in_channels: 3,
        input_height: 8,
        input_width: 8,
        frame_channels: vec![4, 8],
        branch_channels: 8,
        hidden: 8,
        vocab_size: 5,
        ..ModelConfig::default()
    }
}

pub fn random_video(frames: usize, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> VideoTensor<f64> {
    let shape = [frames, cfg.in_channels, cfg.input_height, cfg.input_width];
    let n = shape.iter().product();
    VideoTensor::new(Tensor::from_vec(&shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()).unwrap()
}

/// Gradient check of the summed objective through the whole network.
pub fn check_model(cfg: &ModelConfig, toggles: LossToggles, seed: u64) -> GradCheckReport {
    let mut r = rng(seed);
    let model = TfNet::<f64>::new(cfg.clone(), seed).unwrap();
    let video = random_video(8, cfg, &mut r);
    let a = r.gen_range(1..=cfg.vocab_size);
    let mut b = r.gen_range(1..=cfg.vocab_size);
    while b == a {
        b = r.gen_range(1..=cfg.vocab_size);
    }
    let labels = LabelSequence::new(vec![a, b]).unwrap();
    let mut store = model.params.clone();
    grad_check_with(&mut store, GRAD_EPS, Stencil::FivePoint, |store, with_grad| {
        let mut m = TfNet::from_params(cfg.clone(), store.clone()).map_err(|e| KernelError::Param(e.to_string()))?;
        let pass = m.forward(&video).map_err(|e| KernelError::Param(e.to_string()))?;
        let outputs = OutputLogits {
            main: pass.logits(),
            aux_t: pass.aux_t(),
            aux_f: pass.aux_f(),
        };
        let (loss, grads) = total_loss(&outputs, &labels, toggles, DEFAULT_TEMPERATURE)
            .map_err(|e| KernelError::Param(e.to_string()))?;
        let fingerprint = pass.tape.fingerprint();
        if with_grad {
            m.backward(pass, grads).map_err(|e| KernelError::Param(e.to_string()))?;
            for (dst, src) in store.iter_mut().zip(m.params.iter()) {
                dst.accumulate(&src.grad)?;
            }
        }
        Ok(Evaluation {
            loss: loss.l_sum,
            fingerprint,
        })
    })
    .unwrap()
}

/// 4-gloss synthetic corpus on 12×12 frames, small enough to train in
/// seconds.
pub fn tiny_synth() -> tfnet_core::corpus::SynthConfig {
    tfnet_core::corpus::SynthConfig {
        vocab_size: 4,
        sentence_len: (1, 2),
        frames_per_gloss: (4, 6),
        rest_frames: 1,
        height: 12,
        width: 12,
        channels: 3,
        clutter_level: 0.2,
        train: 6,
        dev: 2,
        test: 2,
        seed: 1,
    }
}

pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        in_channels: 3,
        input_height: 10,
        input_width: 10,
        frame_channels: vec![4, 8],
        branch_channels: 8,
        hidden: 6,
        ..ModelConfig::default()
    }
}

pub fn tiny_train() -> tfnet_core::trainer::TrainConfig {
    tfnet_core::trainer::TrainConfig {
        lr0: 1e-2,
        epochs: 3,
        lr_drop_epochs: vec![2],
        seed: 5,
        ..Default::default()
    }
}

/// Writes the tiny corpus under `dir` and returns its manifest path.
pub fn write_tiny_corpus(dir: &std::path::Path) -> std::path::PathBuf {
    tfnet_core::corpus::generate_synthetic(&tiny_synth(), dir).unwrap().0
}
