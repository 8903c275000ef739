use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::state::build_checkpoint;
use super::{adam_step, evaluate, lr_at, AdamHyper, AdamState, Dataset, ModelRecognizer, TrainConfig, TrainError, TrainState};
use crate::nnkernel::Scalar;
use crate::objective::{total_loss, LossBreakdown, LossGrads, OutputLogits};
use crate::tfnet::{apply_draw, sample_draw, AugmentConfig, ModelConfig, TfNet, VideoTensor};

pub const METRICS_FILE: &str = "metrics.txt";
pub const BEST_CHECKPOINT: &str = "best.tfnc";
pub const LAST_CHECKPOINT: &str = "last.tfnc";

/// Per-epoch training summary. Losses are means over the trained samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub lr: f64,
    pub l_sum: f64,
    pub l_ctc: f64,
    pub l_vae_t: f64,
    pub l_vae_f: f64,
    pub dev_wer: Option<f64>,
    pub samples: usize,
    pub skipped: usize,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        let dev = self.dev_wer.map_or("-".to_string(), |w| w.to_string());
        format!(
            "epoch={}\tlr={}\tl_sum={}\tl_ctc={}\tl_vae_t={}\tl_vae_f={}\tdev_wer={}\tsamples={}\tskipped={}",
            self.epoch, self.lr, self.l_sum, self.l_ctc, self.l_vae_t, self.l_vae_f, dev, self.samples, self.skipped
        )
    }

    pub fn parse(line: &str) -> Result<Self, TrainError> {
        let bad = || TrainError::Metrics(line.to_string());
        let mut fields = std::collections::BTreeMap::new();
        for f in line.trim_end().split('\t') {
            let (k, v) = f.split_once('=').ok_or_else(bad)?;
            fields.insert(k, v);
        }
        fn num<T: std::str::FromStr>(fields: &std::collections::BTreeMap<&str, &str>, k: &str) -> Option<T> {
            fields.get(k)?.parse().ok()
        }
        let dev_wer = match *fields.get("dev_wer").ok_or_else(bad)? {
            "-" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        Ok(Self {
            epoch: num(&fields, "epoch").ok_or_else(bad)?,
            lr: num(&fields, "lr").ok_or_else(bad)?,
            l_sum: num(&fields, "l_sum").ok_or_else(bad)?,
            l_ctc: num(&fields, "l_ctc").ok_or_else(bad)?,
            l_vae_t: num(&fields, "l_vae_t").ok_or_else(bad)?,
            l_vae_f: num(&fields, "l_vae_f").ok_or_else(bad)?,
            dev_wer,
            samples: num(&fields, "samples").ok_or_else(bad)?,
            skipped: num(&fields, "skipped").ok_or_else(bad)?,
        })
    }
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>, TrainError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(MetricsRecord::parse).collect()
}

pub struct TrainOutcome<S> {
    pub model: TfNet<S>,
    pub state: TrainState<S>,
    pub metrics: Vec<MetricsRecord>,
    pub warnings: Vec<String>,
}

/// Fills in the vocabulary size from the corpus, or checks it.
pub fn bind_vocabulary(model_cfg: &ModelConfig, data: &Dataset) -> Result<ModelConfig, TrainError> {
    let mut cfg = model_cfg.clone();
    if cfg.vocab_size == 0 {
        cfg.vocab_size = data.vocab.len();
    } else if cfg.vocab_size != data.vocab.len() {
        return Err(TrainError::VocabMismatch(format!(
            "model config says vocab_size={}, training split has {} glosses",
            cfg.vocab_size,
            data.vocab.len()
        )));
    }
    Ok(cfg)
}

/// Runs the full schedule. With `outdir`, writes the metrics file and the
/// best-dev and last checkpoints there. `progress` sees each record as it
/// is produced.
pub fn train<S: Scalar>(
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    outdir: Option<&Path>,
    progress: &mut dyn FnMut(&MetricsRecord),
) -> Result<TrainOutcome<S>, TrainError> {
    cfg.validate()?;
    let model_cfg = bind_vocabulary(model_cfg, data)?;
    let mut data = data.clone();
    data.drop_infeasible(&model_cfg);
    let mut warnings = std::mem::take(&mut data.warnings);
    if data.train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if let Some(dir) = outdir {
        std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    }

    let mut model = TfNet::<S>::new(model_cfg.clone(), cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut state = TrainState {
        epoch: 0,
        adam: AdamState::new(&model.params),
        best_dev_wer: None,
        rng,
    };
    let aug = AugmentConfig {
        crop_height: model_cfg.input_height,
        crop_width: model_cfg.input_width,
        flip_prob: cfg.flip_prob,
        stretch_min: cfg.stretch_min,
        stretch_max: cfg.stretch_max,
    };
    let scale = S::lit(1.0 / cfg.batch_size as f64);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut metrics_text = String::new();

    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg, epoch)?;
        let hyper = AdamHyper::from_config(cfg, lr);
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut state.rng);
        let (mut sums, mut samples, mut skipped) = ([0.0f64; 4], 0usize, 0usize);

        for batch in order.chunks(cfg.batch_size) {
            model.params.zero_grads();
            let mut used = 0;
            for &i in batch {
                let sample = &data.train[i];
                let labels = sample.labels.as_ref().expect("infeasible samples dropped");
                let video = VideoTensor::<S>::from_archive(&sample.frames)?;
                let draw = sample_draw(&aug, video.frames(), video.height(), video.width(), &mut state.rng)?;
                let required = labels.required_frames();
                let out_len = if draw.length < model_cfg.min_frames() {
                    0
                } else {
                    model_cfg.output_len(draw.length)?
                };
                if out_len < required {
                    skipped += 1;
                    continue;
                }
                let video = apply_draw(&video, &aug, &draw)?;
                let pass = model.forward(&video)?;
                let outputs = OutputLogits {
                    main: pass.logits(),
                    aux_t: pass.aux_t(),
                    aux_f: pass.aux_f(),
                };
                let (loss, grads) = total_loss(&outputs, labels, cfg.losses, cfg.temperature)?;
                if !loss.l_sum.is_finite() {
                    return Err(TrainError::NonFiniteLoss { id: sample.id });
                }
                accumulate(&mut sums, &loss);
                let grads = LossGrads {
                    main: grads.main.scale(scale),
                    aux_t: grads.aux_t.map(|g| g.scale(scale)),
                    aux_f: grads.aux_f.map(|g| g.scale(scale)),
                };
                model.backward(pass, grads)?;
                used += 1;
            }
            if used > 0 {
                adam_step(&mut model.params, &mut state.adam, hyper)?;
                samples += used;
            }
        }

        let dev_wer = if data.dev.is_empty() {
            None
        } else {
            let mut rec = ModelRecognizer {
                model: &model,
                vocab: &data.vocab,
                beam_width: cfg.beam_width,
            };
            Some(evaluate(&data.dev, &mut rec)?.wer_percent())
        };
        let n = samples.max(1) as f64;
        let record = MetricsRecord {
            epoch,
            lr,
            l_sum: sums[0] / n,
            l_ctc: sums[1] / n,
            l_vae_t: sums[2] / n,
            l_vae_f: sums[3] / n,
            dev_wer,
            samples,
            skipped,
        };
        progress(&record);
        state.epoch = epoch + 1;
        let improved = match (dev_wer, state.best_dev_wer) {
            (Some(w), Some(best)) => w < best,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            state.best_dev_wer = dev_wer;
        }
        if let Some(dir) = outdir {
            let _ = writeln!(metrics_text, "{}", record.to_line());
            let path = dir.join(METRICS_FILE);
            std::fs::write(&path, &metrics_text).map_err(|e| TrainError::io(&path, e))?;
            if improved {
                let path = dir.join(BEST_CHECKPOINT);
                build_checkpoint(&model, &data.vocab, Some((cfg, &state))).save(&path)?;
            }
        }
        metrics.push(record);
    }

    if let Some(dir) = outdir {
        let ck = build_checkpoint(&model, &data.vocab, Some((cfg, &state)));
        ck.save(&dir.join(LAST_CHECKPOINT))?;
        if state.best_dev_wer.is_none() {
            ck.save(&dir.join(BEST_CHECKPOINT))?;
        }
    }
    if metrics.iter().any(|m| m.skipped > 0) {
        warnings.push("some augmented samples were too short for their labels and were skipped".into());
    }
    Ok(TrainOutcome {
        model,
        state,
        metrics,
        warnings,
    })
}

fn accumulate(sums: &mut [f64; 4], loss: &LossBreakdown) {
    sums[0] += loss.l_sum;
    sums[1] += loss.l_ctc;
    sums[2] += loss.l_vae_t;
    sums[3] += loss.l_vae_f;
}
