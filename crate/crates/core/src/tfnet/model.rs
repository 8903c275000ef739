//! The recognition network.
//!
//! ```text
//! video ─ frame CNN ─ f_frame ─┬───────── temporal branch ── f_t ─┐
//!                              └─ |DFT| ─ spectral branch ── f_f ─┴─ + ─ linear ─ logits
//! ```
//!
//! Each branch is conv1d → maxpool(2) → conv1d → maxpool(2) → BiLSTM.
//! Optional per-branch auxiliary classifiers feed the alignment losses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dft::dft_magnitude;
use super::{ModelConfig, TfError, VideoTensor};
use crate::nnkernel::lstm::LstmVars;
use crate::nnkernel::ops::{self, linear_forward, Conv2dSpec};
use crate::nnkernel::{glorot_uniform, lstm, ParamId, ParamStore, Scalar, Tape, Tensor, Var};
use crate::objective::LossGrads;

pub const FRAME_CONV: Conv2dSpec = Conv2dSpec {
    kernel: 3,
    stride: 2,
    padding: 1,
};
const POOL: usize = 2;

/// `T×C'` per-frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<S>(pub Tensor<S>);

/// `T'×2H` output of one sequence branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFeature<S>(pub Tensor<S>);

/// `T'×(l+1)` class scores, class 0 being the blank.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitSequence<S>(pub Tensor<S>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Temporal,
    Spectral,
}

impl Branch {
    fn prefix(self) -> &'static str {
        match self {
            Branch::Temporal => "temporal",
            Branch::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LstmIds {
    w_ih: ParamId,
    w_hh: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct BranchIds {
    conv: [(ParamId, ParamId); 2],
    fwd: LstmIds,
    bwd: LstmIds,
}

#[derive(Debug, Clone, Copy)]
struct LinearIds {
    w: ParamId,
    b: ParamId,
}

/// Model configuration, parameters and the parameter handles of each
/// sub-network.
#[derive(Debug, Clone)]
pub struct TfNet<S> {
    pub config: ModelConfig,
    pub params: ParamStore<S>,
    frame: Vec<(ParamId, ParamId)>,
    temporal: Option<BranchIds>,
    spectral: Option<BranchIds>,
    classifier: LinearIds,
    aux_t: Option<LinearIds>,
    aux_f: Option<LinearIds>,
}

/// Parameter names and shapes in checkpoint order.
pub fn parameter_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut cin = cfg.in_channels;
    for (i, &cout) in cfg.frame_channels.iter().enumerate() {
        out.push((format!("frame.conv{i}.weight"), vec![cout, cin, 3, 3]));
        out.push((format!("frame.conv{i}.bias"), vec![cout]));
        cin = cout;
    }
    let h = cfg.hidden;
    for (on, branch) in [
        (cfg.temporal_branch, Branch::Temporal),
        (cfg.frequency_branch, Branch::Spectral),
    ] {
        if !on {
            continue;
        }
        let p = branch.prefix();
        let mut cin = cfg.frame_dim();
        for (i, spec) in cfg.conv1d.iter().enumerate() {
            out.push((format!("{p}.conv{i}.weight"), vec![cfg.branch_channels, cin, spec.kernel]));
            out.push((format!("{p}.conv{i}.bias"), vec![cfg.branch_channels]));
            cin = cfg.branch_channels;
        }
        for dir in ["fwd", "bwd"] {
            out.push((format!("{p}.lstm.{dir}.w_ih"), vec![4 * h, cfg.branch_channels]));
            out.push((format!("{p}.lstm.{dir}.w_hh"), vec![4 * h, h]));
            out.push((format!("{p}.lstm.{dir}.b"), vec![4 * h]));
        }
    }
    let (d, k) = (cfg.branch_dim(), cfg.num_classes());
    out.push(("classifier.weight".into(), vec![d, k]));
    out.push(("classifier.bias".into(), vec![k]));
    if cfg.aux_classifiers {
        if cfg.temporal_branch {
            out.push(("aux_t.weight".into(), vec![d, k]));
            out.push(("aux_t.bias".into(), vec![k]));
        }
        if cfg.frequency_branch {
            out.push(("aux_f.weight".into(), vec![d, k]));
            out.push(("aux_f.bias".into(), vec![k]));
        }
    }
    out
}

impl<S: Scalar> TfNet<S> {
    /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, TfError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in parameter_layout(&config) {
            let value = if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else if name.ends_with(".b") {
                let h = shape[0] / 4;
                let mut t = Tensor::zeros(&shape);
                t.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = S::one());
                t
            } else {
                let (fan_in, fan_out) = match shape[..] {
                    [cout, cin, k, k2] => (cin * k * k2, cout * k * k2),
                    [cout, cin, k] => (cin * k, cout * k),
                    [a, b] if name.contains("lstm") => (b, a / 4),
                    [a, b] => (a, b),
                    _ => (1, 1),
                };
                glorot_uniform(&shape, fan_in, fan_out, &mut rng)
            };
            params.add(name, value)?;
        }
        Self::from_params(config, params)
    }

    /// Every parameter set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Self, TfError> {
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, shape) in parameter_layout(&config) {
            params.add(name, Tensor::zeros(&shape))?;
        }
        Self::from_params(config, params)
    }

    /// Binds an existing store, checking names and shapes against
    /// [`parameter_layout`].
    pub fn from_params(config: ModelConfig, params: ParamStore<S>) -> Result<Self, TfError> {
        config.validate()?;
        let layout = parameter_layout(&config);
        if layout.len() != params.len() {
            return Err(TfError::Parameters(format!(
                "model needs {} parameters, store has {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in layout.iter().zip(params.iter()) {
            if &p.name != name || p.value.shape() != shape.as_slice() {
                return Err(TfError::Parameters(format!(
                    "expected {name} {shape:?}, found {} {:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        let id = |n: &str| params.id(n);
        let frame = (0..config.frame_channels.len())
            .map(|i| Ok((id(&format!("frame.conv{i}.weight"))?, id(&format!("frame.conv{i}.bias"))?)))
            .collect::<Result<Vec<_>, crate::nnkernel::KernelError>>()?;
        let branch = |b: Branch| -> Result<BranchIds, crate::nnkernel::KernelError> {
            let p = b.prefix();
            let lstm_ids = |dir: &str| -> Result<LstmIds, crate::nnkernel::KernelError> {
                Ok(LstmIds {
                    w_ih: id(&format!("{p}.lstm.{dir}.w_ih"))?,
                    w_hh: id(&format!("{p}.lstm.{dir}.w_hh"))?,
                    b: id(&format!("{p}.lstm.{dir}.b"))?,
                })
            };
            Ok(BranchIds {
                conv: [
                    (id(&format!("{p}.conv0.weight"))?, id(&format!("{p}.conv0.bias"))?),
                    (id(&format!("{p}.conv1.weight"))?, id(&format!("{p}.conv1.bias"))?),
                ],
                fwd: lstm_ids("fwd")?,
                bwd: lstm_ids("bwd")?,
            })
        };
        let linear = |p: &str| -> Result<LinearIds, crate::nnkernel::KernelError> {
            Ok(LinearIds {
                w: id(&format!("{p}.weight"))?,
                b: id(&format!("{p}.bias"))?,
            })
        };
        let temporal = config.temporal_branch.then(|| branch(Branch::Temporal)).transpose()?;
        let spectral = config.frequency_branch.then(|| branch(Branch::Spectral)).transpose()?;
        let classifier = linear("classifier")?;
        let aux_t = (config.aux_classifiers && config.temporal_branch)
            .then(|| linear("aux_t"))
            .transpose()?;
        let aux_f = (config.aux_classifiers && config.frequency_branch)
            .then(|| linear("aux_f"))
            .transpose()?;
        Ok(Self {
            config,
            params,
            frame,
            temporal,
            spectral,
            classifier,
            aux_t,
            aux_f,
        })
    }

    fn check_video(&self, video: &VideoTensor<S>) -> Result<(), TfError> {
        let cfg = &self.config;
        let expected = (cfg.in_channels, cfg.input_height, cfg.input_width);
        let got = (video.channels(), video.height(), video.width());
        if expected != got {
            return Err(TfError::Resolution { expected, got });
        }
        Ok(())
    }

    fn frame_cnn(&self, tape: &mut Tape<S>, video: &VideoTensor<S>) -> Result<Var, TfError> {
        self.check_video(video)?;
        let (mean, scale) = (S::lit(self.config.pixel_mean), S::lit(1.0 / self.config.pixel_std));
        let mut x = tape.leaf(video.data.map(|v| (v - mean) * scale));
        for &(w, b) in &self.frame {
            let (w, b) = (tape.param(&self.params, w), tape.param(&self.params, b));
            let y = ops::conv2d(tape, x, w, b, FRAME_CONV)?;
            x = ops::relu(tape, y);
        }
        Ok(ops::global_avg_pool(tape, x)?)
    }

    fn branch(&self, tape: &mut Tape<S>, ids: &BranchIds, x: Var) -> Result<Var, TfError> {
        let t = tape.value(x).shape()[0];
        if t < self.config.min_frames() {
            return Err(TfError::TooShort {
                frames: t,
                required: self.config.min_frames(),
            });
        }
        let mut h = x;
        for (&(w, b), &spec) in ids.conv.iter().zip(&self.config.conv1d) {
            let (w, b) = (tape.param(&self.params, w), tape.param(&self.params, b));
            let y = ops::conv1d(tape, h, w, b, spec)?;
            h = ops::maxpool1d(tape, y, POOL, POOL)?;
        }
        let lstm_vars = |tape: &mut Tape<S>, l: LstmIds| LstmVars {
            w_ih: tape.param(&self.params, l.w_ih),
            w_hh: tape.param(&self.params, l.w_hh),
            b: tape.param(&self.params, l.b),
        };
        let fwd = lstm_vars(tape, ids.fwd);
        let bwd = lstm_vars(tape, ids.bwd);
        Ok(lstm::bilstm(tape, h, fwd, bwd)?)
    }

    fn linear(&self, tape: &mut Tape<S>, ids: LinearIds, x: Var) -> Result<Var, TfError> {
        let (w, b) = (tape.param(&self.params, ids.w), tape.param(&self.params, ids.b));
        Ok(ops::linear(tape, x, w, b)?)
    }

    /// Records the full forward pass on a fresh tape.
    pub fn forward(&self, video: &VideoTensor<S>) -> Result<ForwardPass<S>, TfError> {
        let mut tape = Tape::new();
        let frame_features = self.frame_cnn(&mut tape, video)?;
        let temporal = match &self.temporal {
            Some(ids) => Some(self.branch(&mut tape, ids, frame_features)?),
            None => None,
        };
        let (spectrum, spectral) = match &self.spectral {
            Some(ids) => {
                let s = dft_magnitude(&mut tape, frame_features)?;
                (Some(s), Some(self.branch(&mut tape, ids, s)?))
            }
            None => (None, None),
        };
        let fused = match (temporal, spectral) {
            (Some(a), Some(b)) => ops::add(&mut tape, a, b)?,
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("validated config keeps one branch"),
        };
        let logits = self.linear(&mut tape, self.classifier, fused)?;
        let aux_t = match (self.aux_t, temporal) {
            (Some(ids), Some(x)) => Some(self.linear(&mut tape, ids, x)?),
            _ => None,
        };
        let aux_f = match (self.aux_f, spectral) {
            (Some(ids), Some(x)) => Some(self.linear(&mut tape, ids, x)?),
            _ => None,
        };
        Ok(ForwardPass {
            tape,
            frame_features,
            spectrum,
            temporal,
            spectral,
            logits,
            aux_t,
            aux_f,
        })
    }

    /// Seeds the recorded pass with loss cotangents and accumulates
    /// parameter gradients.
    pub fn backward(&mut self, pass: ForwardPass<S>, grads: LossGrads<S>) -> Result<(), TfError> {
        let mut seeds = vec![(pass.logits, grads.main)];
        if let (Some(v), Some(g)) = (pass.aux_t, grads.aux_t) {
            seeds.push((v, g));
        }
        if let (Some(v), Some(g)) = (pass.aux_f, grads.aux_f) {
            seeds.push((v, g));
        }
        pass.tape.backward(seeds, &mut self.params)?;
        Ok(())
    }

    pub fn extract_frame_features(&self, video: &VideoTensor<S>) -> Result<FeatureSequence<S>, TfError> {
        let mut tape = Tape::new();
        let v = self.frame_cnn(&mut tape, video)?;
        Ok(FeatureSequence(tape.value(v).clone()))
    }

    /// Runs one branch on an arbitrary `T×C'` sequence.
    pub fn run_branch(&self, branch: Branch, x: &Tensor<S>) -> Result<BranchFeature<S>, TfError> {
        let ids = match branch {
            Branch::Temporal => self.temporal.as_ref(),
            Branch::Spectral => self.spectral.as_ref(),
        }
        .ok_or(TfError::BranchDisabled(branch))?;
        let mut tape = Tape::new();
        let x = tape.leaf(x.clone());
        let y = self.branch(&mut tape, ids, x)?;
        Ok(BranchFeature(tape.value(y).clone()))
    }

    pub fn logits(&self, video: &VideoTensor<S>) -> Result<LogitSequence<S>, TfError> {
        let pass = self.forward(video)?;
        Ok(LogitSequence(pass.value(pass.logits).clone()))
    }

    pub fn classifier(&self) -> (&Tensor<S>, &Tensor<S>) {
        (
            self.params.value(self.classifier.w),
            self.params.value(self.classifier.b),
        )
    }
}

/// A recorded forward pass with handles to its intermediate values.
pub struct ForwardPass<S: Scalar> {
    pub tape: Tape<S>,
    pub frame_features: Var,
    pub spectrum: Option<Var>,
    pub temporal: Option<Var>,
    pub spectral: Option<Var>,
    pub logits: Var,
    pub aux_t: Option<Var>,
    pub aux_f: Option<Var>,
}

impl<S: Scalar> ForwardPass<S> {
    pub fn value(&self, v: Var) -> &Tensor<S> {
        self.tape.value(v)
    }

    pub fn logits(&self) -> &Tensor<S> {
        self.tape.value(self.logits)
    }

    pub fn aux_t(&self) -> Option<&Tensor<S>> {
        self.aux_t.map(|v| self.tape.value(v))
    }

    pub fn aux_f(&self) -> Option<&Tensor<S>> {
        self.aux_f.map(|v| self.tape.value(v))
    }
}

/// Sums the enabled branch features and applies the classifier. With one
/// branch absent the sum is the other branch alone.
pub fn fuse_classify<S: Scalar>(
    temporal: Option<&BranchFeature<S>>,
    spectral: Option<&BranchFeature<S>>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<LogitSequence<S>, TfError> {
    let fused = match (temporal, spectral) {
        (Some(a), Some(b)) => a.0.add(&b.0)?,
        (Some(a), None) | (None, Some(a)) => a.0.clone(),
        (None, None) => return Err(TfError::Parameters("no branch feature to classify".into())),
    };
    Ok(LogitSequence(linear_forward(&fused, weight, bias)?))
}
