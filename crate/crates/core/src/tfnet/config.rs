use std::path::Path;

use crate::config::{self, ConfigError, KvConfig};
use crate::nnkernel::ops::Conv1dSpec;

/// Model shape. `frame_channels` lists the output width of each 3×3,
/// stride-2 block of the frame CNN; the last entry is the frame feature
/// size `C'`. Branch outputs have width `2 · hidden`. Pixels are
/// standardised as `(x - pixel_mean) / pixel_std` before the first block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub pixel_mean: f64,
    pub pixel_std: f64,
    pub frame_channels: Vec<usize>,
    pub branch_channels: usize,
    pub conv1d: [Conv1dSpec; 2],
    pub hidden: usize,
    pub vocab_size: usize,
    pub aux_classifiers: bool,
    pub temporal_branch: bool,
    pub frequency_branch: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            input_height: 224,
            input_width: 224,
            pixel_mean: 0.5,
            pixel_std: 0.5,
            frame_channels: vec![16, 32, 64, 64],
            branch_channels: 64,
            conv1d: [Conv1dSpec::K5_P2; 2],
            hidden: 64,
            vocab_size: 0,
            aux_classifiers: true,
            temporal_branch: true,
            frequency_branch: true,
        }
    }
}

impl ModelConfig {
    pub fn frame_dim(&self) -> usize {
        *self.frame_channels.last().unwrap_or(&0)
    }

    pub fn branch_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn num_classes(&self) -> usize {
        self.vocab_size + 1
    }

    /// Shortest video the sequence branches accept.
    pub fn min_frames(&self) -> usize {
        4
    }

    /// `T'` for a video of `t` frames.
    pub fn output_len(&self, t: usize) -> Result<usize, crate::nnkernel::KernelError> {
        let a = self.conv1d[0].output_len(t)? / 2;
        let b = self.conv1d[1].output_len(a)? / 2;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !self.temporal_branch && !self.frequency_branch {
            return bad("temporal and frequency branches cannot both be disabled".into());
        }
        if self.in_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return bad("input dimensions must be positive".into());
        }
        if !(self.pixel_std > 0.0 && self.pixel_mean.is_finite()) {
            return bad("pixel_std must be positive and pixel_mean finite".into());
        }
        if self.frame_channels.is_empty() || self.frame_channels.contains(&0) {
            return bad("frame_channels needs at least one positive width".into());
        }
        if self.branch_channels == 0 || self.hidden == 0 {
            return bad("branch_channels and hidden must be positive".into());
        }
        for spec in &self.conv1d {
            if spec.kernel % 2 == 0 || spec.stride == 0 {
                return bad(format!("conv1d needs odd kernel and positive stride: {spec:?}"));
            }
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let conv = |kv: &mut KvConfig, i: usize| -> Result<Conv1dSpec, ConfigError> {
            Ok(Conv1dSpec {
                kernel: kv.take_or(&format!("conv1d_{i}_kernel"), d.conv1d[i].kernel)?,
                stride: kv.take_or(&format!("conv1d_{i}_stride"), d.conv1d[i].stride)?,
                padding: kv.take_or(&format!("conv1d_{i}_padding"), d.conv1d[i].padding)?,
            })
        };
        let cfg = Self {
            in_channels: kv.take_or("in_channels", d.in_channels)?,
            input_height: kv.take_or("input_height", d.input_height)?,
            input_width: kv.take_or("input_width", d.input_width)?,
            pixel_mean: kv.take_or("pixel_mean", d.pixel_mean)?,
            pixel_std: kv.take_or("pixel_std", d.pixel_std)?,
            frame_channels: kv.take_list("frame_channels")?.unwrap_or(d.frame_channels.clone()),
            branch_channels: kv.take_or("branch_channels", d.branch_channels)?,
            conv1d: [conv(&mut kv, 0)?, conv(&mut kv, 1)?],
            hidden: kv.take_or("hidden", d.hidden)?,
            vocab_size: kv.take_or("vocab_size", d.vocab_size)?,
            aux_classifiers: kv.take_or("aux_classifiers", d.aux_classifiers)?,
            temporal_branch: kv.take_or("temporal_branch", d.temporal_branch)?,
            frequency_branch: kv.take_or("frequency_branch", d.frequency_branch)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_kv(KvConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_kv(KvConfig::load(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut pairs = vec![
            ("in_channels", self.in_channels.to_string()),
            ("input_height", self.input_height.to_string()),
            ("input_width", self.input_width.to_string()),
            ("pixel_mean", self.pixel_mean.to_string()),
            ("pixel_std", self.pixel_std.to_string()),
            ("frame_channels", config::join_list(&self.frame_channels)),
            ("branch_channels", self.branch_channels.to_string()),
        ];
        let keys = [
            ["conv1d_0_kernel", "conv1d_0_stride", "conv1d_0_padding"],
            ["conv1d_1_kernel", "conv1d_1_stride", "conv1d_1_padding"],
        ];
        for (spec, k) in self.conv1d.iter().zip(keys) {
            pairs.push((k[0], spec.kernel.to_string()));
            pairs.push((k[1], spec.stride.to_string()));
            pairs.push((k[2], spec.padding.to_string()));
        }
        pairs.extend([
            ("hidden", self.hidden.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("aux_classifiers", self.aux_classifiers.to_string()),
            ("temporal_branch", self.temporal_branch.to_string()),
            ("frequency_branch", self.frequency_branch.to_string()),
        ]);
        config::render(&pairs)
    }
}
