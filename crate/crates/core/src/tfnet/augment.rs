//! Video augmentation: spatial crop, horizontal flip, temporal stretch.

use rand::Rng;

use super::{TfError, VideoTensor};
use crate::nnkernel::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub crop_height: usize,
    pub crop_width: usize,
    pub flip_prob: f64,
    pub stretch_min: f64,
    pub stretch_max: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop_height: 224,
            crop_width: 224,
            flip_prob: 0.5,
            stretch_min: 0.8,
            stretch_max: 1.2,
        }
    }
}

impl AugmentConfig {
    pub fn with_crop(height: usize, width: usize) -> Self {
        Self {
            crop_height: height,
            crop_width: width,
            ..Self::default()
        }
    }
}

/// One sampled set of augmentation choices for a whole video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentDraw {
    pub offset: (usize, usize),
    pub flip: bool,
    pub length: usize,
}

fn check_crop(cfg: &AugmentConfig, height: usize, width: usize) -> Result<(), TfError> {
    if cfg.crop_height > height || cfg.crop_width > width || cfg.crop_height == 0 || cfg.crop_width == 0 {
        return Err(TfError::Crop {
            crop: (cfg.crop_height, cfg.crop_width),
            frame: (height, width),
        });
    }
    Ok(())
}

/// Centre crop, no flip, original length.
pub fn eval_draw(cfg: &AugmentConfig, frames: usize, height: usize, width: usize) -> Result<AugmentDraw, TfError> {
    check_crop(cfg, height, width)?;
    Ok(AugmentDraw {
        offset: ((height - cfg.crop_height) / 2, (width - cfg.crop_width) / 2),
        flip: false,
        length: frames,
    })
}

pub fn sample_draw<R: Rng>(
    cfg: &AugmentConfig,
    frames: usize,
    height: usize,
    width: usize,
    rng: &mut R,
) -> Result<AugmentDraw, TfError> {
    check_crop(cfg, height, width)?;
    let oy = rng.gen_range(0..=height - cfg.crop_height);
    let ox = rng.gen_range(0..=width - cfg.crop_width);
    let flip = rng.gen_bool(cfg.flip_prob.clamp(0.0, 1.0));
    let factor = if cfg.stretch_max > cfg.stretch_min {
        rng.gen_range(cfg.stretch_min..=cfg.stretch_max)
    } else {
        cfg.stretch_min
    };
    let length = ((frames as f64 * factor).round() as usize).max(1);
    Ok(AugmentDraw {
        offset: (oy, ox),
        flip,
        length,
    })
}

/// Nearest-frame source index for each of `to` output frames.
pub fn resample_indices(from: usize, to: usize) -> Vec<usize> {
    (0..to)
        .map(|i| {
            let src = ((i as f64 + 0.5) * from as f64 / to as f64).floor() as usize;
            src.min(from.saturating_sub(1))
        })
        .collect()
}

pub fn apply_draw<S: Scalar>(
    video: &VideoTensor<S>,
    cfg: &AugmentConfig,
    draw: &AugmentDraw,
) -> Result<VideoTensor<S>, TfError> {
    let (c, h, w) = (video.channels(), video.height(), video.width());
    check_crop(cfg, h, w)?;
    let (ch, cw) = (cfg.crop_height, cfg.crop_width);
    let (oy, ox) = draw.offset;
    if oy + ch > h || ox + cw > w {
        return Err(TfError::Crop {
            crop: (oy + ch, ox + cw),
            frame: (h, w),
        });
    }
    let indices = resample_indices(video.frames(), draw.length);
    let mut data = Vec::with_capacity(indices.len() * c * ch * cw);
    for &src in &indices {
        let frame = video.frame(src);
        for k in 0..c {
            for y in 0..ch {
                let row = &frame[(k * h + oy + y) * w + ox..][..cw];
                if draw.flip {
                    data.extend(row.iter().rev());
                } else {
                    data.extend_from_slice(row);
                }
            }
        }
    }
    Ok(VideoTensor::new(Tensor::from_vec(&[indices.len(), c, ch, cw], data)?)?)
}

pub fn augment<S: Scalar, R: Rng>(
    video: &VideoTensor<S>,
    mode: AugmentMode,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<VideoTensor<S>, TfError> {
    let (t, h, w) = (video.frames(), video.height(), video.width());
    let draw = match mode {
        AugmentMode::Train => sample_draw(cfg, t, h, w, rng)?,
        AugmentMode::Eval => eval_draw(cfg, t, h, w)?,
    };
    apply_draw(video, cfg, &draw)
}
