use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::config::{self, ConfigError, KvConfig};
use crate::objective::{LossToggles, DEFAULT_TEMPERATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision {other:?}, expected f32 or f64")),
        }
    }
}

/// Optimisation and run settings. Epochs are zero-based: a drop at epoch
/// 35 applies from the 36th epoch run onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub beam_width: usize,
    pub seed: u64,
    pub losses: LossToggles,
    pub temperature: f64,
    pub precision: Precision,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub flip_prob: f64,
    pub stretch_min: f64,
    pub stretch_max: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            weight_decay: 1e-4,
            batch_size: 2,
            epochs: 55,
            lr_drop_epochs: vec![35, 45],
            lr_drop_factor: 0.2,
            beam_width: 10,
            seed: 0,
            losses: LossToggles::default(),
            temperature: DEFAULT_TEMPERATURE,
            precision: Precision::F64,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            flip_prob: 0.5,
            stretch_min: 0.8,
            stretch_max: 1.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if let Some(&e) = self.lr_drop_epochs.iter().find(|&&e| e >= self.epochs) {
            return bad(format!("lr drop epoch {e} is not below epochs = {}", self.epochs));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor < 1.0) {
            return bad(format!("lr_drop_factor {} outside (0, 1)", self.lr_drop_factor));
        }
        if self.batch_size == 0 || self.beam_width == 0 {
            return bad("batch_size and beam_width must be positive".into());
        }
        if !(self.lr0 >= 0.0 && self.weight_decay >= 0.0 && self.temperature > 0.0) {
            return bad("lr0 and weight_decay must be non-negative, temperature positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return bad("adam betas must lie in [0, 1) and eps be positive".into());
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip_prob {} outside [0, 1]", self.flip_prob));
        }
        if !(self.stretch_min > 0.0 && self.stretch_min <= self.stretch_max) {
            return bad("stretch range must satisfy 0 < stretch_min <= stretch_max".into());
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvConfig) -> Result<Self, ConfigError> {
        let d = Self::default();
        let cfg = Self {
            lr0: kv.take_or("lr0", d.lr0)?,
            weight_decay: kv.take_or("weight_decay", d.weight_decay)?,
            batch_size: kv.take_or("batch_size", d.batch_size)?,
            epochs: kv.take_or("epochs", d.epochs)?,
            lr_drop_epochs: kv.take_list("lr_drop_epochs")?.unwrap_or(d.lr_drop_epochs),
            lr_drop_factor: kv.take_or("lr_drop_factor", d.lr_drop_factor)?,
            beam_width: kv.take_or("beam_width", d.beam_width)?,
            seed: kv.take_or("seed", d.seed)?,
            losses: LossToggles {
                vae_t: kv.take_or("loss_vae_t", d.losses.vae_t)?,
                vae_f: kv.take_or("loss_vae_f", d.losses.vae_f)?,
            },
            temperature: kv.take_or("temperature", d.temperature)?,
            precision: kv.take_or("precision", d.precision)?,
            beta1: kv.take_or("beta1", d.beta1)?,
            beta2: kv.take_or("beta2", d.beta2)?,
            adam_eps: kv.take_or("adam_eps", d.adam_eps)?,
            flip_prob: kv.take_or("flip_prob", d.flip_prob)?,
            stretch_min: kv.take_or("stretch_min", d.stretch_min)?,
            stretch_max: kv.take_or("stretch_max", d.stretch_max)?,
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
        config::render(&[
            ("lr0", self.lr0.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr_drop_epochs", config::join_list(&self.lr_drop_epochs)),
            ("lr_drop_factor", self.lr_drop_factor.to_string()),
            ("beam_width", self.beam_width.to_string()),
            ("seed", self.seed.to_string()),
            ("loss_vae_t", self.losses.vae_t.to_string()),
            ("loss_vae_f", self.losses.vae_f.to_string()),
            ("temperature", self.temperature.to_string()),
            ("precision", self.precision.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("flip_prob", self.flip_prob.to_string()),
            ("stretch_min", self.stretch_min.to_string()),
            ("stretch_max", self.stretch_max.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = TrainConfig::default();
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_schedule() {
        assert!(TrainConfig::parse("epochs=30").is_err());
        assert!(TrainConfig::parse("epochs=50\nlr_drop_factor=1.0").is_err());
        assert!(TrainConfig::parse("epochs=0\nlr_drop_epochs=").is_err());
        assert!(TrainConfig::parse("epochs=3\nlr_drop_epochs=1,2").is_ok());
    }

    #[test]
    fn unknown_key() {
        assert!(matches!(TrainConfig::parse("lr=1"), Err(ConfigError::UnknownKey(_))));
    }
}
