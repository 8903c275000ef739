//! Checkpoint sections beyond the parameters.

use rand_chacha::ChaCha8Rng;

use super::{AdamState, TrainConfig, TrainError};
use crate::corpus::GlossVocabulary;
use crate::nnkernel::checkpoint::Reader;
use crate::nnkernel::{Checkpoint, ParamStore, Scalar};
use crate::tfnet::{ModelConfig, TfNet};

pub const MODEL_TAG: [u8; 4] = *b"TFNM";
pub const VOCAB_TAG: [u8; 4] = *b"TFNV";
pub const TRAIN_CONFIG_TAG: [u8; 4] = *b"TFNT";
pub const STATE_TAG: [u8; 4] = *b"TFNS";

/// Everything needed to continue a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<S> {
    /// Next epoch to run.
    pub epoch: usize,
    pub adam: AdamState<S>,
    pub best_dev_wer: Option<f64>,
    pub rng: ChaCha8Rng,
}

impl<S: Scalar> TrainState<S> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        out.extend_from_slice(&self.best_dev_wer.unwrap_or(f64::NAN).to_le_bytes());
        out.extend_from_slice(&self.rng.get_seed());
        out.extend_from_slice(&self.rng.get_stream().to_le_bytes());
        out.extend_from_slice(&self.rng.get_word_pos().to_le_bytes());
        out.extend_from_slice(&(self.adam.m.len() as u64).to_le_bytes());
        for (m, v) in self.adam.m.iter().zip(&self.adam.v) {
            out.extend_from_slice(&(m.len() as u64).to_le_bytes());
            for x in m.iter().chain(v) {
                out.extend_from_slice(&x.as_f64().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        use rand::SeedableRng;
        let mut r = Reader::new(bytes);
        let epoch = r.u64()? as usize;
        let step = r.u64()?;
        let best = r.f64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        let n = r.u64()? as usize;
        let (mut m, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            let len = r.u64()? as usize;
            let mut read = || (0..len).map(|_| r.f64().map(S::lit)).collect::<Result<Vec<_>, _>>();
            m.push(read()?);
            v.push(read()?);
        }
        if !r.is_done() {
            return Err(TrainError::State("trailing bytes after train state".into()));
        }
        Ok(Self {
            epoch,
            adam: AdamState { m, v, step },
            best_dev_wer: (!best.is_nan()).then_some(best),
            rng,
        })
    }
}

/// Parameters plus model configuration and vocabulary, optionally with the
/// training configuration and state.
pub fn build_checkpoint<S: Scalar>(
    model: &TfNet<S>,
    vocab: &GlossVocabulary,
    train: Option<(&TrainConfig, &TrainState<S>)>,
) -> Checkpoint {
    let mut ck = Checkpoint::from_store(&model.params);
    ck.set_section(MODEL_TAG, model.config.to_text().into_bytes());
    ck.set_section(VOCAB_TAG, vocab.to_text().into_bytes());
    if let Some((cfg, state)) = train {
        ck.set_section(TRAIN_CONFIG_TAG, cfg.to_text().into_bytes());
        ck.set_section(STATE_TAG, state.to_bytes());
    }
    ck
}

fn section_text(ck: &Checkpoint, tag: [u8; 4]) -> Result<Option<String>, TrainError> {
    ck.section(&tag)
        .map(|s| {
            String::from_utf8(s.payload.clone())
                .map_err(|_| TrainError::State(format!("section {} is not UTF-8", String::from_utf8_lossy(&tag))))
        })
        .transpose()
}

/// A model restored from a checkpoint.
#[derive(Debug, Clone)]
pub struct LoadedModel<S> {
    pub model: TfNet<S>,
    pub vocab: GlossVocabulary,
    pub train_config: Option<TrainConfig>,
}

pub fn restore_model<S: Scalar>(ck: &Checkpoint) -> Result<LoadedModel<S>, TrainError> {
    let cfg_text = section_text(ck, MODEL_TAG)?
        .ok_or_else(|| TrainError::State("checkpoint lacks a model configuration".into()))?;
    let vocab_text = section_text(ck, VOCAB_TAG)?
        .ok_or_else(|| TrainError::State("checkpoint lacks a vocabulary".into()))?;
    let config = ModelConfig::parse(&cfg_text)?;
    let vocab = GlossVocabulary::from_text(&vocab_text);
    if vocab.len() != config.vocab_size {
        return Err(TrainError::VocabMismatch(format!(
            "checkpoint vocabulary has {} glosses, model expects {}",
            vocab.len(),
            config.vocab_size
        )));
    }
    let params: ParamStore<S> = ck.to_store()?;
    let model = TfNet::from_params(config, params)?;
    let train_config = section_text(ck, TRAIN_CONFIG_TAG)?
        .map(|t| TrainConfig::parse(&t))
        .transpose()?;
    Ok(LoadedModel {
        model,
        vocab,
        train_config,
    })
}

pub fn restore_state<S: Scalar>(ck: &Checkpoint) -> Result<Option<TrainState<S>>, TrainError> {
    ck.section(&STATE_TAG).map(|s| TrainState::from_bytes(&s.payload)).transpose()
}
