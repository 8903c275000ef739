use super::{Sample, TrainError};
use crate::corpus::{FrameArchive, GlossVocabulary};
use crate::decode::{beam_decode, CorpusSummary, EvalRecord};
use crate::nnkernel::{Scalar, Tensor};
use crate::tfnet::{augment::eval_draw, apply_draw, AugmentConfig, TfNet, VideoTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub glosses: Vec<String>,
    pub log_score: f64,
}

pub trait Recognizer {
    fn recognize(&mut self, sample: &Sample) -> Result<Hypothesis, TrainError>;
}

/// Returns the reference itself; a harness check that scores 0% WER.
pub struct OracleRecognizer;

impl Recognizer for OracleRecognizer {
    fn recognize(&mut self, sample: &Sample) -> Result<Hypothesis, TrainError> {
        Ok(Hypothesis {
            glosses: sample.reference.clone(),
            log_score: 0.0,
        })
    }
}

/// Centre-cropped forward pass followed by prefix beam search.
pub struct ModelRecognizer<'a, S> {
    pub model: &'a TfNet<S>,
    pub vocab: &'a GlossVocabulary,
    pub beam_width: usize,
}

impl<S: Scalar> Recognizer for ModelRecognizer<'_, S> {
    fn recognize(&mut self, sample: &Sample) -> Result<Hypothesis, TrainError> {
        let video = eval_video(self.model, &sample.frames)?;
        let logits = self.model.logits(&video)?;
        let result = beam_decode(&logits.0, self.beam_width)?;
        Ok(Hypothesis {
            glosses: self.vocab.decode(&result.glosses),
            log_score: result.log_score,
        })
    }
}

/// Converts, centre-crops to the model input size, and repeats the last
/// frame of videos shorter than the branches accept.
pub fn eval_video<S: Scalar>(model: &TfNet<S>, frames: &FrameArchive) -> Result<VideoTensor<S>, TrainError> {
    let video = VideoTensor::from_archive(frames)?;
    let cfg = AugmentConfig::with_crop(model.config.input_height, model.config.input_width);
    let draw = eval_draw(&cfg, video.frames(), video.height(), video.width())?;
    let cropped = apply_draw(&video, &cfg, &draw)?;
    let min = model.config.min_frames();
    if cropped.frames() >= min {
        return Ok(cropped);
    }
    let n = cropped.data.len() / cropped.frames();
    let mut data = cropped.data.data().to_vec();
    let last = data[data.len() - n..].to_vec();
    while data.len() < min * n {
        data.extend_from_slice(&last);
    }
    let s = cropped.data.shape();
    Ok(VideoTensor::new(Tensor::from_vec(&[min, s[1], s[2], s[3]], data)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub records: Vec<EvalRecord>,
    pub summary: CorpusSummary,
    pub log_score_sum: f64,
}

impl EvalOutcome {
    pub fn wer_percent(&self) -> f64 {
        self.summary.wer_percent()
    }

    /// Per-sentence lines followed by the summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out.push_str(&self.summary.to_line());
        out.push('\n');
        out
    }
}

/// Scores a recogniser over samples in order, micro-averaging the WER.
pub fn evaluate<R: Recognizer>(samples: &[Sample], recognizer: &mut R) -> Result<EvalOutcome, TrainError> {
    let mut records = Vec::with_capacity(samples.len());
    let mut log_score_sum = 0.0;
    for s in samples {
        let hyp = recognizer.recognize(s)?;
        log_score_sum += hyp.log_score;
        records.push(EvalRecord::new(s.id.to_string(), s.reference.clone(), hyp.glosses)?);
    }
    Ok(EvalOutcome {
        summary: CorpusSummary::from_records(&records),
        records,
        log_score_sum,
    })
}

/// The checkpoint and the corpus must agree on the training vocabulary.
pub fn check_vocabulary(checkpoint: &GlossVocabulary, corpus: &GlossVocabulary) -> Result<(), TrainError> {
    if corpus.is_empty() || checkpoint == corpus {
        return Ok(());
    }
    let missing: Vec<&str> = corpus
        .tokens()
        .iter()
        .filter(|t| !checkpoint.contains(t))
        .map(String::as_str)
        .take(5)
        .collect();
    Err(TrainError::VocabMismatch(format!(
        "checkpoint has {} glosses, corpus training split has {}; first missing: {}",
        checkpoint.len(),
        corpus.len(),
        if missing.is_empty() { "-".to_string() } else { missing.join(",") }
    )))
}
