use std::path::Path;

use super::TrainError;
use crate::corpus::{build_vocabulary, load_manifest, resolve_frames, CorpusEntry, FrameArchive, GlossVocabulary, Split};
use crate::objective::LabelSequence;
use crate::tfnet::ModelConfig;

/// One corpus entry with its frames loaded.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: u64,
    pub frames: FrameArchive,
    pub reference: Vec<String>,
    /// `None` when a gloss is outside the training vocabulary.
    pub labels: Option<LabelSequence>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: GlossVocabulary,
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Loads every split of a manifest, building the vocabulary from the
    /// training split.
    pub fn load(manifest: &Path) -> Result<Self, TrainError> {
        let entries = load_manifest(manifest)?;
        let vocab = build_vocabulary(entries.iter().filter(|e| e.split == Split::Train));
        Self::from_entries(manifest, &entries, vocab)
    }

    pub fn from_entries(manifest: &Path, entries: &[CorpusEntry], vocab: GlossVocabulary) -> Result<Self, TrainError> {
        let mut data = Self {
            vocab,
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
            warnings: Vec::new(),
        };
        for e in entries {
            let frames = FrameArchive::read(&resolve_frames(manifest, e))?;
            if frames.len() != e.frame_count {
                data.warnings.push(format!(
                    "entry {}: manifest lists {} frames, archive has {}",
                    e.id,
                    e.frame_count,
                    frames.len()
                ));
            }
            let labels = match data.vocab.encode(&e.glosses) {
                Ok(ids) => Some(LabelSequence::new(ids)?),
                Err(_) => None,
            };
            let sample = Sample {
                id: e.id,
                frames,
                reference: e.glosses.clone(),
                labels,
            };
            match e.split {
                Split::Train => data.train.push(sample),
                Split::Dev => data.dev.push(sample),
                Split::Test => data.test.push(sample),
            }
        }
        Ok(data)
    }

    /// Drops training samples that cannot be aligned even at their nominal
    /// length, recording a warning for each.
    pub fn drop_infeasible(&mut self, cfg: &ModelConfig) {
        let mut warnings = Vec::new();
        self.train.retain(|s| match feasible(s, cfg) {
            Ok(()) => true,
            Err(reason) => {
                warnings.push(format!("skipping training entry {}: {reason}", s.id));
                false
            }
        });
        self.warnings.extend(warnings);
    }
}

fn feasible(s: &Sample, cfg: &ModelConfig) -> Result<(), String> {
    let Some(labels) = &s.labels else {
        return Err("gloss outside the vocabulary".into());
    };
    let t = s.frames.len();
    let out = if t < cfg.min_frames() { 0 } else { cfg.output_len(t).unwrap_or(0) };
    if out < labels.required_frames() {
        return Err(format!(
            "{t} frames give {out} output steps, {} needed",
            labels.required_frames()
        ));
    }
    Ok(())
}
