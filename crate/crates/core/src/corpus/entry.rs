use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

/// One annotated video.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub id: u64,
    pub signer: String,
    pub split: Split,
    /// Unsegmented spoken-language translation.
    pub sentence: String,
    /// Segmented gloss tokens. Direction `(…)` and turn `[…]` markers are
    /// part of the token.
    pub glosses: Vec<String>,
    /// Glosses realised with regional signs.
    pub notes: Vec<String>,
    pub frame_count: usize,
    pub fps: f64,
    /// Frame archive location, relative to the manifest's directory unless
    /// absolute.
    pub frames_path: PathBuf,
}

impl CorpusEntry {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.glosses.is_empty() {
            return Err(CorpusError::Invalid(format!("entry {}: no glosses", self.id)));
        }
        if self.glosses.iter().any(|g| g.trim().is_empty()) {
            return Err(CorpusError::Invalid(format!("entry {}: empty gloss token", self.id)));
        }
        if let Some(n) = self.notes.iter().find(|n| !self.glosses.contains(n)) {
            return Err(CorpusError::Invalid(format!(
                "entry {}: note {n:?} is not one of its glosses",
                self.id
            )));
        }
        if self.frame_count == 0 {
            return Err(CorpusError::Invalid(format!("entry {}: frame_count is 0", self.id)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CorpusError::Invalid(format!("entry {}: bad fps {}", self.id, self.fps)));
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }
}
