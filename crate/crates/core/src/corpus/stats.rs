use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{CorpusEntry, GlossVocabulary, Split};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitStats {
    pub signers: usize,
    pub duration_hours: f64,
    pub frames: usize,
    pub sentences: usize,
    pub vocabulary_size: usize,
    /// Distinct tokens missing from the training vocabulary; `None` for the
    /// training split itself.
    pub oov_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub splits: BTreeMap<Split, SplitStats>,
    pub resolution: String,
}

impl CorpusStats {
    pub fn split(&self, split: Split) -> &SplitStats {
        &self.splits[&split]
    }

    /// Tab-separated table, one row per quantity and one column per split.
    pub fn render(&self) -> String {
        let mut out = String::from("dataset split");
        for s in Split::ALL {
            write!(out, "\t{s}").unwrap();
        }
        out.push('\n');
        let mut row = |label: &str, f: &dyn Fn(&SplitStats) -> String| {
            out.push_str(label);
            for s in Split::ALL {
                write!(out, "\t{}", f(&self.splits[&s])).unwrap();
            }
            out.push('\n');
        };
        row("signers", &|s| s.signers.to_string());
        row("duration[h]", &|s| format!("{:.2}", s.duration_hours));
        row("frames", &|s| s.frames.to_string());
        row("sentences", &|s| s.sentences.to_string());
        row("vocabulary size", &|s| s.vocabulary_size.to_string());
        row("total OOVs", &|s| {
            s.oov_count.map_or_else(|| "-".to_string(), |n| n.to_string())
        });
        let res = self.resolution.clone();
        row("resolution", &|_| res.clone());
        out
    }
}

/// Per-split counts. `resolution` is left as `"varying"`; callers with
/// access to frame archives may overwrite it.
pub fn compute_stats(entries: &[CorpusEntry], train_vocab: &GlossVocabulary) -> CorpusStats {
    let mut splits = BTreeMap::new();
    for split in Split::ALL {
        let members: Vec<&CorpusEntry> = entries.iter().filter(|e| e.split == split).collect();
        let signers: BTreeSet<&str> = members.iter().map(|e| e.signer.as_str()).collect();
        let tokens: BTreeSet<&str> = members
            .iter()
            .flat_map(|e| e.glosses.iter().map(String::as_str))
            .collect();
        let oov_count = (split != Split::Train)
            .then(|| tokens.iter().filter(|t| !train_vocab.contains(t)).count());
        splits.insert(
            split,
            SplitStats {
                signers: signers.len(),
                duration_hours: members.iter().map(|e| e.duration_secs()).sum::<f64>() / 3600.0,
                frames: members.iter().map(|e| e.frame_count).sum(),
                sentences: members.len(),
                vocabulary_size: tokens.len(),
                oov_count,
            },
        );
    }
    CorpusStats {
        splits,
        resolution: "varying".to_string(),
    }
}
