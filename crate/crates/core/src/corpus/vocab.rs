use std::collections::{BTreeSet, HashMap};

use super::{CorpusEntry, CorpusError};
use crate::objective::BLANK;

/// Gloss ↔ id mapping. Id 0 is the CTC blank; glosses take ids `1..=l` in
/// byte-wise lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl GlossVocabulary {
    pub const BLANK_ID: usize = BLANK;

    /// Sorts and deduplicates `tokens`.
    pub fn from_tokens<I, T>(tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let sorted: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let tokens: Vec<String> = sorted.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 1))
            .collect();
        Self { tokens, index }
    }

    /// Number of real glosses `l` (the blank is not counted).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `l + 1`, the classifier width.
    pub fn num_classes(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        id.checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn encode(&self, glosses: &[String]) -> Result<Vec<usize>, CorpusError> {
        glosses
            .iter()
            .map(|g| self.id(g).ok_or_else(|| CorpusError::OutOfVocabulary(g.clone())))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or("<unk>").to_string())
            .collect()
    }

    /// One token per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_tokens(text.lines().filter(|l| !l.is_empty()))
    }
}

/// Distinct glosses of `entries`, sorted.
pub fn build_vocabulary<'a>(entries: impl IntoIterator<Item = &'a CorpusEntry>) -> GlossVocabulary {
    GlossVocabulary::from_tokens(entries.into_iter().flat_map(|e| e.glosses.iter().cloned()))
}
