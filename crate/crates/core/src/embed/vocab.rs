use std::collections::HashMap;

use crate::{Error, Result};

/// Tokens that occur at least `min_count` times, most frequent first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
    dropped: u64,
}

impl Vocab {
    /// Count tokens over a corpus of token sequences. Entries are ordered by
    /// descending count, ties broken lexicographically.
    pub fn build<I, S, T>(corpus: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for seq in corpus {
            for tok in seq {
                let tok = tok.as_ref();
                match counts.get_mut(tok) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(tok.to_owned(), 1);
                    }
                }
            }
        }
        Self::from_counts(counts, min_count)
    }

    pub fn from_counts<I>(counts: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        if min_count == 0 {
            return Err(Error::Validation("min_count must be at least 1".into()));
        }
        let mut dropped = 0;
        let mut kept: Vec<(String, u64)> = Vec::new();
        for (tok, c) in counts {
            if c >= min_count {
                kept.push((tok, c));
            } else {
                dropped += c;
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyVocab { min_count });
        }
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = kept
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        let (entries, counts) = kept.into_iter().unzip();
        Ok(Vocab {
            entries,
            counts,
            index,
            min_count,
            dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn token(&self, index: usize) -> &str {
        &self.entries[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Total occurrences of tokens that fell below `min_count`.
    pub fn dropped_count(&self) -> u64 {
        self.dropped
    }
}
