use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::container::Container;
use crate::nn::Tensor2D;
use crate::util::{self, Fingerprint};
use crate::{Error, Result};

const CONTAINER_KIND: &str = "subword-embedder";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubwordConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub bucket_count: usize,
}

impl Default for SubwordConfig {
    fn default() -> Self {
        SubwordConfig {
            ngram_min: 3,
            ngram_max: 6,
            bucket_count: 200_000,
        }
    }
}

impl SubwordConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(Error::Validation(format!(
                "invalid n-gram range {}..={}",
                self.ngram_min, self.ngram_max
            )));
        }
        if self.bucket_count == 0 {
            return Err(Error::Validation("bucket_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn bucket(&self, ngram: &str) -> usize {
        (fnv1a(ngram.as_bytes()) % self.bucket_count as u64) as usize
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Character n-grams of `<token>`, ordered by length then position.
/// Single-character n-grams that consist of a boundary marker are skipped.
pub fn ngrams(token: &str, min: usize, max: usize) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in min..=max.min(chars.len()) {
        for start in 0..=chars.len() - n {
            if n == 1 && (start == 0 || start == chars.len() - 1) {
                continue;
            }
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}

/// Hashing n-gram embedder: a token's vector is the mean of its n-gram
/// bucket vectors and, when the token is in the word table, its whole-word
/// vector. Every string gets a finite vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordEmbedder {
    config: SubwordConfig,
    dim: usize,
    buckets: Vec<f64>,
    words: Option<EmbeddingTable>,
}

impl SubwordEmbedder {
    pub fn new(
        config: SubwordConfig,
        dim: usize,
        buckets: Vec<f64>,
        words: Option<EmbeddingTable>,
    ) -> Result<Self> {
        config.validate()?;
        if dim == 0 || buckets.len() != config.bucket_count * dim {
            return Err(Error::Shape(format!(
                "bucket matrix has {} values, expected {} x {dim}",
                buckets.len(),
                config.bucket_count
            )));
        }
        if !buckets.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("bucket vectors must be finite".into()));
        }
        if let Some(w) = &words {
            if w.dim() != dim {
                return Err(Error::Shape(format!(
                    "word table dim {} differs from bucket dim {dim}",
                    w.dim()
                )));
            }
        }
        Ok(SubwordEmbedder {
            config,
            dim,
            buckets,
            words,
        })
    }

    /// Untrained embedder with small uniform bucket vectors.
    pub fn random(config: SubwordConfig, dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = util::rng(seed, 0x5b);
        let half = 0.5 / dim.max(1) as f64;
        let buckets = (0..config.bucket_count * dim)
            .map(|_| rng.gen_range(-half..half))
            .collect();
        Self::new(config, dim, buckets, None)
    }

    pub fn config(&self) -> &SubwordConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> Option<&EmbeddingTable> {
        self.words.as_ref()
    }

    pub fn bucket_vector(&self, bucket: usize) -> &[f64] {
        &self.buckets[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn bucket_indices(&self, token: &str) -> Vec<usize> {
        ngrams(token, self.config.ngram_min, self.config.ngram_max)
            .iter()
            .map(|g| self.config.bucket(g))
            .collect()
    }

    pub fn lookup(&self, token: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut n = 0usize;
        for b in self.bucket_indices(token) {
            util::axpy(&mut out, 1.0, self.bucket_vector(b));
            n += 1;
        }
        if let Some(v) = self.words.as_ref().and_then(|w| w.get(token)) {
            util::axpy(&mut out, 1.0, v);
            n += 1;
        }
        if n > 0 {
            let inv = 1.0 / n as f64;
            out.iter_mut().for_each(|x| *x *= inv);
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::default();
        fp.u64(self.config.ngram_min as u64)
            .u64(self.config.ngram_max as u64)
            .u64(self.config.bucket_count as u64)
            .f64s(&self.buckets);
        if let Some(w) = &self.words {
            fp.str(&w.fingerprint());
        }
        fp.finish()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut tensors = vec![(
            "buckets".to_owned(),
            Tensor2D::new(self.config.bucket_count, self.dim, self.buckets.clone())?,
        )];
        let mut tokens = Vec::new();
        if let Some(words) = &self.words {
            tokens = words.tokens().to_vec();
            tensors.push((
                "words".to_owned(),
                Tensor2D::new(words.len(), self.dim, words.data().to_vec())?,
            ));
        }
        let meta = serde_json::json!({
            "config": self.config,
            "dim": self.dim,
            "word_tokens": if self.words.is_some() { Some(tokens) } else { None },
        });
        Container::new(CONTAINER_KIND, meta, tensors).write(w)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut c = Container::read(r)?;
        c.expect_kind(CONTAINER_KIND)?;
        let config: SubwordConfig = serde_json::from_value(c.meta["config"].clone())?;
        let dim: usize = serde_json::from_value(c.meta["dim"].clone())?;
        let tokens: Option<Vec<String>> = serde_json::from_value(c.meta["word_tokens"].clone())?;
        let buckets = c.take("buckets")?.into_data();
        let words = match tokens {
            Some(tokens) => Some(EmbeddingTable::new(
                tokens,
                dim,
                c.take("words")?.into_data(),
                None,
            )?),
            None => None,
        };
        Self::new(config, dim, buckets, words)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(util::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(util::open(path)?)
    }
}
