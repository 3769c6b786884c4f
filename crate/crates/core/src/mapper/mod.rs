//! Phrase encoding, mapper training and nearest-concept retrieval.

mod index;
mod train;

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use index::NeighborIndex;
pub use train::{mean_loss, train_mapper, train_mapper_excluding, TrainConfig, TrainOutcome};

use crate::embed::{
    train_subword_skipgram, EmbeddingTable, SkipGramConfig, SkipGramTrainer, SubwordConfig,
    SubwordEmbedder, Vocab,
};
use crate::nn::{MappingModel, Tensor2D};
use crate::taxonomy::ConceptId;
use crate::util::{self, Fingerprint};
use crate::{Error, Result};

/// Closeness measure in node space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    L2,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(Metric::Cosine),
            "l2" | "euclidean" => Ok(Metric::L2),
            other => Err(Error::Config(format!(
                "unknown metric `{other}`; expected cosine or l2"
            ))),
        }
    }
}

/// Lowercase, split on whitespace, and emit every other non-alphanumeric
/// character as a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        } else if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Where token vectors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum WordSource {
    /// Whole-token table; unknown tokens use its OOV vector.
    Table(EmbeddingTable),
    /// Character n-gram embedder; every token has a vector.
    Subword(SubwordEmbedder),
}

impl WordSource {
    pub fn dim(&self) -> usize {
        match self {
            WordSource::Table(t) => t.dim(),
            WordSource::Subword(s) => s.dim(),
        }
    }

    fn fill(&self, token: &str, out: &mut [f64]) -> Result<()> {
        match self {
            WordSource::Table(t) => out.copy_from_slice(t.lookup_token(token)?),
            WordSource::Subword(s) => out.copy_from_slice(&s.lookup(token)),
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordEmbeddingConfig {
    /// Fields left out take their values from [`SkipGramConfig::words`].
    #[serde(deserialize_with = "word_skipgram")]
    pub skipgram: SkipGramConfig,
    pub min_count: u64,
    /// Train a subword embedder instead of a whole-token table.
    pub subword: Option<SubwordConfig>,
}

impl Default for WordEmbeddingConfig {
    fn default() -> Self {
        WordEmbeddingConfig {
            skipgram: SkipGramConfig::words(),
            min_count: 2,
            subword: None,
        }
    }
}

fn word_skipgram<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<SkipGramConfig, D::Error> {
    use serde::de::Error as _;
    let patch = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut base = serde_json::to_value(SkipGramConfig::words()).map_err(D::Error::custom)?;
    if let Some(obj) = base.as_object_mut() {
        obj.extend(patch);
    }
    serde_json::from_value(base).map_err(D::Error::custom)
}

/// Train word vectors on raw sentences, tokenized like phrases.
pub fn train_word_source<S: AsRef<str>>(sentences: &[S], config: &WordEmbeddingConfig) -> Result<WordSource> {
    let corpus: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s.as_ref())).collect();
    let vocab = Vocab::build(&corpus, config.min_count)?;
    match config.subword {
        Some(sub) => Ok(WordSource::Subword(train_subword_skipgram(
            &corpus,
            vocab,
            &config.skipgram,
            sub,
        )?)),
        None => {
            let mut trainer = SkipGramTrainer::new(vocab, config.skipgram.clone())?;
            trainer.fit(&corpus)?;
            Ok(WordSource::Table(trainer.table()?))
        }
    }
}

/// Turns a phrase into a fixed `max_len × dim` matrix: one row per token,
/// zero rows after the last token, extra tokens dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct PhraseEncoder {
    source: WordSource,
    max_len: usize,
}

impl PhraseEncoder {
    pub const DEFAULT_MAX_LEN: usize = 20;

    pub fn new(source: WordSource, max_len: usize) -> Result<Self> {
        if max_len == 0 {
            return Err(Error::Config("max_len must be positive".into()));
        }
        Ok(PhraseEncoder { source, max_len })
    }

    pub fn source(&self) -> &WordSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn encode(&self, phrase: &str) -> Result<Tensor2D> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return Err(Error::EmptyPhrase(phrase.to_owned()));
        }
        let mut m = Tensor2D::zeros(self.max_len, self.dim());
        for (i, tok) in tokens.iter().take(self.max_len).enumerate() {
            self.source.fill(tok, m.row_mut(i))?;
        }
        Ok(m)
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::default();
        fp.u64(self.max_len as u64);
        match &self.source {
            WordSource::Table(t) => fp.str("table").str(&t.fingerprint()),
            WordSource::Subword(s) => fp.str("subword").str(&s.fingerprint()),
        };
        fp.finish()
    }
}

/// One synonym of one concept.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingPair {
    pub phrase: String,
    pub concept: ConceptId,
}

impl TrainingPair {
    pub fn new(concept: &str, phrase: &str) -> Result<Self> {
        Ok(TrainingPair {
            phrase: phrase.to_owned(),
            concept: ConceptId::new(concept)?,
        })
    }
}

/// Read a `concept_id \t phrase` lexicon.
pub fn read_pairs<R: BufRead>(reader: R, origin: &str) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (concept, phrase) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, lineno, "expected `concept_id<TAB>phrase`"))?;
        let concept = concept.trim();
        if concept.is_empty() || phrase.contains('\t') {
            return Err(Error::parse(origin, lineno, "expected `concept_id<TAB>phrase`"));
        }
        pairs.push(TrainingPair {
            phrase: phrase.to_owned(),
            concept: ConceptId::new(concept)?,
        });
    }
    Ok(pairs)
}

pub fn load_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    read_pairs(util::open(path)?, &path.display().to_string())
}

pub fn write_pairs<W: Write>(mut w: W, pairs: &[TrainingPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}", p.concept, p.phrase)?;
    }
    Ok(())
}

pub fn pairs_fingerprint(pairs: &[TrainingPair]) -> String {
    let mut fp = Fingerprint::default();
    for p in pairs {
        fp.str(p.concept.as_str()).str(&p.phrase);
    }
    fp.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub concept: ConceptId,
    pub score: f64,
}

/// Ranked concepts, best first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    pub ranked: Vec<Hit>,
}

impl MappingResult {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.ranked.iter().map(|h| &h.concept)
    }
}

/// Encode, map to node space and retrieve the `k` closest concepts.
pub fn map_phrase(
    encoder: &PhraseEncoder,
    model: &MappingModel,
    index: &NeighborIndex,
    phrase: &str,
    k: usize,
) -> Result<MappingResult> {
    let x = encoder.encode(phrase)?;
    let point = model.forward(&x)?;
    index.query(&point, k)
}

/// [`map_phrase`] over many phrases; results keep input order.
pub fn map_phrases<S: AsRef<str> + Sync>(
    encoder: &PhraseEncoder,
    model: &MappingModel,
    index: &NeighborIndex,
    phrases: &[S],
    k: usize,
    parallel: bool,
) -> Vec<Result<MappingResult>> {
    let one = |p: &S| map_phrase(encoder, model, index, p.as_ref(), k);
    if parallel {
        phrases.par_iter().map(one).collect()
    } else {
        phrases.iter().map(one).collect()
    }
}

/// CSV with header `phrase,rank,concept_id,score`; ranks start at 1.
pub fn write_mapping_csv<'a, W, I>(w: W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a MappingResult)>,
{
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["phrase", "rank", "concept_id", "score"])?;
    for (phrase, result) in rows {
        for (rank, hit) in result.ranked.iter().enumerate() {
            out.write_record([
                phrase,
                &(rank + 1).to_string(),
                hit.concept.as_str(),
                &hit.score.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}
