//! Skip-gram with negative sampling.
//!
//! The same trainer embeds random-walk corpora (one token per concept) and
//! word corpora. For each centre position every other position within the
//! window is a positive context; `negatives` noise tokens are drawn from the
//! unigram distribution raised to the 3/4 power.
//!
//! Training is serial and fully determined by the seed.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, SubwordConfig, SubwordEmbedder, Vocab};
use crate::util::{self, axpy, dot, sigmoid, softplus, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Context radius. `None` treats every other position in the sequence
    /// as context, which for walks makes the whole walk the neighbourhood.
    pub window: Option<usize>,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    /// Map tokens below `min_count` to a shared sentinel that is trained
    /// like any other token and becomes the table's OOV vector.
    pub oov_sentinel: bool,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig::nodes()
    }
}

impl SkipGramConfig {
    /// Defaults for random-walk corpora.
    pub fn nodes() -> Self {
        SkipGramConfig {
            dim: 128,
            window: None,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            seed: 1,
            oov_sentinel: false,
        }
    }

    /// Defaults for word corpora.
    pub fn words() -> Self {
        SkipGramConfig {
            dim: 200,
            window: Some(5),
            oov_sentinel: true,
            ..SkipGramConfig::nodes()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("skip-gram dim must be positive".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Validation("negatives must be at least 1".into()));
        }
        if self.window == Some(0) {
            return Err(Error::Validation("window must be at least 1".into()));
        }
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.lr_start) || !ok(self.lr_end) || self.lr_end > self.lr_start {
            return Err(Error::Validation(format!(
                "learning rate schedule {} -> {} is invalid",
                self.lr_start, self.lr_end
            )));
        }
        Ok(())
    }
}

/// Draws noise tokens with probability proportional to `count^power`.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NoiseSampler {
    pub fn new(counts: &[u64], power: f64) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Validation(format!("noise distribution: {e}")))?;
        let probs = weights.iter().map(|w| w / total).collect();
        Ok(NoiseSampler { dist, probs })
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.dist.sample(rng)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }
}

/// Log-likelihood of one (centre, context) pair against fixed negatives:
/// `ln σ(u_ctx·v) + Σ ln σ(−u_neg·v)`.
pub fn pair_objective(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut obj = -softplus(-dot(context, center));
    for n in negatives {
        obj -= softplus(dot(n, center));
    }
    obj
}

/// Gradients of [`pair_objective`] with respect to every vector involved.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradients {
    let s_pos = sigmoid(-dot(context, center));
    let mut g_center: Vec<f64> = context.iter().map(|u| s_pos * u).collect();
    let g_context = center.iter().map(|v| s_pos * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = sigmoid(dot(n, center));
        axpy(&mut g_center, -s, n);
        g_negs.push(center.iter().map(|v| -s * v).collect());
    }
    PairGradients {
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// One gradient-ascent step on the output vectors of `targets` (label
/// `true` for the positive context). Accumulates the centre gradient into
/// `grad_center` and returns the pair loss (negated objective).
fn sgns_update(
    center: &[f64],
    output: &mut [f64],
    targets: &[(usize, bool)],
    lr: f64,
    grad_center: &mut [f64],
) -> f64 {
    let dim = center.len();
    let mut loss = 0.0;
    for &(t, positive) in targets {
        let u = &mut output[t * dim..(t + 1) * dim];
        let x = dot(u, center);
        let (g, l) = if positive {
            (sigmoid(-x), softplus(-x))
        } else {
            (-sigmoid(x), softplus(x))
        };
        loss += l;
        axpy(grad_center, g, u);
        axpy(u, lr * g, center);
    }
    loss
}

struct SubwordInputs {
    config: SubwordConfig,
    words: Vec<f64>,
    buckets: Vec<f64>,
    // n-gram buckets of each vocabulary entry
    grams: Vec<Vec<usize>>,
}

enum Inputs {
    Words(Vec<f64>),
    Subword(SubwordInputs),
}

impl Inputs {
    fn compose(&self, token: usize, dim: usize, out: &mut [f64]) {
        match self {
            Inputs::Words(m) => out.copy_from_slice(&m[token * dim..(token + 1) * dim]),
            Inputs::Subword(s) => {
                out.copy_from_slice(&s.words[token * dim..(token + 1) * dim]);
                for &b in &s.grams[token] {
                    axpy(out, 1.0, &s.buckets[b * dim..(b + 1) * dim]);
                }
                let inv = 1.0 / (1 + s.grams[token].len()) as f64;
                out.iter_mut().for_each(|x| *x *= inv);
            }
        }
    }

    fn update(&mut self, token: usize, dim: usize, grad: &[f64], lr: f64) {
        match self {
            Inputs::Words(m) => axpy(&mut m[token * dim..(token + 1) * dim], lr, grad),
            Inputs::Subword(s) => {
                let scale = lr / (1 + s.grams[token].len()) as f64;
                axpy(&mut s.words[token * dim..(token + 1) * dim], scale, grad);
                for &b in &s.grams[token] {
                    axpy(&mut s.buckets[b * dim..(b + 1) * dim], scale, grad);
                }
            }
        }
    }
}

/// Stateful skip-gram trainer.
pub struct SkipGramTrainer {
    vocab: Vocab,
    config: SkipGramConfig,
    inputs: Inputs,
    output: Vec<f64>,
    noise: NoiseSampler,
    oov: Option<usize>,
    rng: Rng,
}

fn uniform_init(rng: &mut Rng, n: usize, dim: usize) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.gen_range(-half..half)).collect()
}

impl SkipGramTrainer {
    /// Trainer with one input vector per token. Input vectors start uniform
    /// in `[-0.5/dim, 0.5/dim)`, output vectors at zero.
    pub fn new(vocab: Vocab, config: SkipGramConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = util::rng(config.seed, 0);
        let mut counts = vocab.counts().to_vec();
        let oov = if config.oov_sentinel {
            counts.push(vocab.dropped_count());
            Some(vocab.len())
        } else {
            None
        };
        let rows = counts.len();
        let inputs = Inputs::Words(uniform_init(&mut rng, rows, config.dim));
        Ok(SkipGramTrainer {
            noise: NoiseSampler::new(&counts, 0.75)?,
            output: vec![0.0; rows * config.dim],
            vocab,
            config,
            inputs,
            oov,
            rng,
        })
    }

    /// Trainer whose input representation is the mean of a whole-word
    /// vector and hashed character n-gram vectors.
    pub fn new_subword(vocab: Vocab, config: SkipGramConfig, subword: SubwordConfig) -> Result<Self> {
        config.validate()?;
        subword.validate()?;
        let config = SkipGramConfig {
            oov_sentinel: false,
            ..config
        };
        let mut rng = util::rng(config.seed, 0);
        let dim = config.dim;
        let words = uniform_init(&mut rng, vocab.len(), dim);
        let buckets = uniform_init(&mut rng, subword.bucket_count, dim);
        let grams = vocab
            .entries()
            .iter()
            .map(|t| {
                super::ngrams(t, subword.ngram_min, subword.ngram_max)
                    .iter()
                    .map(|g| subword.bucket(g))
                    .collect()
            })
            .collect();
        Ok(SkipGramTrainer {
            noise: NoiseSampler::new(vocab.counts(), 0.75)?,
            output: vec![0.0; vocab.len() * dim],
            inputs: Inputs::Subword(SubwordInputs {
                config: subword,
                words,
                buckets,
                grams,
            }),
            vocab,
            config,
            oov: None,
            rng,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn encode<S, T>(&self, corpus: &[S]) -> Vec<Vec<usize>>
    where
        S: AsRef<[T]>,
        T: AsRef<str>,
    {
        corpus
            .iter()
            .map(|seq| {
                seq.as_ref()
                    .iter()
                    .filter_map(|t| self.vocab.index_of(t.as_ref()).or(self.oov))
                    .collect()
            })
            .collect()
    }

    /// Run `config.epochs` passes over `corpus`; returns the mean per-pair
    /// loss of each epoch.
    pub fn fit<S, T>(&mut self, corpus: &[S]) -> Result<Vec<f64>>
    where
        S: AsRef<[T]>,
        T: AsRef<str>,
    {
        let seqs = self.encode(corpus);
        let tokens: usize = seqs.iter().map(Vec::len).sum();
        let total = (tokens * self.config.epochs).max(1) as f64;
        let dim = self.config.dim;
        let (lr0, lr1) = (self.config.lr_start, self.config.lr_end);

        let mut h = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        let mut targets = Vec::with_capacity(self.config.negatives + 1);
        let mut processed = 0usize;
        let mut history = Vec::with_capacity(self.config.epochs);

        for _ in 0..self.config.epochs {
            let (mut loss, mut pairs) = (0.0, 0usize);
            for seq in &seqs {
                for (i, &center) in seq.iter().enumerate() {
                    let lr = (lr0 - (lr0 - lr1) * processed as f64 / total).max(lr1);
                    processed += 1;
                    let (lo, hi) = match self.config.window {
                        Some(w) => (i.saturating_sub(w), (i + w).min(seq.len() - 1)),
                        None => (0, seq.len() - 1),
                    };
                    for (j, &ctx) in seq.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        targets.clear();
                        targets.push((ctx, true));
                        for _ in 0..self.config.negatives {
                            let n = self.noise.sample(&mut self.rng);
                            if n != ctx {
                                targets.push((n, false));
                            }
                        }
                        self.inputs.compose(center, dim, &mut h);
                        grad.iter_mut().for_each(|g| *g = 0.0);
                        loss += sgns_update(&h, &mut self.output, &targets, lr, &mut grad);
                        self.inputs.update(center, dim, &grad, lr);
                        pairs += 1;
                    }
                }
            }
            history.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
            log::debug!("skip-gram epoch {}: loss {:.5}", history.len(), history.last().unwrap());
        }
        Ok(history)
    }

    /// Current input vectors as a table. Subword trainers return their
    /// composed vectors.
    pub fn table(&self) -> Result<EmbeddingTable> {
        let dim = self.config.dim;
        let n = self.vocab.len();
        let mut data = vec![0.0; n * dim];
        for (i, row) in data.chunks_exact_mut(dim).enumerate() {
            self.inputs.compose(i, dim, row);
        }
        let oov = self.oov.map(|o| {
            let mut v = vec![0.0; dim];
            self.inputs.compose(o, dim, &mut v);
            v
        });
        EmbeddingTable::new(self.vocab.entries().to_vec(), dim, data, oov)
    }

    /// Consume a subword trainer into an embedder.
    pub fn into_subword(self) -> Result<SubwordEmbedder> {
        match self.inputs {
            Inputs::Subword(s) => {
                let words =
                    EmbeddingTable::new(self.vocab.entries().to_vec(), self.config.dim, s.words, None)?;
                SubwordEmbedder::new(s.config, self.config.dim, s.buckets, Some(words))
            }
            Inputs::Words(_) => Err(Error::State("trainer was not built for subword inputs".into())),
        }
    }
}

pub fn train_skipgram<S, T>(corpus: &[S], vocab: Vocab, config: &SkipGramConfig) -> Result<EmbeddingTable>
where
    S: AsRef<[T]>,
    T: AsRef<str>,
{
    let mut trainer = SkipGramTrainer::new(vocab, config.clone())?;
    trainer.fit(corpus)?;
    trainer.table()
}

pub fn train_subword_skipgram<S, T>(
    corpus: &[S],
    vocab: Vocab,
    config: &SkipGramConfig,
    subword: SubwordConfig,
) -> Result<SubwordEmbedder>
where
    S: AsRef<[T]>,
    T: AsRef<str>,
{
    let mut trainer = SkipGramTrainer::new_subword(vocab, config.clone(), subword)?;
    trainer.fit(corpus)?;
    trainer.into_subword()
}
