use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PhraseEncoder, TrainingPair};
use crate::embed::EmbeddingTable;
use crate::nn::{AdamConfig, AdamState, MappingModel, ParamSet};
use crate::taxonomy::ConceptId;
use crate::util;
use crate::{Error, Result};

/// Pairs per gradient chunk. Chunks are reduced in a fixed order so the
/// serial and parallel paths produce identical sums.
const GRAD_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 7,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps.is_nan() || a.eps <= 0.0 {
            return Err(Error::Config("Adam betas must lie in [0, 1) and eps be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MappingModel,
    /// Mean squared error per pair, one entry per epoch.
    pub loss_history: Vec<f64>,
}

/// Fit `model` so that each pair's phrase lands on its concept's node
/// vector under squared Euclidean loss.
pub fn train_mapper(
    pairs: &[TrainingPair],
    nodes: &EmbeddingTable,
    encoder: &PhraseEncoder,
    model: MappingModel,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_mapper_excluding(pairs, nodes, encoder, model, config, &BTreeSet::new())
}

/// Like [`train_mapper`], but fails if any pair targets an excluded concept.
pub fn train_mapper_excluding(
    pairs: &[TrainingPair],
    nodes: &EmbeddingTable,
    encoder: &PhraseEncoder,
    mut model: MappingModel,
    config: &TrainConfig,
    excluded: &BTreeSet<ConceptId>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let targets = validate_inputs(pairs, nodes, encoder, &model, excluded)?;

    let mut adam = AdamState::new(config.adam, model.params());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut util::rng(config.seed, epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 2.0 / batch.len() as f64;
            let job = |chunk: &[usize]| chunk_gradients(&model, pairs, &targets, nodes, encoder, chunk, scale);
            let parts: Vec<Result<(f64, ParamSet)>> = if config.parallel {
                batch.par_chunks(GRAD_CHUNK).map(job).collect()
            } else {
                batch.chunks(GRAD_CHUNK).map(job).collect()
            };
            let mut grads = model.params().zeros_like();
            for part in parts {
                let (loss, g) = part?;
                total += loss;
                grads.add_assign(&g);
            }
            adam.step(model.params_mut(), &grads)?;
        }
        let mean = total / pairs.len() as f64;
        log::info!("mapper epoch {}/{}: loss {mean:.6}", epoch + 1, config.epochs);
        history.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn validate_inputs(
    pairs: &[TrainingPair],
    nodes: &EmbeddingTable,
    encoder: &PhraseEncoder,
    model: &MappingModel,
    excluded: &BTreeSet<ConceptId>,
) -> Result<Vec<usize>> {
    if pairs.is_empty() {
        return Err(Error::Validation("no training pairs".into()));
    }
    let arch = model.architecture();
    if nodes.dim() != arch.output_dim {
        return Err(Error::Shape(format!(
            "node vectors have dim {}, model outputs {}",
            nodes.dim(),
            arch.output_dim
        )));
    }
    if encoder.dim() != arch.input_dim || encoder.max_len() != arch.seq_len {
        return Err(Error::Shape(format!(
            "encoder produces {}x{}, model expects {}x{}",
            encoder.max_len(),
            encoder.dim(),
            arch.seq_len,
            arch.input_dim
        )));
    }
    let mut targets = Vec::with_capacity(pairs.len());
    for p in pairs {
        if excluded.contains(&p.concept) {
            return Err(Error::Invariant(format!(
                "held-out concept `{}` appears in the training pairs",
                p.concept
            )));
        }
        let row = nodes.index_of(p.concept.as_str()).ok_or_else(|| Error::Lookup {
            kind: "concept",
            id: p.concept.to_string(),
        })?;
        encoder.encode(&p.phrase)?;
        targets.push(row);
    }
    Ok(targets)
}

fn chunk_gradients(
    model: &MappingModel,
    pairs: &[TrainingPair],
    targets: &[usize],
    nodes: &EmbeddingTable,
    encoder: &PhraseEncoder,
    chunk: &[usize],
    scale: f64,
) -> Result<(f64, ParamSet)> {
    let mut grads = model.params().zeros_like();
    let mut loss = 0.0;
    for &i in chunk {
        let x = encoder.encode(&pairs[i].phrase)?;
        let pass = model.forward_cached(&x)?;
        let y = nodes.row(targets[i]);
        let diff: Vec<f64> = pass.output().iter().zip(y).map(|(a, b)| a - b).collect();
        loss += diff.iter().map(|d| d * d).sum::<f64>();
        let upstream: Vec<f64> = diff.iter().map(|d| d * scale).collect();
        model.backward(&pass, &upstream, &mut grads, None)?;
    }
    Ok((loss, grads))
}

/// Mean squared error of `model` over `pairs` without updating it.
pub fn mean_loss(
    pairs: &[TrainingPair],
    nodes: &EmbeddingTable,
    encoder: &PhraseEncoder,
    model: &MappingModel,
) -> Result<f64> {
    let targets = validate_inputs(pairs, nodes, encoder, model, &BTreeSet::new())?;
    let mut total = 0.0;
    for (p, &t) in pairs.iter().zip(&targets) {
        let out = model.forward(&encoder.encode(&p.phrase)?)?;
        total += out
            .iter()
            .zip(nodes.row(t))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / pairs.len() as f64)
}
