use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::GoldSet;
use crate::mapper::TrainingPair;
use crate::taxonomy::ConceptId;
use crate::util;
use crate::{Error, Result};

/// How much to hold out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSize {
    Count(usize),
    /// Rounded to the nearest whole item.
    Fraction(f64),
}

impl SplitSize {
    /// Resolve against `total` items; must leave both sides non-empty.
    pub fn resolve(self, total: usize) -> Result<usize> {
        let n = match self {
            SplitSize::Count(n) => n,
            SplitSize::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Validation(format!("split fraction {f} must lie in (0, 1)")));
                }
                ((f * total as f64).round() as usize).max(1)
            }
        };
        if n == 0 || n >= total {
            return Err(Error::Validation(format!(
                "cannot hold out {n} of {total} items"
            )));
        }
        Ok(n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutSplit {
    pub train: Vec<TrainingPair>,
    pub test_pairs: Vec<TrainingPair>,
    pub test: GoldSet,
}

/// Uniform pair-level split. Both sides keep the input order.
pub fn holdout_split(pairs: &[TrainingPair], size: SplitSize, seed: u64) -> Result<HoldoutSplit> {
    let n = size.resolve(pairs.len())?;
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.shuffle(&mut util::rng(seed, 0x686f6c64));
    let mut is_test = vec![false; pairs.len()];
    for &i in &idx[..n] {
        is_test[i] = true;
    }
    let (test_pairs, train): (Vec<_>, Vec<_>) = pairs
        .iter()
        .cloned()
        .zip(&is_test)
        .partition(|(_, &t)| t);
    let test_pairs: Vec<TrainingPair> = test_pairs.into_iter().map(|(p, _)| p).collect();
    Ok(HoldoutSplit {
        train: train.into_iter().map(|(p, _)| p).collect(),
        test: GoldSet::from_pairs(&test_pairs)?,
        test_pairs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotSplit {
    pub held_out: BTreeSet<ConceptId>,
    pub removed: Vec<TrainingPair>,
    pub remaining: Vec<TrainingPair>,
}

/// Hold out whole concepts: every pair of a sampled concept moves to the
/// removed side.
pub fn zero_shot_split(pairs: &[TrainingPair], size: SplitSize, seed: u64) -> Result<ZeroShotSplit> {
    let concepts: Vec<ConceptId> = pairs
        .iter()
        .map(|p| p.concept.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = size.resolve(concepts.len())?;
    let held_out: BTreeSet<ConceptId> = concepts
        .choose_multiple(&mut util::rng(seed, 0x7a65726f), n)
        .cloned()
        .collect();
    let (removed, remaining) = pairs
        .iter()
        .cloned()
        .partition(|p| held_out.contains(&p.concept));
    Ok(ZeroShotSplit {
        held_out,
        removed,
        remaining,
    })
}
