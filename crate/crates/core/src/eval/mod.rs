//! Accuracy and graph-distance metrics, data splits and evaluation protocols.

mod protocol;
mod report;
mod split;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use protocol::{evaluate, run_protocol, Evaluation, ProtocolConfig, ProtocolInputs, ProtocolRun};
pub use report::EvalReport;
pub use split::{holdout_split, zero_shot_split, HoldoutSplit, SplitSize, ZeroShotSplit};

use crate::mapper::{MappingResult, TrainingPair};
use crate::taxonomy::{ConceptId, TaxonomyGraph};
use crate::{Error, Result};

pub const DEFAULT_K_VALUES: [usize; 5] = [1, 5, 10, 20, 50];

/// Which evaluation to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Random pair-level hold-out, full index.
    Intrinsic,
    /// Same split, index limited to the gold concepts of the test set.
    Restricted,
    /// Whole concepts removed from training, full index.
    ZeroShot,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Intrinsic => "intrinsic",
            Protocol::Restricted => "restricted",
            Protocol::ZeroShot => "zero_shot",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intrinsic" => Ok(Protocol::Intrinsic),
            "restricted" => Ok(Protocol::Restricted),
            "zero_shot" | "zero-shot" => Ok(Protocol::ZeroShot),
            other => Err(Error::Config(format!(
                "unknown protocol `{other}`; expected intrinsic, restricted or zero_shot"
            ))),
        }
    }
}

/// A test phrase with every concept it is labelled with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub phrase: String,
    pub gold: BTreeSet<ConceptId>,
}

/// Evaluation targets, one item per distinct phrase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    items: Vec<GoldItem>,
}

impl GoldSet {
    pub fn new(items: Vec<GoldItem>) -> Result<Self> {
        for it in &items {
            if it.phrase.trim().is_empty() {
                return Err(Error::Validation("gold phrase is empty".into()));
            }
            if it.gold.is_empty() {
                return Err(Error::Validation(format!("phrase `{}` has no gold concept", it.phrase)));
            }
        }
        Ok(GoldSet { items })
    }

    /// Group pairs by phrase, keeping first-appearance order.
    pub fn from_pairs(pairs: &[TrainingPair]) -> Result<Self> {
        let mut slot: HashMap<&str, usize> = HashMap::new();
        let mut items: Vec<GoldItem> = Vec::new();
        for p in pairs {
            let i = *slot.entry(p.phrase.as_str()).or_insert_with(|| {
                items.push(GoldItem {
                    phrase: p.phrase.clone(),
                    gold: BTreeSet::new(),
                });
                items.len() - 1
            });
            items[i].gold.insert(p.concept.clone());
        }
        Self::new(items)
    }

    pub fn items(&self) -> &[GoldItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.phrase.as_str())
    }

    /// Every concept labelled on any phrase.
    pub fn concepts(&self) -> BTreeSet<ConceptId> {
        self.items.iter().flat_map(|i| i.gold.iter().cloned()).collect()
    }

    pub fn validate_against(&self, graph: &TaxonomyGraph) -> Result<()> {
        for c in self.items.iter().flat_map(|i| &i.gold) {
            graph.require(c.as_str())?;
        }
        Ok(())
    }
}

fn check_aligned(results: &[MappingResult], gold: &GoldSet) -> Result<()> {
    if results.len() != gold.len() {
        return Err(Error::Validation(format!(
            "{} results for {} gold phrases",
            results.len(),
            gold.len()
        )));
    }
    Ok(())
}

/// Fraction of phrases with a gold concept among the first `k` results.
pub fn topk_accuracy(results: &[MappingResult], gold: &GoldSet, k: usize) -> Result<f64> {
    check_aligned(results, gold)?;
    if gold.is_empty() {
        return Err(Error::Validation("gold set is empty".into()));
    }
    let hits = results
        .iter()
        .zip(gold.items())
        .filter(|(r, g)| r.ranked.iter().take(k).any(|h| g.gold.contains(&h.concept)))
        .count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Mean graph distance at one `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceSummary {
    /// `None` when every prediction–gold pair was unreachable.
    pub mean: Option<f64>,
    pub unreachable_pairs: usize,
}

/// For each phrase, the hop count from each ranked prediction to its
/// nearest gold concept (`None` when no gold concept is reachable).
pub fn prediction_distances(
    results: &[MappingResult],
    gold: &GoldSet,
    graph: &TaxonomyGraph,
    parallel: bool,
) -> Result<Vec<Vec<Option<u32>>>> {
    check_aligned(results, gold)?;
    let one = |(r, g): (&MappingResult, &GoldItem)| -> Result<Vec<Option<u32>>> {
        let preds = r
            .concepts()
            .map(|c| graph.require(c.as_str()))
            .collect::<Result<Vec<_>>>()?;
        let mut best: Vec<Option<u32>> = vec![None; preds.len()];
        for gc in &g.gold {
            let dist = graph.distances_from(graph.require(gc.as_str())?);
            for (b, &p) in best.iter_mut().zip(&preds) {
                if let Some(d) = dist[p] {
                    *b = Some(b.map_or(d, |x| x.min(d)));
                }
            }
        }
        Ok(best)
    };
    if parallel {
        results.par_iter().zip(gold.items().par_iter()).map(one).collect()
    } else {
        results.iter().zip(gold.items()).map(one).collect()
    }
}

/// Average over phrases of the average hop count of their top-`k`
/// predictions, from precomputed [`prediction_distances`].
pub fn summarize_distances(distances: &[Vec<Option<u32>>], k: usize) -> DistanceSummary {
    let mut sum = 0.0;
    let mut phrases = 0usize;
    let mut unreachable = 0usize;
    for row in distances {
        let mut s = 0u64;
        let mut n = 0u64;
        for d in row.iter().take(k) {
            match d {
                Some(d) => {
                    s += u64::from(*d);
                    n += 1;
                }
                None => unreachable += 1,
            }
        }
        if n > 0 {
            sum += s as f64 / n as f64;
            phrases += 1;
        }
    }
    DistanceSummary {
        mean: (phrases > 0).then(|| sum / phrases as f64),
        unreachable_pairs: unreachable,
    }
}

/// Mean shortest-path length between top-`k` predictions and the nearest
/// gold concept; unreachable pairs are left out and counted.
pub fn mean_graph_distance(
    results: &[MappingResult],
    gold: &GoldSet,
    graph: &TaxonomyGraph,
    k: usize,
) -> Result<DistanceSummary> {
    let d = prediction_distances(results, gold, graph, false)?;
    Ok(summarize_distances(&d, k))
}
