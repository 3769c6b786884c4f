//! Toy taxonomies whose synonym lexicons track graph structure.
//!
//! Nodes form a complete tree in breadth-first order with a few random
//! cross-links. Every node owns a handful of invented words; each synonym
//! mixes most of the node's own words with words of its ancestors, so
//! lexical overlap correlates with graph proximity.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::mapper::TrainingPair;
use crate::taxonomy::ConceptId;
use crate::util::{self, Rng};
use crate::{Error, Result};

const LOCAL_WORDS: usize = 3;
const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "pl"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const FILLERS: &[&str] = &["of", "with", "the", "and", "due", "to", ","];

pub const IS_A: &str = "is_a";
pub const CROSS_LINK: &str = "associated_with";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub nodes: usize,
    pub branching: usize,
    pub synonyms: usize,
    pub cross_links: usize,
    /// Corpus sentences generated per node beyond its synonyms.
    pub sentences_per_node: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            nodes: 255,
            branching: 2,
            synonyms: 3,
            cross_links: 8,
            sentences_per_node: 4,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Validation("a taxonomy needs at least 2 nodes".into()));
        }
        if self.branching == 0 || self.synonyms == 0 {
            return Err(Error::Validation("branching and synonyms must be positive".into()));
        }
        let possible = self.nodes * (self.nodes - 1) / 2 - (self.nodes - 1);
        if self.cross_links > possible {
            return Err(Error::Validation(format!(
                "{} cross-links requested but only {possible} node pairs are unlinked",
                self.cross_links
            )));
        }
        Ok(())
    }
}

/// Generated taxonomy, lexicon and text corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthData {
    pub ids: Vec<ConceptId>,
    pub edges: Vec<(ConceptId, &'static str, ConceptId)>,
    pub pairs: Vec<TrainingPair>,
    /// Whitespace-tokenizable sentences for word-embedding training.
    pub corpus: Vec<String>,
}

impl SynthData {
    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (s, r, t) in &self.edges {
            writeln!(w, "{s}\t{r}\t{t}")?;
        }
        Ok(())
    }

    pub fn write_pairs<W: Write>(&self, w: W) -> std::io::Result<()> {
        crate::mapper::write_pairs(w, &self.pairs)
    }

    pub fn write_corpus<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for line in &self.corpus {
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn parent(node: usize, branching: usize) -> Option<usize> {
    (node > 0).then(|| (node - 1) / branching)
}

fn pseudo_word(rng: &mut Rng, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| {
                let on = ONSETS.choose(rng).unwrap();
                let v = VOWELS.choose(rng).unwrap();
                format!("{on}{v}")
            })
            .collect();
        if !FILLERS.contains(&w.as_str()) && used.insert(w.clone()) {
            return w;
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = util::rng(cfg.seed, 0x73796e);
    let width = cfg.nodes.to_string().len().max(4);
    let ids: Vec<ConceptId> = (0..cfg.nodes)
        .map(|i| ConceptId::new(format!("C{i:0width$}")))
        .collect::<Result<_>>()?;

    let mut edges = Vec::new();
    let mut linked = HashSet::new();
    for n in 1..cfg.nodes {
        let p = parent(n, cfg.branching).unwrap();
        edges.push((ids[n].clone(), IS_A, ids[p].clone()));
        linked.insert((p.min(n), p.max(n)));
    }
    let mut extra = 0;
    while extra < cfg.cross_links {
        let a = rng.gen_range(0..cfg.nodes);
        let b = rng.gen_range(0..cfg.nodes);
        if a != b && linked.insert((a.min(b), a.max(b))) {
            edges.push((ids[a].clone(), CROSS_LINK, ids[b].clone()));
            extra += 1;
        }
    }

    let mut used = HashSet::new();
    let words: Vec<Vec<String>> = (0..cfg.nodes)
        .map(|_| (0..LOCAL_WORDS).map(|_| pseudo_word(&mut rng, &mut used)).collect())
        .collect();

    let mut pairs = Vec::with_capacity(cfg.nodes * cfg.synonyms);
    let mut phrases: Vec<Vec<String>> = Vec::with_capacity(cfg.nodes);
    for n in 0..cfg.nodes {
        let mut mine = Vec::with_capacity(cfg.synonyms);
        for j in 0..cfg.synonyms {
            let mut toks: Vec<&str> = words[n]
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j % LOCAL_WORDS)
                .map(|(_, w)| w.as_str())
                .collect();
            if let Some(p) = parent(n, cfg.branching) {
                toks.push(words[p].choose(&mut rng).unwrap());
                if let Some(gp) = parent(p, cfg.branching) {
                    if rng.gen_bool(0.5) {
                        toks.push(words[gp].choose(&mut rng).unwrap());
                    }
                }
            }
            toks.shuffle(&mut rng);
            if rng.gen_bool(0.3) {
                let at = rng.gen_range(1..=toks.len());
                toks.insert(at, FILLERS.choose(&mut rng).unwrap());
            }
            let phrase = toks.join(" ");
            pairs.push(TrainingPair {
                phrase: phrase.clone(),
                concept: ids[n].clone(),
            });
            mine.push(phrase);
        }
        phrases.push(mine);
    }

    let mut corpus: Vec<String> = pairs.iter().map(|p| p.phrase.clone()).collect();
    for n in 0..cfg.nodes {
        for _ in 0..cfg.sentences_per_node {
            let me = phrases[n].choose(&mut rng).unwrap();
            let line = match parent(n, cfg.branching) {
                Some(p) => format!("{me} is a kind of {}", phrases[p].choose(&mut rng).unwrap()),
                None => format!("{me} is the most general concept"),
            };
            corpus.push(line);
        }
    }

    Ok(SynthData {
        ids,
        edges,
        pairs,
        corpus,
    })
}
