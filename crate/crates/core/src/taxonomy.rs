//! Taxonomy graph ingestion, shortest-path distances and random walks.
//!
//! Edges are stored with their relation labels, but walks and distances use
//! the undirected view of the graph: two concepts are adjacent when any edge
//! connects them in either direction.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{self, Rng};
use crate::{Error, Result};

/// Opaque, non-empty concept identifier such as `"22298006"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("concept id must be non-empty".into()));
        }
        Ok(ConceptId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ConceptId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConceptId::new(s)
    }
}

impl TryFrom<String> for ConceptId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        ConceptId::new(s)
    }
}

impl From<ConceptId> for String {
    fn from(id: ConceptId) -> String {
        id.0
    }
}

impl AsRef<str> for ConceptId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for ConceptId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A labelled edge between two node indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: usize,
    pub relation: String,
    pub target: usize,
}

/// Options applied while reading an edge file.
#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    /// Keep only edges whose relation label is in this set.
    pub relations: Option<BTreeSet<String>>,
}

/// Bookkeeping from ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub self_loops: usize,
    pub duplicates: usize,
    pub filtered: usize,
}

/// Shortest-path length in the undirected view of a taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distance {
    Hops(u32),
    Unreachable,
}

impl Distance {
    pub fn hops(self) -> Option<u32> {
        match self {
            Distance::Hops(h) => Some(h),
            Distance::Unreachable => None,
        }
    }
}

/// Immutable concept graph.
#[derive(Clone, Debug)]
pub struct TaxonomyGraph {
    ids: Vec<ConceptId>,
    index: HashMap<ConceptId, usize>,
    edges: Vec<Edge>,
    // Sorted, deduplicated neighbours in the undirected view.
    adjacency: Vec<Vec<usize>>,
}

#[derive(Default)]
struct GraphBuilder {
    ids: Vec<ConceptId>,
    index: HashMap<ConceptId, usize>,
    edges: Vec<Edge>,
    seen: HashSet<(usize, String, usize)>,
    stats: IngestStats,
}

impl GraphBuilder {
    fn node(&mut self, id: ConceptId) -> usize {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        i
    }

    fn edge(&mut self, source: ConceptId, relation: &str, target: ConceptId) {
        let s = self.node(source);
        let t = self.node(target);
        if s == t {
            self.stats.self_loops += 1;
            return;
        }
        if !self.seen.insert((s, relation.to_owned(), t)) {
            self.stats.duplicates += 1;
            return;
        }
        self.edges.push(Edge {
            source: s,
            relation: relation.to_owned(),
            target: t,
        });
    }

    fn finish(self) -> (TaxonomyGraph, IngestStats) {
        let mut adjacency = vec![Vec::new(); self.ids.len()];
        for e in &self.edges {
            adjacency[e.source].push(e.target);
            adjacency[e.target].push(e.source);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        if self.stats.self_loops > 0 {
            log::warn!("dropped {} self-loop edge(s)", self.stats.self_loops);
        }
        let graph = TaxonomyGraph {
            ids: self.ids,
            index: self.index,
            edges: self.edges,
            adjacency,
        };
        (graph, self.stats)
    }
}

impl TaxonomyGraph {
    /// Build a graph from `(source, relation, target)` triples.
    pub fn from_edges<I, S>(edges: I) -> Result<(Self, IngestStats)>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut b = GraphBuilder::default();
        for (s, r, t) in edges {
            let s = ConceptId::new(s.as_ref())?;
            let t = ConceptId::new(t.as_ref())?;
            b.edge(s, r.as_ref(), t);
        }
        Ok(b.finish())
    }

    /// Read a tab-separated `source \t relation \t target` edge file.
    pub fn load(path: &Path, options: &IngestOptions) -> Result<(Self, IngestStats)> {
        let reader = util::open(path)?;
        Self::read(reader, &path.display().to_string(), options)
    }

    /// Like [`TaxonomyGraph::load`] but from any buffered reader. `origin`
    /// names the source in error messages.
    pub fn read<R: BufRead>(
        reader: R,
        origin: &str,
        options: &IngestOptions,
    ) -> Result<(Self, IngestStats)> {
        let mut b = GraphBuilder::default();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let (s, r, t) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if s.is_empty() || t.is_empty() {
                return Err(Error::parse(origin, lineno, "edge references an empty id"));
            }
            if let Some(keep) = &options.relations {
                if !keep.contains(r) {
                    b.stats.filtered += 1;
                    continue;
                }
            }
            b.edge(ConceptId(s.to_owned()), r, ConceptId(t.to_owned()));
        }
        Ok(b.finish())
    }

    /// Write the edge list in the same format [`TaxonomyGraph::load`] reads.
    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(w, "{}\t{}\t{}", self.ids[e.source], e.relation, self.ids[e.target])?;
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[ConceptId] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &ConceptId {
        &self.ids[index]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::Lookup {
            kind: "concept",
            id: id.to_owned(),
        })
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Shortest-path length between two concepts, ignoring edge direction
    /// and relation labels.
    pub fn distance(&self, a: &str, b: &str) -> Result<Distance> {
        let a = self.require(a)?;
        let b = self.require(b)?;
        Ok(self.distance_between(a, b))
    }

    pub fn distance_between(&self, a: usize, b: usize) -> Distance {
        if a == b {
            return Distance::Hops(0);
        }
        // Bidirectional search would be faster; a plain BFS with early exit
        // is enough for evaluation-sized workloads.
        let mut dist = vec![u32::MAX; self.ids.len()];
        let mut queue = VecDeque::new();
        dist[a] = 0;
        queue.push_back(a);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    if v == b {
                        return Distance::Hops(dist[v]);
                    }
                    queue.push_back(v);
                }
            }
        }
        Distance::Unreachable
    }

    /// Distances from `source` to every node; `None` marks unreachable nodes.
    pub fn distances_from(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.ids.len()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.ids.is_empty() || self.distances_from(0).iter().all(Option::is_some)
    }

    /// Order-sensitive digest of nodes and edges.
    pub fn fingerprint(&self) -> String {
        let mut fp = util::Fingerprint::default();
        fp.u64(self.ids.len() as u64);
        for id in &self.ids {
            fp.str(id.as_str());
        }
        for e in &self.edges {
            fp.u64(e.source as u64).str(&e.relation).u64(e.target as u64);
        }
        fp.finish()
    }
}

/// Sequence of visited node indices, starting with the start node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    pub steps: Vec<usize>,
}

impl Walk {
    pub fn start(&self) -> usize {
        self.steps[0]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn ids<'g>(&'g self, graph: &'g TaxonomyGraph) -> impl Iterator<Item = &'g ConceptId> {
        self.steps.iter().map(move |&i| graph.id(i))
    }
}

/// Return (`p`) and in-out (`q`) parameters of second-order walks.
/// `p = q = 1` gives uniform neighbour choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkBias {
    pub p: f64,
    pub q: f64,
}

impl Default for WalkBias {
    fn default() -> Self {
        WalkBias { p: 1.0, q: 1.0 }
    }
}

impl WalkBias {
    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.p) && ok(self.q) {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "walk bias must be positive, got p={} q={}",
                self.p, self.q
            )))
        }
    }

    fn is_uniform(&self) -> bool {
        self.p == 1.0 && self.q == 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub bias: WalkBias,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 20,
            bias: WalkBias::default(),
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node == 0 {
            return Err(Error::Validation("walks_per_node must be at least 1".into()));
        }
        if self.walk_length == 0 {
            return Err(Error::Validation("walk_length must be at least 1".into()));
        }
        self.bias.validate()
    }
}

/// Walk `walk_length` steps from `start`. Walks from isolated nodes consist
/// of the start node only.
pub fn random_walk(
    graph: &TaxonomyGraph,
    start: &str,
    walk_length: usize,
    bias: WalkBias,
    rng: &mut Rng,
) -> Result<Walk> {
    let start = graph.require(start)?;
    if walk_length == 0 {
        return Err(Error::Validation("walk_length must be at least 1".into()));
    }
    bias.validate()?;
    Ok(walk_from(graph, start, walk_length, bias, rng))
}

fn walk_from(
    graph: &TaxonomyGraph,
    start: usize,
    walk_length: usize,
    bias: WalkBias,
    rng: &mut Rng,
) -> Walk {
    let mut steps = Vec::with_capacity(walk_length + 1);
    steps.push(start);
    if graph.neighbors(start).is_empty() {
        return Walk { steps };
    }
    let uniform = bias.is_uniform();
    let mut weights = Vec::new();
    for _ in 0..walk_length {
        let cur = *steps.last().unwrap();
        let nbrs = graph.neighbors(cur);
        let next = match steps.len() {
            n if uniform || n < 2 => nbrs[rng.gen_range(0..nbrs.len())],
            n => {
                let prev = steps[n - 2];
                weights.clear();
                weights.extend(nbrs.iter().map(|&x| {
                    if x == prev {
                        1.0 / bias.p
                    } else if graph.are_adjacent(prev, x) {
                        1.0
                    } else {
                        1.0 / bias.q
                    }
                }));
                let total: f64 = weights.iter().sum();
                let mut r = rng.gen::<f64>() * total;
                let mut pick = nbrs.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if r < *w {
                        pick = i;
                        break;
                    }
                    r -= w;
                }
                nbrs[pick]
            }
        };
        steps.push(next);
    }
    Walk { steps }
}

/// Lazily generated walks: `walks_per_node` rounds, each visiting every node
/// once in index order. Each walk draws from its own seeded stream, so the
/// parallel and serial generators produce the same corpus.
pub struct WalkCorpus<'g> {
    graph: &'g TaxonomyGraph,
    config: WalkConfig,
    seed: u64,
    next: usize,
}

impl Iterator for WalkCorpus<'_> {
    type Item = Walk;

    fn next(&mut self) -> Option<Walk> {
        let n = self.graph.node_count();
        if n == 0 || self.next >= n * self.config.walks_per_node {
            return None;
        }
        let walk = corpus_walk(self.graph, &self.config, self.seed, self.next);
        self.next += 1;
        Some(walk)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.graph.node_count() * self.config.walks_per_node - self.next;
        (left, Some(left))
    }
}

fn corpus_walk(graph: &TaxonomyGraph, config: &WalkConfig, seed: u64, ordinal: usize) -> Walk {
    let start = ordinal % graph.node_count();
    let mut rng = util::rng(seed, ordinal as u64);
    walk_from(graph, start, config.walk_length, config.bias, &mut rng)
}

pub fn generate_walk_corpus<'g>(
    graph: &'g TaxonomyGraph,
    config: &WalkConfig,
    seed: u64,
) -> Result<WalkCorpus<'g>> {
    config.validate()?;
    Ok(WalkCorpus {
        graph,
        config: *config,
        seed,
        next: 0,
    })
}

/// Parallel counterpart of [`generate_walk_corpus`]; same output order.
pub fn par_generate_walk_corpus(
    graph: &TaxonomyGraph,
    config: &WalkConfig,
    seed: u64,
) -> Result<Vec<Walk>> {
    config.validate()?;
    let total = graph.node_count() * config.walks_per_node;
    Ok((0..total)
        .into_par_iter()
        .map(|i| corpus_walk(graph, config, seed, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> TaxonomyGraph {
        TaxonomyGraph::from_edges(edges.iter().map(|&(a, b)| (a, "is_a", b)))
            .unwrap()
            .0
    }

    fn read(text: &str) -> Result<(TaxonomyGraph, IngestStats)> {
        TaxonomyGraph::read(text.as_bytes(), "mem", &IngestOptions::default())
    }

    #[test]
    fn loads_simple_chain() {
        let (g, stats) = read("A\tis_a\tB\nB\tis_a\tC\n").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn self_loop_dropped() {
        let (g, stats) = read("A\tis_a\tA\n").unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(stats.self_loops, 1);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let (g, stats) = read("A\tis_a\tB\nA\tis_a\tB\n").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let (g, _) = read("# header\n\nA\tis_a\tB\n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let err = read("A\tis_a\tB\nA\tB\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_id_is_parse_error() {
        let err = read("A\tis_a\t\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn relation_filter() {
        let opts = IngestOptions {
            relations: Some(["is_a".to_owned()].into_iter().collect()),
        };
        let text = "A\tis_a\tB\nB\tfinding_site\tC\n";
        let (g, stats) = TaxonomyGraph::read(text.as_bytes(), "mem", &opts).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(stats.filtered, 1);
    }

    #[test]
    fn adjacency_matches_edges() {
        let (g, _) = read("A\tis_a\tB\nB\tpart_of\tA\nC\tis_a\tB\n").unwrap();
        let mut rebuilt = vec![BTreeSet::new(); g.node_count()];
        for e in g.edges() {
            rebuilt[e.source].insert(e.target);
            rebuilt[e.target].insert(e.source);
        }
        for (i, set) in rebuilt.iter().enumerate() {
            assert_eq!(g.neighbors(i), set.iter().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn distances_on_small_graphs() {
        let g = graph(&[("A", "B"), ("B", "C"), ("C", "D")]);
        assert_eq!(g.distance("A", "A").unwrap(), Distance::Hops(0));
        assert_eq!(g.distance("A", "B").unwrap(), Distance::Hops(1));
        assert_eq!(g.distance("A", "D").unwrap(), Distance::Hops(3));
        assert_eq!(g.distance("D", "A").unwrap(), Distance::Hops(3));
        assert!(matches!(g.distance("A", "Z"), Err(Error::Lookup { .. })));
    }

    #[test]
    fn unreachable_pairs() {
        let g = graph(&[("A", "B"), ("C", "D")]);
        assert_eq!(g.distance("A", "D").unwrap(), Distance::Unreachable);
        assert!(!g.is_connected());
    }

    #[test]
    fn two_node_walk() {
        let g = graph(&[("A", "B")]);
        let mut rng = util::rng(0, 0);
        let w = random_walk(&g, "A", 2, WalkBias::default(), &mut rng).unwrap();
        let ids: Vec<_> = w.ids(&g).map(|c| c.as_str()).collect();
        assert_eq!(ids, ["A", "B", "A"]);
    }

    #[test]
    fn isolated_node_walk() {
        let (g, _) = read("X\tis_a\tX\n").unwrap();
        let mut rng = util::rng(0, 0);
        let w = random_walk(&g, "X", 7, WalkBias::default(), &mut rng).unwrap();
        assert_eq!(w.steps, vec![0]);
    }

    #[test]
    fn walk_rejects_bad_inputs() {
        let g = graph(&[("A", "B")]);
        let mut rng = util::rng(0, 0);
        assert!(matches!(
            random_walk(&g, "Q", 2, WalkBias::default(), &mut rng),
            Err(Error::Lookup { .. })
        ));
        let bad = WalkBias { p: 0.0, q: 1.0 };
        assert!(random_walk(&g, "A", 2, bad, &mut rng).is_err());
        assert!(random_walk(&g, "A", 0, WalkBias::default(), &mut rng).is_err());
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let g = graph(&[("A", "B"), ("B", "C")]);
        let cfg = WalkConfig {
            walks_per_node: 2,
            ..WalkConfig::default()
        };
        let a: Vec<_> = generate_walk_corpus(&g, &cfg, 9).unwrap().collect();
        let b: Vec<_> = generate_walk_corpus(&g, &cfg, 9).unwrap().collect();
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
        assert!(a.iter().all(|w| w.len() <= 21));
        assert_eq!(a, par_generate_walk_corpus(&g, &cfg, 9).unwrap());
        let c: Vec<_> = generate_walk_corpus(&g, &cfg, 10).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn star_first_step_is_uniform() {
        let g = graph(&[("C", "L1"), ("C", "L2"), ("C", "L3"), ("C", "L4")]);
        let c = g.index_of("C").unwrap();
        let mut counts = HashMap::new();
        let mut rng = util::rng(42, 0);
        let n = 100_000;
        for _ in 0..n {
            let w = walk_from(&g, c, 1, WalkBias::default(), &mut rng);
            *counts.entry(w.steps[1]).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        let mut chi2 = 0.0;
        for &k in counts.values() {
            let f = k as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "frequency {f}");
            let expected = n as f64 / 4.0;
            chi2 += (k as f64 - expected).powi(2) / expected;
        }
        // chi-square, 3 degrees of freedom, p = 0.001
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn biased_walk_prefers_return_with_small_p() {
        // path A-B-C: from B having arrived from A, return weight 1/p vs
        // outward weight 1/q.
        let g = graph(&[("A", "B"), ("B", "C")]);
        let bias = WalkBias { p: 0.25, q: 1.0 };
        let mut rng = util::rng(1, 0);
        let a = g.index_of("A").unwrap();
        let mut returns = 0;
        let n = 20_000;
        for _ in 0..n {
            let w = walk_from(&g, a, 2, bias, &mut rng);
            if w.steps[2] == a {
                returns += 1;
            }
        }
        // P(return) = 4 / (4 + 1) = 0.8
        let f = returns as f64 / n as f64;
        assert!((f - 0.8).abs() < 0.015, "{f}");
    }
}
