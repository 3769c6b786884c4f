use serde::{Deserialize, Serialize};

use super::{SkipGramConfig, SkipGramTrainer, Vocab};
use crate::embed::EmbeddingTable;
use crate::taxonomy::{generate_walk_corpus, par_generate_walk_corpus, TaxonomyGraph, WalkConfig};
use crate::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeEmbeddingConfig {
    pub walks: WalkConfig,
    pub skipgram: SkipGramConfig,
}

/// Embed every concept by skip-gram over random walks. Rows follow the
/// graph's node order. `parallel` only affects walk generation, whose
/// output does not depend on it.
pub fn train_node_embeddings(
    graph: &TaxonomyGraph,
    config: &NodeEmbeddingConfig,
    parallel: bool,
) -> Result<EmbeddingTable> {
    let seed = config.skipgram.seed;
    let walks = if parallel {
        par_generate_walk_corpus(graph, &config.walks, seed)?
    } else {
        generate_walk_corpus(graph, &config.walks, seed)?.collect()
    };
    let corpus: Vec<Vec<&str>> = walks
        .iter()
        .map(|w| w.ids(graph).map(|c| c.as_str()).collect())
        .collect();
    let vocab = Vocab::build(&corpus, 1)?;
    let sg = SkipGramConfig {
        oov_sentinel: false,
        ..config.skipgram.clone()
    };
    let mut trainer = SkipGramTrainer::new(vocab, sg)?;
    let losses = trainer.fit(&corpus)?;
    log::info!("node embeddings: final skip-gram loss {:?}", losses.last());
    let table = trainer.table()?;

    let dim = table.dim();
    let mut data = Vec::with_capacity(graph.node_count() * dim);
    for id in graph.ids() {
        data.extend_from_slice(table.get(id.as_str()).expect("every node starts at least one walk"));
    }
    EmbeddingTable::new(graph.ids().iter().map(|c| c.to_string()).collect(), dim, data, None)
}
