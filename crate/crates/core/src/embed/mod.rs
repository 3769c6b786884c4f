//! Word and node embeddings: vocabulary construction, skip-gram training
//! with negative sampling, whole-token and subword lookup policies, and the
//! text vector file format.

mod nodes;
mod skipgram;
mod subword;
mod table;
mod vocab;

pub use nodes::{train_node_embeddings, NodeEmbeddingConfig};
pub use skipgram::{
    pair_gradients, pair_objective, train_skipgram, train_subword_skipgram, NoiseSampler,
    PairGradients, SkipGramConfig, SkipGramTrainer,
};
pub use subword::{fnv1a, ngrams, SubwordConfig, SubwordEmbedder};
pub use table::{EmbeddingTable, OOV_TOKEN};
pub use vocab::Vocab;
