//! Map free-text phrases onto the concepts of an arbitrary taxonomy.
//!
//! The pipeline has three stages:
//!
//! 1. the taxonomy is embedded by running skip-gram over random walks
//!    ([`taxonomy`], [`embed`]);
//! 2. phrase tokens are embedded by a word table with an OOV sentinel or by
//!    a character n-gram hashing embedder ([`embed`]);
//! 3. a regression model maps the padded sequence of word vectors onto a
//!    point in node space, and exact nearest-neighbour search turns that
//!    point into ranked concepts ([`nn`], [`mapper`]).
//!
//! [`eval`] implements top-k accuracy, mean graph distance and the hold-out,
//! restricted-search and zero-shot protocols; [`synth`] generates toy
//! taxonomies with correlated lexicons.

pub mod container;
pub mod embed;
mod error;
pub mod eval;
pub mod mapper;
pub mod nn;
pub mod synth;
pub mod taxonomy;
pub(crate) mod util;

pub use error::{Error, Result};

pub use embed::{EmbeddingTable, SkipGramConfig, SubwordEmbedder, Vocab};
pub use eval::{EvalReport, GoldSet, Protocol};
pub use mapper::{MappingResult, Metric, NeighborIndex, PhraseEncoder, TrainingPair};
pub use nn::{Architecture, MappingModel, Tensor2D};
pub use taxonomy::{ConceptId, TaxonomyGraph, Walk};
