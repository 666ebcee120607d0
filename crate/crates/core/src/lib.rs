//! Question answering over a knowledge graph with a latent topic entity.
//!
//! A question `q` is answered in two stages: a recognizer picks the topic
//! entity `y`, and a reasoner scores every entity within a few hops of `y`
//! by propagating embeddings along the graph. The topic entity is usually
//! unlabeled, so the two stages are trained jointly against a variational
//! posterior `Q(y | q, a)`.

pub mod checkpoint;
pub mod datagen;
pub mod env;
pub mod error;
pub mod eval;
pub mod infer;
pub mod kg;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod scope;
pub mod train;

pub use env::Env;
pub use error::{Result, VrnError};
pub use kg::{load_graph, Direction, EntityId, KnowledgeGraph, RelationId, Triple, Vocabulary};
pub use model::{ModelConfig, Params, WeightMode};
pub use scope::{compute_scope, Scope, ScopeCache};
