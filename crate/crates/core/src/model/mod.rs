//! Parameters and differentiable kernels of the reasoning network.

pub mod grad;
pub mod kernels;
pub mod params;
pub mod tensor;

pub use grad::{gradients, log_prob_dlogits, LossSpec};
pub use kernels::{
    answer_distribution, answer_forward, embed_question, entity_weight, forward_propagate, posterior_distribution,
    posterior_forward, topic_distribution, topic_forward, AnswerForward, Distribution, NodeEmbeddings,
    PosteriorForward, PropagationStats, TopicForward,
};
pub use params::{
    EntityNames, EntityWeights, GradientSet, ModelConfig, Params, PosteriorParams, RecognitionParams,
    ReasoningParams, Shapes, WeightMode, INIT_SCALE,
};
pub use tensor::{EmbeddingTable, Matrix};
