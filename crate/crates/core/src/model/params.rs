use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{EmbeddingTable, Matrix};
use crate::error::{Result, VrnError};
use crate::kg::{Direction, KnowledgeGraph, RelationId, Vocabulary};

/// Initial weight range of the baseline network.
pub const INIT_SCALE: f64 = 0.08;

/// How the entity classification weights `W_y` are parameterized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `W_y` is the mean embedding of the entity's name tokens.
    NameBow,
    /// One free weight row per entity.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    pub weight_mode: WeightMode,
    /// Use a 2|R| one-hot that separates forward and backward traversal.
    pub directional_relations: bool,
    /// Let the variational posterior reuse the model's parameters.
    pub share_posterior: bool,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            weight_mode: WeightMode::NameBow,
            directional_relations: false,
            share_posterior: false,
            init_scale: 0.6,
        }
    }
}

/// Sizes fixed by the graph and vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shapes {
    pub dim: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    pub vocab_size: usize,
    pub directional_relations: bool,
}

impl Shapes {
    /// Width of the relation one-hot.
    pub fn relation_width(&self) -> usize {
        if self.directional_relations {
            2 * self.num_relations
        } else {
            self.num_relations
        }
    }

    /// Column of `V` that carries the one-hot for this edge.
    pub fn relation_feature(&self, r: RelationId, dir: Direction) -> usize {
        if self.directional_relations {
            2 * r.0 + usize::from(dir == Direction::Backward)
        } else {
            r.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EntityWeights {
    /// vocab_size x d
    NameBow(EmbeddingTable),
    /// num_entities x d
    Free(EmbeddingTable),
}

impl EntityWeights {
    pub fn table(&self) -> &Matrix {
        match self {
            EntityWeights::NameBow(m) | EntityWeights::Free(m) => m,
        }
    }

    pub fn table_mut(&mut self) -> &mut Matrix {
        match self {
            EntityWeights::NameBow(m) | EntityWeights::Free(m) => m,
        }
    }

    pub fn mode(&self) -> WeightMode {
        match self {
            EntityWeights::NameBow(_) => WeightMode::NameBow,
            EntityWeights::Free(_) => WeightMode::Free,
        }
    }
}

/// Topic-entity recognition parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionParams {
    pub ent_tokens: EmbeddingTable,
    pub weights: EntityWeights,
}

/// Reasoning-graph embedding parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ReasoningParams {
    pub qt_tokens: EmbeddingTable,
    /// d x (d + relation width)
    pub propagation: Matrix,
}

/// Separate parameters of the variational posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorParams {
    pub recognition: RecognitionParams,
    pub reasoning: ReasoningParams,
}

/// All trainable parameters of the model. The same type doubles as the
/// gradient container, with every block shaped like its parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub shapes: Shapes,
    pub recognition: RecognitionParams,
    pub reasoning: ReasoningParams,
    /// `None` when the posterior shares the model's parameters.
    pub posterior: Option<PosteriorParams>,
}

pub type GradientSet = Params;

impl RecognitionParams {
    fn new(shapes: &Shapes, mode: WeightMode, mut init: impl FnMut(usize, usize) -> Matrix) -> Self {
        let ent_tokens = init(shapes.vocab_size, shapes.dim);
        let weights = match mode {
            WeightMode::NameBow => EntityWeights::NameBow(init(shapes.vocab_size, shapes.dim)),
            WeightMode::Free => EntityWeights::Free(init(shapes.num_entities, shapes.dim)),
        };
        Self { ent_tokens, weights }
    }
}

impl ReasoningParams {
    fn new(shapes: &Shapes, mut init: impl FnMut(usize, usize) -> Matrix) -> Self {
        Self {
            qt_tokens: init(shapes.vocab_size, shapes.dim),
            propagation: init(shapes.dim, shapes.dim + shapes.relation_width()),
        }
    }
}

impl Params {
    pub fn shapes_for(cfg: &ModelConfig, g: &KnowledgeGraph, vocab: &Vocabulary) -> Shapes {
        Shapes {
            dim: cfg.dim,
            num_entities: g.num_entities(),
            num_relations: g.num_relations(),
            vocab_size: vocab.len(),
            directional_relations: cfg.directional_relations,
        }
    }

    fn build(
        shapes: Shapes,
        mode: WeightMode,
        share_posterior: bool,
        mut init: impl FnMut(usize, usize) -> Matrix,
    ) -> Self {
        let recognition = RecognitionParams::new(&shapes, mode, &mut init);
        let reasoning = ReasoningParams::new(&shapes, &mut init);
        let posterior = (!share_posterior).then(|| PosteriorParams {
            recognition: RecognitionParams::new(&shapes, mode, &mut init),
            reasoning: ReasoningParams::new(&shapes, &mut init),
        });
        Self { shapes, recognition, reasoning, posterior }
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn init<R: Rng + ?Sized>(
        shapes: Shapes,
        mode: WeightMode,
        share_posterior: bool,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        Self::build(shapes, mode, share_posterior, |r, c| Matrix::uniform(r, c, scale, rng))
    }

    pub fn zeros(shapes: Shapes, mode: WeightMode, share_posterior: bool) -> Self {
        Self::build(shapes, mode, share_posterior, Matrix::zeros)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shapes, self.weight_mode(), self.posterior.is_none())
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.recognition.weights.mode()
    }

    pub fn shares_posterior(&self) -> bool {
        self.posterior.is_none()
    }

    /// Parameters used by the variational posterior.
    pub fn posterior_parts(&self) -> (&RecognitionParams, &ReasoningParams) {
        match &self.posterior {
            Some(p) => (&p.recognition, &p.reasoning),
            None => (&self.recognition, &self.reasoning),
        }
    }

    pub fn posterior_parts_mut(&mut self) -> (&mut RecognitionParams, &mut ReasoningParams) {
        match &mut self.posterior {
            Some(p) => (&mut p.recognition, &mut p.reasoning),
            None => (&mut self.recognition, &mut self.reasoning),
        }
    }

    /// Block names in checkpoint order.
    pub fn block_names(&self) -> Vec<&'static str> {
        let weights = |psi: bool| match (psi, self.weight_mode()) {
            (false, WeightMode::NameBow) => "theta1.name_tokens",
            (false, WeightMode::Free) => "theta1.free_w",
            (true, WeightMode::NameBow) => "psi.name_tokens",
            (true, WeightMode::Free) => "psi.free_w",
        };
        let mut names = vec!["theta1.ent_tokens", weights(false), "theta2.qt_tokens", "theta2.propagation"];
        if self.posterior.is_some() {
            names.extend(["psi.ent_tokens", weights(true), "psi.qt_tokens", "psi.propagation"]);
        }
        names
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        let mut mats = vec![
            &self.recognition.ent_tokens,
            self.recognition.weights.table(),
            &self.reasoning.qt_tokens,
            &self.reasoning.propagation,
        ];
        if let Some(p) = &self.posterior {
            mats.extend([&p.recognition.ent_tokens, p.recognition.weights.table(), &p.reasoning.qt_tokens, &p.reasoning.propagation]);
        }
        self.block_names().into_iter().zip(mats).collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let names = self.block_names();
        let mut mats = vec![
            &mut self.recognition.ent_tokens,
            self.recognition.weights.table_mut(),
            &mut self.reasoning.qt_tokens,
            &mut self.reasoning.propagation,
        ];
        if let Some(p) = &mut self.posterior {
            mats.extend([
                &mut p.recognition.ent_tokens,
                p.recognition.weights.table_mut(),
                &mut p.reasoning.qt_tokens,
                &mut p.reasoning.propagation,
            ]);
        }
        names.into_iter().zip(mats).collect()
    }

    /// `self += alpha * other`, block by block.
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        let src = other.blocks();
        for ((_, dst), (_, s)) in self.blocks_mut().into_iter().zip(src) {
            dst.add_scaled(alpha, s);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for (_, m) in self.blocks_mut() {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in self.blocks() {
            if let Some(i) = m.as_slice().iter().position(|x| !x.is_finite()) {
                return Err(VrnError::NonFinite {
                    block: name.to_owned(),
                    detail: format!("entry {} (row {}, col {}) = {}", i, i / m.cols(), i % m.cols(), m.as_slice()[i]),
                });
            }
        }
        Ok(())
    }
}

/// Vocabulary ids of every entity's name tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityNames {
    ids: Vec<Vec<usize>>,
}

impl EntityNames {
    pub fn new(g: &KnowledgeGraph, vocab: &Vocabulary) -> Self {
        Self { ids: g.entities().map(|e| vocab.encode(g.name_tokens(e))).collect() }
    }

    pub fn from_ids(ids: Vec<Vec<usize>>) -> Self {
        Self { ids }
    }

    pub fn get(&self, e: usize) -> &[usize] {
        &self.ids[e]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
