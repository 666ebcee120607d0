//! Dataset assembly shared by the command line and the end-to-end tests.

use serde::{Deserialize, Serialize};

use crate::datagen::{
    apply_noise, generate_kg, generate_questions, split, templates, DatasetSplit, KGGenConfig, NoiseConfig, QAItem,
    DEFAULT_ANSWER_CAP,
};
use crate::error::{Result, VrnError};
use crate::kg::{build_vocab, KnowledgeGraph, Vocabulary};
use crate::train::TrainItem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kg: KGGenConfig,
    pub hops: usize,
    /// Questions generated before splitting.
    pub questions: usize,
    pub label_fraction: f64,
    pub train_ratio: f64,
    pub valid_ratio: f64,
    pub test_ratio: f64,
    pub answer_cap: usize,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kg: KGGenConfig::default(),
            hops: 1,
            questions: 2500,
            label_fraction: 0.05,
            train_ratio: 0.8,
            valid_ratio: 0.1,
            test_ratio: 0.1,
            answer_cap: DEFAULT_ANSWER_CAP,
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: KnowledgeGraph,
    pub split: DatasetSplit,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.hops) {
            return Err(VrnError::Config(format!("hops must be 1, 2 or 3, got {}", self.hops)));
        }
        if self.questions == 0 {
            return Err(VrnError::Config("questions must be >= 1".into()));
        }
        self.noise.validate()?;
        self.kg.validate()
    }
}

/// Generates the graph and a split of `hops`-hop questions. The graph seed
/// comes from `kg.seed`; questions, labels and the split use `seed`.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let graph = generate_kg(&cfg.kg)?;
    let mut items =
        generate_questions(&graph, &templates(cfg.hops), cfg.questions, cfg.label_fraction, cfg.answer_cap, cfg.seed)?;
    if !cfg.noise.is_identity() {
        items = items.iter().enumerate().map(|(i, it)| apply_noise(it, &cfg.noise, i as u64)).collect();
    }
    let split = split(items, (cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio), cfg.seed)?;
    Ok(Dataset { graph, split })
}

/// Vocabulary of entity names plus every word the question generator and
/// the noise model can emit, so it does not depend on the sampled questions.
pub fn standard_vocab(g: &KnowledgeGraph) -> Vocabulary {
    let names = g.entities().map(|e| g.name_tokens(e).to_vec());
    let words = crate::datagen::templates::template_words().into_iter().collect::<Vec<_>>();
    let synonyms = crate::datagen::synonym_words().into_iter().map(str::to_owned).collect::<Vec<_>>();
    build_vocab(names.chain([words, synonyms]))
}

pub fn encode(items: &[QAItem], vocab: &Vocabulary) -> Vec<TrainItem> {
    items.iter().map(|it| TrainItem::from_qa(it, vocab)).collect()
}

/// Items labeled with their generating entity, for measuring the recognizer.
pub fn probe_items(items: &[QAItem], vocab: &Vocabulary) -> Vec<TrainItem> {
    items
        .iter()
        .filter(|it| it.source.is_some())
        .map(|it| TrainItem { topic: it.source, ..TrainItem::from_qa(it, vocab) })
        .collect()
}
