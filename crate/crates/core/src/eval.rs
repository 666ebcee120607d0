//! Metrics and the supervised-embedding comparison model.

use std::collections::BTreeSet;

use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::QAItem;
use crate::error::{Result, VrnError};
use crate::kg::EntityId;
use crate::model::tensor::{axpy, dot, log_softmax};
use crate::model::{embed_question, topic_distribution, EntityNames, Matrix, RecognitionParams};
use crate::rng;
use crate::train::TrainItem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub items: usize,
    pub hits_at_1: f64,
    pub entity_accuracy: Option<f64>,
}

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub hop: usize,
    pub regime: String,
    pub hits_at_1: f64,
    /// Empty when the model has no recognizer.
    pub entity_accuracy: Option<f64>,
}

/// Fraction of items whose predicted entity is one of the gold answers.
pub fn hits_at_1<F>(items: &[TrainItem], predict: F) -> Result<f64>
where
    F: Fn(&TrainItem) -> Result<EntityId> + Sync,
{
    if items.is_empty() {
        return Err(VrnError::EmptyDataset);
    }
    let hits = items
        .par_iter()
        .map(|it| predict(it).map(|p| usize::from(it.answers.binary_search(&p).is_ok())))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}

/// Fraction of labeled items whose most probable topic entity is the label.
pub fn entity_accuracy(rec: &RecognitionParams, names: &EntityNames, items: &[TrainItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(VrnError::EmptyDataset);
    }
    let hits = items
        .par_iter()
        .enumerate()
        .map(|(i, it)| {
            let label = it.topic.ok_or(VrnError::Unlabeled(i))?;
            let d = topic_distribution(rec, names, &it.question)?;
            Ok(usize::from(d.support[d.argmax()] == label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisedConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self { dim: 64, epochs: 20, learning_rate: 0.5, init_scale: 0.1, seed: 0 }
    }
}

/// Scores `score(q, a) = mean-BOW(q) . E[a]` with no graph access.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedEmbedding {
    pub tokens: Matrix,
    pub entities: Matrix,
}

impl SupervisedEmbedding {
    pub fn init(vocab_size: usize, num_entities: usize, cfg: &SupervisedConfig) -> Self {
        let mut r = rng::substream(cfg.seed, "supervised-init");
        Self {
            tokens: Matrix::uniform(vocab_size, cfg.dim, cfg.init_scale, &mut r),
            entities: Matrix::uniform(num_entities, cfg.dim, cfg.init_scale, &mut r),
        }
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }

    fn logits(&self, f: &[f64]) -> Vec<f64> {
        (0..self.entities.rows()).map(|e| dot(f, self.entities.row(e))).collect()
    }

    pub fn predict(&self, q: &[usize]) -> Result<EntityId> {
        let f = embed_question(&self.tokens, q)?;
        let logits = self.logits(&f);
        let best = logits
            .iter()
            .enumerate()
            .fold(0, |b, (i, &x)| if x > logits[b] { i } else { b });
        Ok(EntityId(best))
    }

    /// One SGD step on softmax cross-entropy against the uniform distribution
    /// over the gold answers. Returns the loss before the step.
    fn sgd_step(&mut self, item: &TrainItem, lr: f64) -> Result<f64> {
        let f = embed_question(&self.tokens, &item.question)?;
        let (probs, log_probs) = log_softmax(&self.logits(&f));
        let w = 1.0 / item.answers.len() as f64;
        let loss = -w * item.answers.iter().map(|a| log_probs[a.0]).sum::<f64>();
        let mut dl: Vec<f64> = probs.iter().map(|p| -p).collect();
        for a in &item.answers {
            dl[a.0] += w;
        }
        let mut df = vec![0.0; f.len()];
        for (e, &d) in dl.iter().enumerate() {
            axpy(d, self.entities.row(e), &mut df);
            axpy(lr * d, &f, self.entities.row_mut(e));
        }
        let scale = lr / item.question.len() as f64;
        for &t in &item.question {
            axpy(scale, &df, self.tokens.row_mut(t));
        }
        Ok(loss)
    }

    /// Trains on every item each epoch in a seeded order. Returns the mean
    /// loss of each epoch.
    pub fn train(&mut self, items: &[TrainItem], cfg: &SupervisedConfig) -> Result<Vec<f64>> {
        if items.is_empty() {
            return Err(VrnError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut losses = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng::child(cfg.seed, "supervised-order", epoch as u64));
            let mut total = 0.0;
            for &i in &order {
                total += self.sgd_step(&items[i], cfg.learning_rate)?;
            }
            if !self.tokens.is_finite() || !self.entities.is_finite() {
                return Err(VrnError::NonFinite { block: "supervised".into(), detail: format!("epoch {epoch}") });
            }
            losses.push(total / items.len() as f64);
        }
        Ok(losses)
    }
}

pub fn supervised_embedding(
    items: &[TrainItem],
    vocab_size: usize,
    num_entities: usize,
    cfg: &SupervisedConfig,
) -> Result<SupervisedEmbedding> {
    let mut m = SupervisedEmbedding::init(vocab_size, num_entities, cfg);
    m.train(items, cfg)?;
    Ok(m)
}

/// How much of a test split can be answered by recall of training items.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub test_items: usize,
    /// Test items whose topic entity is never a topic in training.
    pub new_entity_fraction: f64,
    /// Test (topic, answer) pairs that never occur in training.
    pub new_pair_fraction: f64,
}

pub fn dataset_report(train: &[QAItem], test: &[QAItem]) -> Result<DatasetReport> {
    if test.is_empty() {
        return Err(VrnError::EmptyDataset);
    }
    let mut seen_topics = BTreeSet::new();
    let mut seen_pairs = BTreeSet::new();
    for it in train {
        if let Some(s) = it.source {
            seen_topics.insert(s);
            seen_pairs.extend(it.answers.iter().map(|&a| (s, a)));
        }
    }
    let (mut new_entities, mut pairs, mut new_pairs) = (0usize, 0usize, 0usize);
    for (i, it) in test.iter().enumerate() {
        let s = it.source.ok_or(VrnError::Unlabeled(i))?;
        new_entities += usize::from(!seen_topics.contains(&s));
        pairs += it.answers.len();
        new_pairs += it.answers.iter().filter(|&&a| !seen_pairs.contains(&(s, a))).count();
    }
    Ok(DatasetReport {
        test_items: test.len(),
        new_entity_fraction: new_entities as f64 / test.len() as f64,
        new_pair_fraction: if pairs == 0 { 0.0 } else { new_pairs as f64 / pairs as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(q: &[usize], topic: Option<usize>, answers: &[usize]) -> TrainItem {
        TrainItem { question: q.to_vec(), topic: topic.map(EntityId), answers: answers.iter().map(|&a| EntityId(a)).collect() }
    }

    #[test]
    fn hits_arithmetic() {
        let items = vec![item(&[1], None, &[0]), item(&[1], None, &[1]), item(&[1], None, &[2]), item(&[1], None, &[1, 3])];
        let first = |it: &TrainItem| Ok(it.answers[0]);
        assert_eq!(hits_at_1(&items, first).unwrap(), 1.0);
        assert_eq!(hits_at_1(&items, |_| Ok(EntityId(9))).unwrap(), 0.0);
        assert_eq!(hits_at_1(&items, |_| Ok(EntityId(1))).unwrap(), 0.5);
        let three = |it: &TrainItem| Ok(if it.answers[0].0 == 2 { EntityId(0) } else { it.answers[0] });
        assert_eq!(hits_at_1(&items, three).unwrap(), 0.75);
        assert!(matches!(hits_at_1(&[], first), Err(VrnError::EmptyDataset)));
    }

    #[test]
    fn supervised_memorizes_and_is_seeded() {
        let items: Vec<_> = (0..6).map(|i| item(&[1 + i, 7], None, &[i])).collect();
        let cfg = SupervisedConfig { dim: 8, epochs: 30, ..Default::default() };
        let m = supervised_embedding(&items, 8, 6, &cfg).unwrap();
        for it in &items {
            assert_eq!(m.predict(&it.question).unwrap(), it.answers[0]);
        }
        assert_eq!(m, supervised_embedding(&items, 8, 6, &cfg).unwrap());
    }

    #[test]
    fn untrained_is_near_chance() {
        let n = 50;
        let m = SupervisedEmbedding::init(20, n, &SupervisedConfig { seed: 3, ..Default::default() });
        let mut r = rng::substream(4, "t");
        let items: Vec<_> =
            (0..4000).map(|_| item(&[r.gen_range(1..20), r.gen_range(1..20)], None, &[r.gen_range(0..n)])).collect();
        let h = hits_at_1(&items, |it| m.predict(&it.question)).unwrap();
        assert!((h - 1.0 / n as f64).abs() < 0.01, "{h}");
    }

    #[test]
    fn entity_accuracy_extremes() {
        use crate::kg::{load_graph, Vocabulary};
        use crate::model::{ModelConfig, Params, WeightMode};
        let g = load_graph("a\tr\tb\nb\tr\tc\nc\tr\td\n".as_bytes(), None::<&[u8]>).unwrap();
        let mut vocab = Vocabulary::new();
        for e in g.entities() {
            vocab.insert(g.entity_name(e));
        }
        let names = EntityNames::new(&g, &vocab);
        let shapes = Params::shapes_for(&ModelConfig { dim: 4, weight_mode: WeightMode::Free, ..Default::default() }, &g, &vocab);
        let mut p = Params::zeros(shapes, WeightMode::Free, false);
        // question token i+1 names entity i; make its embedding point at that entity's row
        let rec = &mut p.recognition;
        for e in 0..4 {
            rec.ent_tokens.row_mut(e + 1)[e] = 1.0;
        }
        if let crate::model::EntityWeights::Free(w) = &mut rec.weights {
            for e in 0..4 {
                w.row_mut(e)[e] = 1.0;
            }
        }
        let items: Vec<_> = (0..4).map(|e| item(&[e + 1], Some(e), &[0])).collect();
        assert_eq!(entity_accuracy(&p.recognition, &names, &items).unwrap(), 1.0);

        // all-zero recognizer always picks entity 0
        let zero = Params::zeros(shapes, WeightMode::Free, false);
        let mut r = rng::substream(9, "t");
        let items: Vec<_> = (0..4000).map(|_| item(&[1], Some(r.gen_range(0..4)), &[0])).collect();
        let acc = entity_accuracy(&zero.recognition, &names, &items).unwrap();
        assert!((acc - 0.25).abs() < 0.03, "{acc}");
        assert!(matches!(entity_accuracy(&zero.recognition, &names, &[item(&[1], None, &[0])]), Err(VrnError::Unlabeled(0))));
    }

    #[test]
    fn report_counts_new_entities_and_pairs() {
        let qa = |s: usize, a: &[usize]| QAItem {
            tokens: vec!["x".into()],
            mention: None,
            source: Some(EntityId(s)),
            topic: None,
            answers: a.iter().map(|&x| EntityId(x)).collect(),
            hops: 1,
            type_id: "t".into(),
        };
        let r = dataset_report(&[qa(0, &[1, 2])], &[qa(0, &[2, 3]), qa(5, &[1])]).unwrap();
        assert_eq!(r.new_entity_fraction, 0.5);
        assert!((r.new_pair_fraction - 2.0 / 3.0).abs() < 1e-12);
    }
}
