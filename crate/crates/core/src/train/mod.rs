//! Joint training: supervised initialization from the labeled slice, then
//! variational training of recognizer, reasoner and posterior with a
//! score-function gradient for the posterior.

pub mod baseline;
pub mod objective;
pub mod signal;

use std::sync::Arc;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::BaselineNet;
pub use objective::{elbo, elbo_under, exact_posterior, learning_signal, marginal_loglik};
pub use signal::{normalize_signal, LearningSignalState, SIGMA_FLOOR};

use crate::env::Env;
use crate::error::{Result, VrnError};
use crate::datagen::QAItem;
use crate::kg::{EntityId, Vocabulary};
use crate::model::grad::{answer_backward, log_prob_dlogits, one_hot_dlogits, posterior_backward, topic_backward};
use crate::model::{
    answer_forward, posterior_forward, topic_forward, AnswerForward, GradientSet, Params, PosteriorForward,
    TopicForward,
};
use crate::rng;
use crate::scope::Scope;

/// A question encoded against the vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainItem {
    pub question: Vec<usize>,
    pub topic: Option<EntityId>,
    pub answers: Vec<EntityId>,
}

impl TrainItem {
    pub fn from_qa(item: &QAItem, vocab: &Vocabulary) -> Self {
        Self { question: vocab.encode(&item.tokens), topic: item.topic, answers: item.answers.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Step size for supervised pretraining; `learning_rate` when unset.
    pub pretrain_learning_rate: Option<f64>,
    /// Posterior samples per instance.
    pub samples: usize,
    pub batch_size: usize,
    /// Joint (variational) training epochs.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    /// Optional cap on joint-training steps.
    pub max_steps: Option<u64>,
    pub hops: usize,
    pub label_fraction: f64,
    pub seed: u64,
    pub decay: f64,
    pub baseline_hidden: usize,
    pub baseline_learning_rate: f64,
    /// Write a checkpoint every N joint steps (0 = only at the end).
    pub checkpoint_every: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 8.0,
            pretrain_learning_rate: Some(10.0),
            samples: 8,
            batch_size: 16,
            epochs: 48,
            pretrain_epochs: 30,
            max_steps: None,
            hops: 1,
            label_fraction: 0.05,
            seed: 0,
            decay: 0.9,
            baseline_hidden: 64,
            baseline_learning_rate: 0.01,
            checkpoint_every: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VrnError::Config(m.to_owned()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be > 0");
        }
        if self.pretrain_learning_rate.is_some_and(|lr| lr.is_nan() || lr <= 0.0) {
            return bad("pretrain_learning_rate must be > 0");
        }
        if self.samples == 0 {
            return bad("samples must be >= 1");
        }
        if self.hops == 0 {
            return bad("hops must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.decay) {
            return bad("decay must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.label_fraction) {
            return bad("label_fraction must be in [0, 1]");
        }
        Ok(())
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: Params,
    pub baseline: BaselineNet,
    pub signal: LearningSignalState,
    pub step: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub step: u64,
    /// Mean raw learning signal over all samples of the batch.
    pub mean_signal: f64,
    /// ELBO estimate: sampled log-likelihood terms plus the exact entropy of Q.
    pub elbo_estimate: f64,
    pub baseline_loss: f64,
    /// `-elbo_estimate + baseline_loss`.
    pub total_loss: f64,
    pub batch_size: usize,
}

/// Sampled posterior rollout of one instance, kept for the backward pass.
struct Rollout {
    answer: EntityId,
    topic: TopicForward,
    post_scope: Arc<Scope>,
    post: PosteriorForward,
    /// (index into Q's support, sample count, answer scope, forward, position of `answer`)
    candidates: Vec<(usize, usize, Arc<Scope>, AnswerForward, usize)>,
    /// Raw signal per sample, grouped by candidate (count copies each).
    signals: Vec<f64>,
    entropy: f64,
    sampled_loglik: f64,
}

pub struct Trainer<'a> {
    env: Env<'a>,
    cfg: TrainConfig,
    pool: rayon::ThreadPool,
}

fn sum_gradients(grads: Vec<GradientSet>) -> Option<GradientSet> {
    let mut it = grads.into_iter();
    let mut total = it.next()?;
    for g in it {
        total.add_scaled(1.0, &g);
    }
    Some(total)
}

impl<'a> Trainer<'a> {
    pub fn new(env: Env<'a>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if env.hops() != cfg.hops {
            return Err(VrnError::Config(format!("scope cache built for {} hops, config asks {}", env.hops(), cfg.hops)));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.max(1))
            .build()
            .map_err(|e| VrnError::Config(format!("thread pool: {e}")))?;
        Ok(Self { env, cfg, pool })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn env(&self) -> &Env<'a> {
        &self.env
    }

    /// Fresh parameters, baseline and signal state from the config seed.
    pub fn init_state(&self, model: &crate::model::ModelConfig, vocab_size: usize) -> TrainState {
        let shapes = crate::model::Shapes {
            dim: model.dim,
            num_entities: self.env.graph.num_entities(),
            num_relations: self.env.graph.num_relations(),
            vocab_size,
            directional_relations: model.directional_relations,
        };
        let mut init = rng::substream(self.cfg.seed, rng::stream::INIT);
        let params = Params::init(shapes, model.weight_mode, model.share_posterior, model.init_scale, &mut init);
        let mut brng = rng::substream(self.cfg.seed, rng::stream::BASELINE);
        let baseline = BaselineNet::init(
            shapes.num_entities,
            vocab_size,
            self.cfg.baseline_hidden,
            crate::model::INIT_SCALE,
            &mut brng,
        );
        TrainState { params, baseline, signal: LearningSignalState::new(self.cfg.decay), step: 0 }
    }

    fn pick_answer(item: &TrainItem, rng: &mut impl Rng) -> EntityId {
        item.answers[rng.gen_range(0..item.answers.len())]
    }

    /// Gradient of `log P(y|q) + log P(a|y,q) + log Q(y|q,a)` for a labeled item.
    fn supervised_gradient(&self, params: &Params, item: &TrainItem, topic: EntityId, answer: EntityId) -> Result<GradientSet> {
        let q = &item.question;
        let mut grad = params.zeros_like();
        let tf = topic_forward(&params.recognition, self.env.names, q)?;
        let dl = one_hot_dlogits(&tf.dist, topic.0);
        topic_backward(&params.recognition, self.env.names, q, &tf, &dl, &mut grad.recognition);

        let yscope = self.env.scope(topic)?;
        if let Some(pos) = yscope.position(answer) {
            let af = answer_forward(&params.shapes, &params.reasoning, q, &yscope)?;
            let dl = one_hot_dlogits(&af.dist, pos);
            answer_backward(&params.shapes, &params.reasoning, q, &yscope, &af, &dl, &mut grad.reasoning);

            let ascope = self.env.scope(answer)?;
            let ypos = ascope.position(topic).expect("scope symmetry");
            let pf = posterior_forward(params, self.env.names, q, &ascope)?;
            let dl = one_hot_dlogits(&pf.dist, ypos);
            posterior_backward(params, self.env.names, q, &ascope, &pf, &dl, &mut grad);
        }
        Ok(grad)
    }

    /// Supervised initialization on items that carry a topic label.
    pub fn pretrain(&self, params: &mut Params, items: &[TrainItem]) -> Result<()> {
        let labeled: Vec<&TrainItem> = items.iter().filter(|it| it.topic.is_some()).collect();
        if labeled.is_empty() {
            return Err(VrnError::Config("pretraining needs at least one labeled item".into()));
        }
        for it in &labeled {
            let y = it.topic.unwrap();
            if !self.env.graph.contains_entity(y) {
                return Err(VrnError::UnknownEntity(y.0));
            }
            if it.answers.is_empty() {
                return Err(VrnError::Config("item without answers".into()));
            }
        }
        let n = labeled.len();
        let lr = self.cfg.pretrain_learning_rate.unwrap_or(self.cfg.learning_rate);
        for epoch in 0..self.cfg.pretrain_epochs {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::child(self.cfg.seed, "pretrain-order", epoch as u64));
            for chunk in order.chunks(self.cfg.batch_size) {
                let p: &Params = params;
                let grads = self.pool.install(|| {
                    chunk
                        .par_iter()
                        .map(|&i| {
                            let mut r = rng::child(self.cfg.seed, "pretrain-answer", (epoch * n + i) as u64);
                            let item = labeled[i];
                            let a = Self::pick_answer(item, &mut r);
                            self.supervised_gradient(p, item, item.topic.unwrap(), a)
                        })
                        .collect::<Result<Vec<_>>>()
                })?;
                let total = sum_gradients(grads).expect("nonempty chunk");
                total.check_finite()?;
                params.add_scaled(lr / chunk.len() as f64, &total);
            }
        }
        Ok(())
    }

    fn rollout(&self, params: &Params, item: &TrainItem, rng: &mut impl Rng) -> Result<Rollout> {
        let q = &item.question;
        let answer = Self::pick_answer(item, rng);
        let post_scope = self.env.scope(answer)?;
        let post = posterior_forward(params, self.env.names, q, &post_scope)?;
        let sampler = WeightedIndex::new(&post.dist.probs)
            .map_err(|e| VrnError::NonFinite { block: "posterior".into(), detail: e.to_string() })?;
        let mut counts = vec![0usize; post.dist.len()];
        for _ in 0..self.cfg.samples {
            counts[sampler.sample(rng)] += 1;
        }
        let topic = topic_forward(&params.recognition, self.env.names, q)?;
        let m = self.cfg.samples as f64;
        let mut candidates = Vec::new();
        let mut signals = Vec::with_capacity(self.cfg.samples);
        let mut sampled_loglik = 0.0;
        for (idx, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let y = post.dist.support[idx];
            let yscope = self.env.scope(y)?;
            let pos = yscope.position(answer).expect("scope symmetry");
            let af = answer_forward(&params.shapes, &params.reasoning, q, &yscope)?;
            let joint = topic.dist.log_probs[y.0] + af.dist.log_probs[pos];
            let a_value = joint - post.dist.log_probs[idx];
            if !a_value.is_finite() {
                return Err(VrnError::NonFinite {
                    block: "learning signal".into(),
                    detail: format!("question {:?}, answer {}, topic {}", item.question, answer.0, y.0),
                });
            }
            sampled_loglik += c as f64 / m * joint;
            signals.extend(std::iter::repeat_n(a_value, c));
            candidates.push((idx, c, yscope, af, pos));
        }
        let entropy = -post
            .dist
            .probs
            .iter()
            .zip(&post.dist.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * l)
            .sum::<f64>();
        Ok(Rollout { answer, topic, post_scope, post, candidates, signals, entropy, sampled_loglik })
    }

    fn rollout_gradient(&self, params: &Params, item: &TrainItem, ro: &Rollout, centered: &[f64], base: f64) -> GradientSet {
        let q = &item.question;
        let m = self.cfg.samples as f64;
        let mut grad = params.zeros_like();

        // posterior: (1/M) sum_j grad log Q(y_j) (A~_j - b)
        let mut wq = vec![0.0; ro.post.dist.len()];
        let mut topic_w = vec![0.0; ro.topic.dist.len()];
        let mut offset = 0;
        for (idx, c, ..) in &ro.candidates {
            for s in &centered[offset..offset + c] {
                wq[*idx] += (s - base) / m;
            }
            offset += c;
            topic_w[ro.post.dist.support[*idx].0] += *c as f64 / m;
        }
        let dl = log_prob_dlogits(&ro.post.dist, &wq);
        posterior_backward(params, self.env.names, q, &ro.post_scope, &ro.post, &dl, &mut grad);

        // recognizer and reasoner: plain gradients at the sampled topics
        let dl = log_prob_dlogits(&ro.topic.dist, &topic_w);
        topic_backward(&params.recognition, self.env.names, q, &ro.topic, &dl, &mut grad.recognition);
        for (_, c, yscope, af, pos) in &ro.candidates {
            let mut dl = one_hot_dlogits(&af.dist, *pos);
            let w = *c as f64 / m;
            dl.iter_mut().for_each(|x| *x *= w);
            answer_backward(&params.shapes, &params.reasoning, q, yscope, af, &dl, &mut grad.reasoning);
        }
        grad
    }

    /// One variational step on a batch of (question, answers) items.
    pub fn reinforce_step(&self, state: &mut TrainState, batch: &[&TrainItem]) -> Result<StepDiagnostics> {
        if batch.is_empty() {
            return Err(VrnError::EmptyDataset);
        }
        let step = state.step;
        let params = &state.params;
        let rollouts = self.pool.install(|| {
            batch
                .par_iter()
                .enumerate()
                .map(|(i, item)| {
                    let mut r = rng::child(self.cfg.seed, rng::stream::SAMPLING, step * 1_000_003 + i as u64);
                    self.rollout(params, item, &mut r)
                })
                .collect::<Result<Vec<_>>>()
        })?;

        // barrier: signal statistics and baseline
        let raw: Vec<f64> = rollouts.iter().flat_map(|r| r.signals.iter().copied()).collect();
        let mean_signal = raw.iter().sum::<f64>() / raw.len() as f64;
        let normalized = normalize_signal(&mut state.signal, &raw);
        let mut baselines = Vec::with_capacity(batch.len());
        let mut baseline_loss = 0.0;
        let per = self.cfg.samples;
        for (i, (item, ro)) in batch.iter().zip(&rollouts).enumerate() {
            let chunk = &normalized[i * per..(i + 1) * per];
            let target = chunk.iter().sum::<f64>() / per as f64;
            let pred = state.baseline.step(&item.question, ro.answer, target, self.cfg.baseline_learning_rate);
            baseline_loss += (pred - target).powi(2);
            baselines.push(pred);
        }
        baseline_loss /= batch.len() as f64;

        let params = &state.params;
        let grads = self.pool.install(|| {
            batch
                .par_iter()
                .zip(rollouts.par_iter())
                .enumerate()
                .map(|(i, (item, ro))| {
                    self.rollout_gradient(params, item, ro, &normalized[i * per..(i + 1) * per], baselines[i])
                })
                .collect::<Vec<_>>()
        });
        let total = sum_gradients(grads).expect("nonempty batch");
        if let Err(e) = total.check_finite() {
            return Err(VrnError::NonFinite {
                block: "gradient".into(),
                detail: format!("step {step}: {e}; batch questions {:?}", batch.iter().map(|b| &b.question).collect::<Vec<_>>()),
            });
        }
        state.params.add_scaled(self.cfg.learning_rate / batch.len() as f64, &total);
        state.step += 1;

        let elbo_estimate =
            rollouts.iter().map(|r| r.sampled_loglik + r.entropy).sum::<f64>() / rollouts.len() as f64;
        Ok(StepDiagnostics {
            step: state.step,
            mean_signal,
            elbo_estimate,
            baseline_loss,
            total_loss: -elbo_estimate + baseline_loss,
            batch_size: batch.len(),
        })
    }

    /// Joint training over `items` for the configured epochs. `on_step` sees
    /// the state after every update.
    pub fn train(
        &self,
        state: &mut TrainState,
        items: &[TrainItem],
        mut on_step: impl FnMut(&TrainState, &StepDiagnostics) -> Result<()>,
    ) -> Result<()> {
        let usable: Vec<&TrainItem> = items.iter().filter(|it| !it.answers.is_empty()).collect();
        if usable.is_empty() {
            return Err(VrnError::EmptyDataset);
        }
        for epoch in 0..self.cfg.epochs {
            let mut order: Vec<usize> = (0..usable.len()).collect();
            order.shuffle(&mut rng::child(self.cfg.seed, "train-order", epoch as u64));
            for chunk in order.chunks(self.cfg.batch_size) {
                if self.cfg.max_steps.is_some_and(|m| state.step >= m) {
                    return Ok(());
                }
                let batch: Vec<&TrainItem> = chunk.iter().map(|&i| usable[i]).collect();
                let diag = self.reinforce_step(state, &batch)?;
                on_step(state, &diag)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::KGGenConfig;
    use crate::model::{EntityNames, ModelConfig};
    use crate::pipeline::{build_dataset, encode, standard_vocab, DatasetConfig};
    use crate::scope::ScopeCache;

    fn small() -> crate::pipeline::Dataset {
        let kg = KGGenConfig { movies: 12, actors: 10, directors: 5, writers: 5, genres: 4, languages: 3, years: 5, ..Default::default() };
        build_dataset(&DatasetConfig { kg, questions: 120, label_fraction: 0.3, ..Default::default() }).unwrap()
    }

    fn run(d: &crate::pipeline::Dataset, cfg: TrainConfig, zero_steps: bool) -> (TrainState, TrainState) {
        let vocab = standard_vocab(&d.graph);
        let names = EntityNames::new(&d.graph, &vocab);
        let cache = ScopeCache::new(cfg.hops);
        let items = encode(&d.split.train, &vocab);
        let mut trainer = Trainer::new(Env::new(&d.graph, &names, &cache), cfg).unwrap();
        if zero_steps {
            // bypasses validation, which rejects a zero step size
            trainer.cfg.learning_rate = 0.0;
            trainer.cfg.pretrain_learning_rate = Some(0.0);
            trainer.cfg.baseline_learning_rate = 0.0;
        }
        let init = trainer.init_state(&ModelConfig { dim: 8, ..Default::default() }, vocab.len());
        let mut state = init.clone();
        trainer.pretrain(&mut state.params, &items).unwrap();
        trainer.train(&mut state, &items, |_, _| Ok(())).unwrap();
        (init, state)
    }

    #[test]
    fn zero_step_size_leaves_parameters() {
        let cfg = TrainConfig { epochs: 2, pretrain_epochs: 2, ..Default::default() };
        let (init, state) = run(&small(), cfg, true);
        assert_eq!(init.params, state.params);
        assert_eq!(init.baseline, state.baseline);
        assert!(state.step > 0);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let d = small();
        let cfg = TrainConfig { epochs: 1, pretrain_epochs: 1, learning_rate: 0.5, ..Default::default() };
        let (_, one) = run(&d, TrainConfig { workers: 1, ..cfg.clone() }, false);
        let (_, three) = run(&d, TrainConfig { workers: 3, ..cfg }, false);
        assert_eq!(one, three);
    }
}
