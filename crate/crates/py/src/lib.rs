//! Python bindings: dataset generation, training, evaluation and inference.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vrn_core::checkpoint;
use vrn_core::eval::{entity_accuracy, hits_at_1, supervised_embedding, SupervisedConfig};
use vrn_core::infer::{answer, inspect_path, InferenceConfig};
use vrn_core::kg::tokenize;
use vrn_core::model::EntityNames;
use vrn_core::pipeline::{build_dataset, encode, probe_items, standard_vocab, DatasetConfig};
use vrn_core::train::{TrainConfig, TrainItem, TrainState, Trainer};
use vrn_core::{compute_scope, oracle, Env, KnowledgeGraph, ModelConfig, ScopeCache, VrnError, Vocabulary};

fn err(e: VrnError) -> PyErr {
    match e {
        VrnError::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

struct Core {
    graph: KnowledgeGraph,
    vocab: Vocabulary,
    names: EntityNames,
    split: vrn_core::datagen::DatasetSplit,
    hops: usize,
    seed: u64,
}

impl Core {
    fn split(&self, name: &str) -> PyResult<&[vrn_core::datagen::QAItem]> {
        match name {
            "train" => Ok(&self.split.train),
            "valid" => Ok(&self.split.valid),
            "test" => Ok(&self.split.test),
            other => Err(PyValueError::new_err(format!("unknown split `{other}`"))),
        }
    }

    fn encoded(&self, name: &str) -> PyResult<Vec<TrainItem>> {
        Ok(encode(self.split(name)?, &self.vocab))
    }
}

/// Generated graph plus train/valid/test question splits.
#[pyclass(frozen)]
struct Dataset {
    core: Arc<Core>,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (hops=1, questions=2500, label_fraction=0.05, seed=0))]
    fn new(hops: usize, questions: usize, label_fraction: f64, seed: u64) -> PyResult<Self> {
        let mut cfg = DatasetConfig { hops, questions, label_fraction, seed, ..Default::default() };
        cfg.kg.seed = seed;
        let d = build_dataset(&cfg).map_err(err)?;
        let vocab = standard_vocab(&d.graph);
        let names = EntityNames::new(&d.graph, &vocab);
        Ok(Self { core: Arc::new(Core { graph: d.graph, vocab, names, split: d.split, hops, seed }) })
    }

    #[getter]
    fn hops(&self) -> usize {
        self.core.hops
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.core.graph.num_entities()
    }

    #[getter]
    fn num_triples(&self) -> usize {
        self.core.graph.num_triples()
    }

    /// `(train, valid, test)` question counts.
    #[getter]
    fn split_sizes(&self) -> (usize, usize, usize) {
        let s = &self.core.split;
        (s.train.len(), s.valid.len(), s.test.len())
    }

    /// `(question, answers, question type)` triples of one split.
    fn questions(&self, split: &str) -> PyResult<Vec<(String, Vec<String>, String)>> {
        let g = &self.core.graph;
        Ok(self
            .core
            .split(split)?
            .iter()
            .map(|it| {
                let answers = it.answers.iter().map(|&a| g.entity_name(a).to_owned()).collect();
                (it.text(), answers, it.type_id.clone())
            })
            .collect())
    }

    /// `(hop, entity)` pairs of the scope around `entity`.
    #[pyo3(signature = (entity, hops=None))]
    fn scope(&self, entity: &str, hops: Option<usize>) -> PyResult<Vec<(usize, String)>> {
        let g = &self.core.graph;
        let e = g.entity_by_name(entity).ok_or_else(|| PyValueError::new_err(format!("unknown entity `{entity}`")))?;
        let s = compute_scope(g, e, hops.unwrap_or(self.core.hops)).map_err(err)?;
        Ok(s.nodes().iter().map(|n| (n.hop, g.entity_name(n.entity).to_owned())).collect())
    }

    /// Hits@1 of the supervised-embedding baseline trained on the train split.
    #[pyo3(signature = (split="test", epochs=20))]
    fn supervised_baseline(&self, split: &str, epochs: usize) -> PyResult<f64> {
        let c = &self.core;
        let cfg = SupervisedConfig { epochs, seed: c.seed, ..Default::default() };
        let se = supervised_embedding(&c.encoded("train")?, c.vocab.len(), c.graph.num_entities(), &cfg).map_err(err)?;
        hits_at_1(&c.encoded(split)?, |it| se.predict(&it.question)).map_err(err)
    }
}

/// A model bound to one dataset.
#[pyclass]
struct Model {
    core: Arc<Core>,
    cache: ScopeCache,
    state: TrainState,
    train_cfg: TrainConfig,
}

impl Model {
    fn env(&self) -> Env<'_> {
        Env::new(&self.core.graph, &self.core.names, &self.cache)
    }

    fn trainer(&self, cfg: TrainConfig) -> PyResult<Trainer<'_>> {
        Trainer::new(self.env(), cfg).map_err(err)
    }

    fn encode_question(&self, question: &str) -> PyResult<Vec<usize>> {
        let tokens = tokenize(&question.replace(['[', ']'], " "));
        if tokens.is_empty() {
            return Err(PyValueError::new_err("question has no words"));
        }
        Ok(self.core.vocab.encode(&tokens))
    }

    fn inference(&self, beam: usize) -> InferenceConfig {
        InferenceConfig { beam, hops: self.core.hops, joint_score: false }
    }
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (dataset, dim=64, init_scale=0.6, seed=0, workers=1))]
    fn new(dataset: &Dataset, dim: usize, init_scale: f64, seed: u64, workers: usize) -> PyResult<Self> {
        let core = dataset.core.clone();
        let train_cfg = TrainConfig { hops: core.hops, seed, workers, ..Default::default() };
        let cache = ScopeCache::new(core.hops);
        let model = ModelConfig { dim, init_scale, ..Default::default() };
        let state = {
            let env = Env::new(&core.graph, &core.names, &cache);
            Trainer::new(env, train_cfg.clone()).map_err(err)?.init_state(&model, core.vocab.len())
        };
        Ok(Self { core, cache, state, train_cfg })
    }

    #[getter]
    fn step(&self) -> u64 {
        self.state.step
    }

    /// Supervised training on the labeled training questions.
    #[pyo3(signature = (epochs=30, learning_rate=10.0))]
    fn pretrain(&mut self, epochs: usize, learning_rate: f64) -> PyResult<()> {
        let cfg = TrainConfig { pretrain_epochs: epochs, pretrain_learning_rate: Some(learning_rate), ..self.train_cfg.clone() };
        let items = self.core.encoded("train")?;
        let mut params = self.state.params.clone();
        self.trainer(cfg)?.pretrain(&mut params, &items).map_err(err)?;
        self.state.params = params;
        Ok(())
    }

    /// Joint variational training; returns `(step, total_loss, mean_signal, elbo)` per update.
    #[pyo3(signature = (epochs=48, learning_rate=8.0, samples=8))]
    fn train(&mut self, epochs: usize, learning_rate: f64, samples: usize) -> PyResult<Vec<(u64, f64, f64, f64)>> {
        let cfg = TrainConfig { epochs, learning_rate, samples, ..self.train_cfg.clone() };
        let items = self.core.encoded("train")?;
        let mut state = self.state.clone();
        let mut log = Vec::new();
        self.trainer(cfg)?
            .train(&mut state, &items, |_, d| {
                log.push((d.step, d.total_loss, d.mean_signal, d.elbo_estimate));
                Ok(())
            })
            .map_err(err)?;
        self.state = state;
        Ok(log)
    }

    /// `{"hits_at_1": ..., "entity_accuracy": ...}` on a split.
    #[pyo3(signature = (split="test", beam=1))]
    fn evaluate<'py>(&self, py: Python<'py>, split: &str, beam: usize) -> PyResult<Bound<'py, PyDict>> {
        let items = self.core.encoded(split)?;
        let env = self.env();
        let icfg = self.inference(beam);
        let hits = hits_at_1(&items, |it| answer(&self.state.params, &env, &it.question, &icfg).map(|r| r.answer)).map_err(err)?;
        let probe = probe_items(self.core.split(split)?, &self.core.vocab);
        let out = PyDict::new(py);
        out.set_item("hits_at_1", hits)?;
        if !probe.is_empty() {
            out.set_item("entity_accuracy", entity_accuracy(&self.state.params.recognition, &self.core.names, &probe).map_err(err)?)?;
        }
        Ok(out)
    }

    /// Answers a question: `{"answer", "topic", "score", "candidates"}`, with
    /// one `(topic, log_p_topic, answer, log_p_answer)` tuple per beam entry.
    #[pyo3(signature = (question, beam=1))]
    fn answer<'py>(&self, py: Python<'py>, question: &str, beam: usize) -> PyResult<Bound<'py, PyDict>> {
        let q = self.encode_question(question)?;
        let res = answer(&self.state.params, &self.env(), &q, &self.inference(beam)).map_err(err)?;
        let g = &self.core.graph;
        let out = PyDict::new(py);
        out.set_item("answer", g.entity_name(res.answer))?;
        out.set_item("topic", g.entity_name(res.topic))?;
        out.set_item("score", res.score)?;
        let cands: Vec<(String, f64, String, f64)> = res
            .candidates
            .iter()
            .map(|c| (g.entity_name(c.topic).to_owned(), c.log_topic, g.entity_name(c.best_answer).to_owned(), c.log_answer))
            .collect();
        out.set_item("candidates", cands)?;
        Ok(out)
    }

    /// Reasoning path of the chosen answer, `a -[relation,dir]-> b ...`.
    #[pyo3(signature = (question, beam=1))]
    fn explain(&self, question: &str, beam: usize) -> PyResult<String> {
        let q = self.encode_question(question)?;
        let env = self.env();
        let res = answer(&self.state.params, &env, &q, &self.inference(beam)).map_err(err)?;
        let path = inspect_path(&self.state.params, &env, &q, res.topic, res.answer).map_err(err)?;
        let text = path.display(&self.core.graph).to_string();
        Ok(text)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        checkpoint::save(&self.state, path).map_err(err)
    }

    /// Loads a checkpoint written for the same dataset.
    #[staticmethod]
    #[pyo3(signature = (path, dataset, seed=0, workers=1))]
    fn load(path: &str, dataset: &Dataset, seed: u64, workers: usize) -> PyResult<Self> {
        let state = checkpoint::load(path).map_err(err)?;
        let core = dataset.core.clone();
        let s = state.params.shapes;
        if s.num_entities != core.graph.num_entities() || s.vocab_size != core.vocab.len() {
            return Err(PyValueError::new_err("checkpoint does not match the dataset"));
        }
        let train_cfg = TrainConfig { hops: core.hops, seed, workers, ..Default::default() };
        Ok(Self { cache: ScopeCache::new(core.hops), core, state, train_cfg })
    }
}

/// Runs every reference-oracle suite: `(name, passed, detail)` per suite.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn oracle_check(seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    Ok(oracle::run_all(seed).map_err(err)?.into_iter().map(|r| (r.name.to_owned(), r.passed, r.detail)).collect())
}

#[pymodule]
fn vrn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    Ok(())
}
