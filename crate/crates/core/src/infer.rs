//! Beam inference over topic entities and reasoning-path inspection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::Env;
use crate::error::{Result, VrnError};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::model::tensor::dot;
use crate::model::{answer_forward, embed_question, forward_propagate, topic_forward, Params};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    /// Number of topic candidates kept.
    pub beam: usize,
    pub hops: usize,
    /// Rank (topic, answer) pairs by `log P(y|q) + log P(a|y,q)` instead of
    /// `log P(a|y,q)` alone.
    pub joint_score: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { beam: 1, hops: 1, joint_score: false }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 {
            return Err(VrnError::Config("beam must be >= 1".into()));
        }
        if self.hops == 0 {
            return Err(VrnError::Config("hops must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub topic: EntityId,
    pub log_topic: f64,
    pub best_answer: EntityId,
    pub log_answer: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnswerResult {
    pub answer: EntityId,
    pub topic: EntityId,
    /// Ranking score of the chosen pair.
    pub score: f64,
    /// One row per beam candidate, in beam order.
    pub candidates: Vec<Candidate>,
}

/// Answers one encoded question.
pub fn answer(params: &Params, env: &Env<'_>, q: &[usize], cfg: &InferenceConfig) -> Result<AnswerResult> {
    cfg.validate()?;
    if env.hops() != cfg.hops {
        return Err(VrnError::Config(format!("scope cache built for {} hops, inference asks {}", env.hops(), cfg.hops)));
    }
    let topic = topic_forward(&params.recognition, env.names, q)?;
    let mut candidates = Vec::with_capacity(cfg.beam);
    for idx in topic.dist.top_k(cfg.beam) {
        let y = topic.dist.support[idx];
        let scope = env.scope(y)?;
        let ans = answer_forward(&params.shapes, &params.reasoning, q, &scope)?;
        let best = ans.dist.argmax();
        candidates.push(Candidate {
            topic: y,
            log_topic: topic.dist.log_probs[idx],
            best_answer: ans.dist.support[best],
            log_answer: ans.dist.log_probs[best],
        });
    }
    let score = |c: &Candidate| if cfg.joint_score { c.log_topic + c.log_answer } else { c.log_answer };
    let best = candidates
        .iter()
        .copied()
        .max_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then(a.log_topic.total_cmp(&b.log_topic))
                .then(b.topic.cmp(&a.topic))
        })
        .expect("beam >= 1");
    Ok(AnswerResult { answer: best.best_answer, topic: best.topic, score: score(&best), candidates })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathEdge {
    pub from: EntityId,
    pub relation: RelationId,
    /// Direction of the step relative to the stored triple.
    pub direction: Direction,
    pub to: EntityId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReasonPath {
    /// From the topic entity to the answer.
    pub edges: Vec<PathEdge>,
}

impl ReasonPath {
    pub fn display<'a>(&'a self, g: &'a KnowledgeGraph) -> impl fmt::Display + 'a {
        DisplayPath { path: self, g }
    }
}

struct DisplayPath<'a> {
    path: &'a ReasonPath,
    g: &'a KnowledgeGraph,
}

impl fmt::Display for DisplayPath<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.g;
        match self.path.edges.first() {
            Some(e) => write!(f, "{}", g.entity_name(e.from))?,
            None => return Ok(()),
        }
        for e in &self.path.edges {
            write!(f, " -[{},{}]-> {}", g.relation_name(e.relation), e.direction.as_str(), g.entity_name(e.to))?;
        }
        Ok(())
    }
}

/// Walks from the answer back to the topic entity, taking at every node the
/// parent edge whose message best matches the question.
pub fn inspect_path(params: &Params, env: &Env<'_>, q: &[usize], topic: EntityId, answer: EntityId) -> Result<ReasonPath> {
    let scope = env.scope(topic)?;
    let mut node = scope.position(answer).ok_or(VrnError::NotInScope(answer.0))?;
    let f_qt = embed_question(&params.reasoning.qt_tokens, q)?;
    let emb = forward_propagate(&params.shapes, &params.reasoning, &scope)?;
    let mut edges = Vec::new();
    while scope.nodes()[node].hop > 0 {
        let n = &scope.nodes()[node];
        let (k, _) = n
            .parents
            .iter()
            .enumerate()
            .map(|(k, pe)| (k, dot(&f_qt, emb.slot_msg(emb.edge_slots[node][k])), scope.nodes()[pe.node].entity))
            .fold(None::<(usize, (f64, EntityId))>, |best, (k, s, e)| match best {
                Some((_, (bs, be))) if bs > s || (bs == s && be <= e) => best,
                _ => Some((k, (s, e))),
            })
            .expect("non-source nodes have parents");
        let pe = n.parents[k];
        edges.push(PathEdge {
            from: scope.nodes()[pe.node].entity,
            relation: pe.relation,
            direction: pe.direction,
            to: n.entity,
        });
        node = pe.node;
    }
    edges.reverse();
    Ok(ReasonPath { edges })
}

/// Checks that a path chains from `topic` to `answer` over stored triples
/// within `hops` steps.
pub fn path_is_valid(g: &KnowledgeGraph, path: &ReasonPath, topic: EntityId, answer: EntityId, hops: usize) -> bool {
    if path.edges.len() > hops {
        return false;
    }
    let mut at = topic;
    for e in &path.edges {
        if e.from != at {
            return false;
        }
        let t = match e.direction {
            Direction::Forward => Triple { subject: e.from, relation: e.relation, object: e.to },
            Direction::Backward => Triple { subject: e.to, relation: e.relation, object: e.from },
        };
        if !g.has_triple(&t) {
            return false;
        }
        at = e.to;
    }
    at == answer
}
