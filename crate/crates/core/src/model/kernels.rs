//! Forward computations: question embedding, topic-entity recognition,
//! reasoning-graph propagation, answer likelihood and variational posterior.

use std::collections::HashMap;

use super::params::{EntityNames, EntityWeights, Params, RecognitionParams, ReasoningParams, Shapes};
use super::tensor::{axpy, dot, log_softmax, EmbeddingTable, Matrix};
use crate::error::{Result, VrnError};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::scope::{compute_scope, Scope};

/// Discrete distribution over a list of entities.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub support: Vec<EntityId>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl Distribution {
    pub fn from_logits(support: Vec<EntityId>, logits: &[f64]) -> Self {
        debug_assert_eq!(support.len(), logits.len());
        let (probs, log_probs) = log_softmax(logits);
        Self { support, probs, log_probs }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn position(&self, e: EntityId) -> Option<usize> {
        self.support.iter().position(|&s| s == e)
    }

    /// Log-probability of `e`, `-inf` outside the support.
    pub fn log_prob(&self, e: EntityId) -> f64 {
        self.position(e).map_or(f64::NEG_INFINITY, |i| self.log_probs[i])
    }

    /// Index of the most probable entry; ties go to the earlier entry.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.log_probs[i] > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Indices of the `k` most probable entries, ties broken by lower entity id.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.log_probs[b]
                .total_cmp(&self.log_probs[a])
                .then(self.support[a].cmp(&self.support[b]))
        });
        idx.truncate(k);
        idx
    }
}

/// Mean of the embedding rows of the question's tokens.
pub fn embed_question(table: &EmbeddingTable, q: &[usize]) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(VrnError::EmptyTokens);
    }
    let mut out = vec![0.0; table.cols()];
    let w = 1.0 / q.len() as f64;
    for &t in q {
        axpy(w, table.row(t), &mut out);
    }
    Ok(out)
}

/// Classification weight `W_y` of one entity.
pub fn entity_weight(rec: &RecognitionParams, names: &EntityNames, y: EntityId) -> Result<Vec<f64>> {
    match &rec.weights {
        EntityWeights::NameBow(table) => {
            embed_question(table, names.get(y.0)).map_err(|_| VrnError::EmptyName(y.0))
        }
        EntityWeights::Free(table) => Ok(table.row(y.0).to_vec()),
    }
}

/// `W_y . f` for each entity in `entities`.
pub(crate) fn recognition_logits(
    rec: &RecognitionParams,
    names: &EntityNames,
    f: &[f64],
    entities: impl Iterator<Item = EntityId>,
) -> Vec<f64> {
    match &rec.weights {
        EntityWeights::NameBow(table) => {
            let mut cache: HashMap<usize, f64> = HashMap::new();
            entities
                .map(|e| {
                    let toks = names.get(e.0);
                    let sum: f64 = toks
                        .iter()
                        .map(|&t| *cache.entry(t).or_insert_with(|| dot(table.row(t), f)))
                        .sum();
                    sum / toks.len() as f64
                })
                .collect()
        }
        EntityWeights::Free(table) => entities.map(|e| dot(table.row(e.0), f)).collect(),
    }
}

/// Recognition forward pass with the question embedding kept for backprop.
#[derive(Clone, Debug)]
pub struct TopicForward {
    pub f_ent: Vec<f64>,
    pub dist: Distribution,
}

/// `P(y | q)`: softmax over every entity of the graph.
pub fn topic_forward(rec: &RecognitionParams, names: &EntityNames, q: &[usize]) -> Result<TopicForward> {
    let f_ent = embed_question(&rec.ent_tokens, q)?;
    let n = names.len();
    let logits = recognition_logits(rec, names, &f_ent, (0..n).map(EntityId));
    Ok(TopicForward { f_ent, dist: Distribution::from_logits((0..n).map(EntityId).collect(), &logits) })
}

pub fn topic_distribution(rec: &RecognitionParams, names: &EntityNames, q: &[usize]) -> Result<Distribution> {
    topic_forward(rec, names, q).map(|f| f.dist)
}

/// Counters filled during propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub nodes_visited: usize,
    pub edges_visited: usize,
    /// Distinct (parent, relation feature) messages computed.
    pub messages: usize,
}

/// Reasoning-graph embeddings for every node of a scope, plus the
/// intermediate messages needed for backprop.
///
/// A message depends only on the parent node and the relation feature, so
/// all children reached from one parent through the same relation share it.
#[derive(Clone, Debug)]
pub struct NodeEmbeddings {
    dim: usize,
    values: Vec<f64>,
    pub(crate) slot_parent: Vec<usize>,
    pub(crate) slot_feature: Vec<usize>,
    pub(crate) slot_pre: Vec<f64>,
    pub(crate) slot_msg: Vec<f64>,
    /// Per node, the slot used by each parent edge (aligned with `parents`).
    pub(crate) edge_slots: Vec<Vec<usize>>,
    /// Per node, the slots for which it is the parent.
    pub(crate) owned_slots: Vec<Vec<usize>>,
    pub stats: PropagationStats,
}

impl NodeEmbeddings {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Embedding of the node at scope position `i`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn slot_pre(&self, s: usize) -> &[f64] {
        &self.slot_pre[s * self.dim..(s + 1) * self.dim]
    }

    pub(crate) fn slot_msg(&self, s: usize) -> &[f64] {
        &self.slot_msg[s * self.dim..(s + 1) * self.dim]
    }
}

fn check_propagation_shape(shapes: &Shapes, v: &Matrix) -> Result<()> {
    let want = (shapes.dim, shapes.dim + shapes.relation_width());
    if v.shape() != want {
        return Err(VrnError::Shape(format!("propagation matrix is {:?}, expected {:?}", v.shape(), want)));
    }
    Ok(())
}

/// One pass over the scope in hop order:
/// `g(a) = mean over parent edges (p, r) of ReLU(V [g(p); e_r])`, `g(source) = 0`.
pub fn forward_propagate(shapes: &Shapes, reas: &ReasoningParams, scope: &Scope) -> Result<NodeEmbeddings> {
    let v = &reas.propagation;
    check_propagation_shape(shapes, v)?;
    let d = shapes.dim;
    let n = scope.len();
    let mut emb = NodeEmbeddings {
        dim: d,
        values: vec![0.0; n * d],
        slot_parent: Vec::new(),
        slot_feature: Vec::new(),
        slot_pre: Vec::new(),
        slot_msg: Vec::new(),
        edge_slots: Vec::with_capacity(n),
        owned_slots: vec![Vec::new(); n],
        stats: PropagationStats::default(),
    };
    let mut slots: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pre = vec![0.0; d];
    for (i, node) in scope.nodes().iter().enumerate() {
        emb.stats.nodes_visited += 1;
        let mut edge_slots = Vec::with_capacity(node.parents.len());
        if node.parents.is_empty() {
            emb.edge_slots.push(edge_slots);
            continue;
        }
        let mut acc = vec![0.0; d];
        for pe in &node.parents {
            emb.stats.edges_visited += 1;
            let feat = shapes.relation_feature(pe.relation, pe.direction);
            let slot = match slots.get(&(pe.node, feat)) {
                Some(&s) => s,
                None => {
                    let col = d + feat;
                    for (k, p) in pre.iter_mut().enumerate() {
                        *p = v.get(k, col);
                    }
                    if scope.nodes()[pe.node].hop > 0 {
                        v.matvec_prefix_add(emb.node(pe.node), &mut pre);
                    }
                    let s = emb.slot_parent.len();
                    emb.slot_parent.push(pe.node);
                    emb.slot_feature.push(feat);
                    emb.slot_pre.extend_from_slice(&pre);
                    emb.slot_msg.extend(pre.iter().map(|&x| x.max(0.0)));
                    emb.owned_slots[pe.node].push(s);
                    emb.stats.messages += 1;
                    slots.insert((pe.node, feat), s);
                    s
                }
            };
            axpy(1.0, emb.slot_msg(slot), &mut acc);
            edge_slots.push(slot);
        }
        let inv = 1.0 / node.parents.len() as f64;
        for (o, a) in emb.values[i * d..(i + 1) * d].iter_mut().zip(&acc) {
            *o = a * inv;
        }
        emb.edge_slots.push(edge_slots);
    }
    Ok(emb)
}

/// Answer-likelihood forward pass over one scope.
#[derive(Clone, Debug)]
pub struct AnswerForward {
    pub f_qt: Vec<f64>,
    pub emb: NodeEmbeddings,
    pub dist: Distribution,
}

/// `P(a | y, q)`: softmax of `f_qt(q) . g(y -> a)` over the scope of `y`.
pub fn answer_forward(shapes: &Shapes, reas: &ReasoningParams, q: &[usize], scope: &Scope) -> Result<AnswerForward> {
    let f_qt = embed_question(&reas.qt_tokens, q)?;
    let emb = forward_propagate(shapes, reas, scope)?;
    let dist = answer_distribution(&f_qt, scope, &emb);
    Ok(AnswerForward { f_qt, emb, dist })
}

pub fn answer_distribution(f_qt: &[f64], scope: &Scope, emb: &NodeEmbeddings) -> Distribution {
    let logits: Vec<f64> = (0..scope.len()).map(|i| dot(f_qt, emb.node(i))).collect();
    Distribution::from_logits(scope.entities().collect(), &logits)
}

/// Variational-posterior forward pass over the scope of the answer.
#[derive(Clone, Debug)]
pub struct PosteriorForward {
    pub f_ent: Vec<f64>,
    pub f_qt: Vec<f64>,
    pub emb: NodeEmbeddings,
    pub dist: Distribution,
}

/// `Q(y | q, a)`, normalized over the scope of the answer `a`, given that scope.
pub fn posterior_forward(params: &Params, names: &EntityNames, q: &[usize], answer_scope: &Scope) -> Result<PosteriorForward> {
    let (rec, reas) = params.posterior_parts();
    let f_ent = embed_question(&rec.ent_tokens, q)?;
    let f_qt = embed_question(&reas.qt_tokens, q)?;
    let emb = forward_propagate(&params.shapes, reas, answer_scope)?;
    let mut logits = recognition_logits(rec, names, &f_ent, answer_scope.entities());
    for (i, l) in logits.iter_mut().enumerate() {
        *l += dot(&f_qt, emb.node(i));
    }
    let dist = Distribution::from_logits(answer_scope.entities().collect(), &logits);
    Ok(PosteriorForward { f_ent, f_qt, emb, dist })
}

/// `Q(y | q, a)` computed from scratch on `scope(a, hops)`.
pub fn posterior_distribution(
    params: &Params,
    names: &EntityNames,
    q: &[usize],
    answer: EntityId,
    g: &KnowledgeGraph,
    hops: usize,
) -> Result<Distribution> {
    let scope = compute_scope(g, answer, hops)?;
    posterior_forward(params, names, q, &scope).map(|f| f.dist)
}
