//! Analytic gradients of the log-likelihood terms.
//!
//! Every routine accumulates into a [`GradientSet`] (shaped like [`Params`])
//! the gradient of an objective that is *maximized*. Objectives are written
//! in terms of the upstream gradient on the softmax logits, so weighted sums
//! of log-probabilities share one backward pass.

use std::collections::BTreeMap;

use super::kernels::{
    answer_forward, posterior_forward, topic_forward, AnswerForward, Distribution, NodeEmbeddings,
    PosteriorForward, TopicForward,
};
use super::params::{EntityNames, EntityWeights, GradientSet, Params, RecognitionParams, ReasoningParams, Shapes};
use super::tensor::{axpy, Matrix};
use crate::error::{Result, VrnError};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::scope::{compute_scope, Scope};

/// Logit gradient of `sum_i w_i log p_i` for a softmax distribution.
pub fn log_prob_dlogits(dist: &Distribution, weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().zip(&dist.probs).map(|(w, p)| w - total * p).collect()
}

/// Logit gradient of `log p[index]`.
pub fn one_hot_dlogits(dist: &Distribution, index: usize) -> Vec<f64> {
    let mut w = vec![0.0; dist.len()];
    w[index] = 1.0;
    log_prob_dlogits(dist, &w)
}

/// Pushes the gradient of a mean bag-of-words embedding onto its table rows.
pub fn embed_question_backward(table_grad: &mut Matrix, q: &[usize], grad_f: &[f64]) {
    let w = 1.0 / q.len() as f64;
    for &t in q {
        axpy(w, grad_f, table_grad.row_mut(t));
    }
}

/// Backprop through `logit_e = W_e . f` for the listed entities.
/// Returns the gradient with respect to `f`.
fn recognition_weights_backward(
    rec: &RecognitionParams,
    names: &EntityNames,
    f: &[f64],
    entities: &[EntityId],
    dlogits: &[f64],
    grad: &mut RecognitionParams,
) -> Vec<f64> {
    let mut grad_f = vec![0.0; f.len()];
    match (&rec.weights, &mut grad.weights) {
        (EntityWeights::NameBow(table), EntityWeights::NameBow(gtable)) => {
            let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
            for (e, &c) in entities.iter().zip(dlogits) {
                if c == 0.0 {
                    continue;
                }
                let toks = names.get(e.0);
                let w = c / toks.len() as f64;
                for &t in toks {
                    *coef.entry(t).or_insert(0.0) += w;
                }
            }
            for (&t, &c) in &coef {
                axpy(c, table.row(t), &mut grad_f);
                axpy(c, f, gtable.row_mut(t));
            }
        }
        (EntityWeights::Free(table), EntityWeights::Free(gtable)) => {
            for (e, &c) in entities.iter().zip(dlogits) {
                if c == 0.0 {
                    continue;
                }
                axpy(c, table.row(e.0), &mut grad_f);
                axpy(c, f, gtable.row_mut(e.0));
            }
        }
        _ => unreachable!("gradient set mode differs from parameter mode"),
    }
    grad_f
}

/// Backprop of the recognition softmax over all entities.
pub fn topic_backward(
    rec: &RecognitionParams,
    names: &EntityNames,
    q: &[usize],
    fwd: &TopicForward,
    dlogits: &[f64],
    grad: &mut RecognitionParams,
) {
    let grad_f = recognition_weights_backward(rec, names, &fwd.f_ent, &fwd.dist.support, dlogits, grad);
    embed_question_backward(&mut grad.ent_tokens, q, &grad_f);
}

/// Reverse pass of [`super::kernels::forward_propagate`].
///
/// `upstream` holds dObjective/dg for every node (row-major, n x d) and is
/// consumed. Gradients with respect to `V` are accumulated into `grad_v`.
pub fn propagate_backward(
    shapes: &Shapes,
    reas: &ReasoningParams,
    scope: &Scope,
    emb: &NodeEmbeddings,
    mut upstream: Vec<f64>,
    grad_v: &mut Matrix,
) {
    let d = shapes.dim;
    let v = &reas.propagation;
    let nslots = emb.slot_parent.len();
    let mut dslot = vec![0.0; nslots * d];
    let mut dz = vec![0.0; d];
    for i in (0..scope.len()).rev() {
        let hop = scope.nodes()[i].hop;
        for &s in &emb.owned_slots[i] {
            let pre = emb.slot_pre(s);
            let mut any = false;
            for k in 0..d {
                dz[k] = if pre[k] > 0.0 { dslot[s * d + k] } else { 0.0 };
                any |= dz[k] != 0.0;
            }
            if !any {
                continue;
            }
            let col = d + emb.slot_feature[s];
            let g_parent = emb.node(i);
            for (k, &dzk) in dz.iter().enumerate() {
                if dzk == 0.0 {
                    continue;
                }
                let row = grad_v.row_mut(k);
                row[col] += dzk;
                if hop > 0 {
                    axpy(dzk, g_parent, &mut row[..d]);
                }
            }
            if hop > 0 {
                v.matvec_t_prefix_add(&dz, &mut upstream[i * d..(i + 1) * d]);
            }
        }
        let slots = &emb.edge_slots[i];
        if slots.is_empty() {
            continue;
        }
        let gi = &upstream[i * d..(i + 1) * d];
        if gi.iter().all(|&x| x == 0.0) {
            continue;
        }
        let inv = 1.0 / slots.len() as f64;
        let gi = gi.to_vec();
        for &s in slots {
            axpy(inv, &gi, &mut dslot[s * d..(s + 1) * d]);
        }
    }
}

/// Backprop of the answer softmax over one scope.
pub fn answer_backward(
    shapes: &Shapes,
    reas: &ReasoningParams,
    q: &[usize],
    scope: &Scope,
    fwd: &AnswerForward,
    dlogits: &[f64],
    grad: &mut ReasoningParams,
) {
    let d = shapes.dim;
    let mut grad_fqt = vec![0.0; d];
    let mut upstream = vec![0.0; scope.len() * d];
    for (i, &c) in dlogits.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        axpy(c, fwd.emb.node(i), &mut grad_fqt);
        axpy(c, &fwd.f_qt, &mut upstream[i * d..(i + 1) * d]);
    }
    embed_question_backward(&mut grad.qt_tokens, q, &grad_fqt);
    propagate_backward(shapes, reas, scope, &fwd.emb, upstream, &mut grad.propagation);
}

/// Backprop of the variational posterior over the answer's scope.
pub fn posterior_backward(
    params: &Params,
    names: &EntityNames,
    q: &[usize],
    scope: &Scope,
    fwd: &PosteriorForward,
    dlogits: &[f64],
    grad: &mut GradientSet,
) {
    let shapes = params.shapes;
    let d = shapes.dim;
    let (rec, reas) = params.posterior_parts();
    let (grec, greas) = grad.posterior_parts_mut();
    let grad_fent = recognition_weights_backward(rec, names, &fwd.f_ent, &fwd.dist.support, dlogits, grec);
    embed_question_backward(&mut grec.ent_tokens, q, &grad_fent);
    let mut grad_fqt = vec![0.0; d];
    let mut upstream = vec![0.0; scope.len() * d];
    for (i, &c) in dlogits.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        axpy(c, fwd.emb.node(i), &mut grad_fqt);
        axpy(c, &fwd.f_qt, &mut upstream[i * d..(i + 1) * d]);
    }
    embed_question_backward(&mut greas.qt_tokens, q, &grad_fqt);
    propagate_backward(&shapes, reas, scope, &fwd.emb, upstream, &mut greas.propagation);
}

/// A scalar log-likelihood term whose gradient can be requested.
#[derive(Clone, Debug)]
pub enum LossSpec<'a> {
    /// `log P(y | q)`
    Topic { question: &'a [usize], topic: EntityId },
    /// `log P(a | y, q)`
    Answer { question: &'a [usize], topic: EntityId, answer: EntityId, hops: usize },
    /// `log Q(y | q, a)`
    Posterior { question: &'a [usize], answer: EntityId, topic: EntityId, hops: usize },
}

/// Value and exact gradient of one log-likelihood term.
pub fn gradients(params: &Params, names: &EntityNames, g: &KnowledgeGraph, spec: &LossSpec<'_>) -> Result<(f64, GradientSet)> {
    let mut grad = params.zeros_like();
    let value = match *spec {
        LossSpec::Topic { question, topic } => {
            let fwd = topic_forward(&params.recognition, names, question)?;
            let dl = one_hot_dlogits(&fwd.dist, topic.0);
            topic_backward(&params.recognition, names, question, &fwd, &dl, &mut grad.recognition);
            fwd.dist.log_probs[topic.0]
        }
        LossSpec::Answer { question, topic, answer, hops } => {
            let scope = compute_scope(g, topic, hops)?;
            let pos = scope.position(answer).ok_or(VrnError::NotInScope(answer.0))?;
            let fwd = answer_forward(&params.shapes, &params.reasoning, question, &scope)?;
            let dl = one_hot_dlogits(&fwd.dist, pos);
            answer_backward(&params.shapes, &params.reasoning, question, &scope, &fwd, &dl, &mut grad.reasoning);
            fwd.dist.log_probs[pos]
        }
        LossSpec::Posterior { question, answer, topic, hops } => {
            let scope = compute_scope(g, answer, hops)?;
            let pos = scope.position(topic).ok_or(VrnError::NotInScope(topic.0))?;
            let fwd = posterior_forward(params, names, question, &scope)?;
            let dl = one_hot_dlogits(&fwd.dist, pos);
            posterior_backward(params, names, question, &scope, &fwd, &dl, &mut grad);
            fwd.dist.log_probs[pos]
        }
    };
    grad.check_finite()?;
    Ok((value, grad))
}
