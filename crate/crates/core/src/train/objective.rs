//! Learning signal, evidence lower bound and exact marginal likelihood.
//!
//! The answer `a` is reachable from `y` within T hops iff `y` lies in the
//! scope of `a` (undirected distance is symmetric), so every sum over topic
//! entities runs over `scope(a, T)` only; the remaining terms are zero.

use crate::env::Env;
use crate::error::{Result, VrnError};
use crate::kg::EntityId;
use crate::model::tensor::log_sum_exp;
use crate::model::{answer_forward, posterior_forward, topic_forward, Distribution, Params};

/// `log P(y | q)`.
pub fn log_topic(params: &Params, env: &Env<'_>, q: &[usize], y: EntityId) -> Result<f64> {
    Ok(topic_forward(&params.recognition, env.names, q)?.dist.log_probs[y.0])
}

/// `log P(a | y, q)`; `-inf` when `a` is outside the scope of `y`.
pub fn log_answer(params: &Params, env: &Env<'_>, q: &[usize], y: EntityId, a: EntityId) -> Result<f64> {
    let scope = env.scope(y)?;
    let Some(pos) = scope.position(a) else {
        return Ok(f64::NEG_INFINITY);
    };
    Ok(answer_forward(&params.shapes, &params.reasoning, q, &scope)?.dist.log_probs[pos])
}

/// `Q(y | q, a)` over the scope of `a`.
pub fn posterior(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId) -> Result<Distribution> {
    let scope = env.scope(a)?;
    Ok(posterior_forward(params, env.names, q, &scope)?.dist)
}

/// Per-candidate `log P(y|q)` and `log P(a|y,q)` for every `y` in scope(a).
pub struct JointTerms {
    pub support: Vec<EntityId>,
    pub log_topic: Vec<f64>,
    pub log_answer: Vec<f64>,
}

pub fn joint_terms(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId) -> Result<JointTerms> {
    let scope = env.scope(a)?;
    let topic = topic_forward(&params.recognition, env.names, q)?;
    let support: Vec<EntityId> = scope.entities().collect();
    let mut topic_terms = Vec::with_capacity(support.len());
    let mut answer_terms = Vec::with_capacity(support.len());
    for &y in &support {
        topic_terms.push(topic.dist.log_probs[y.0]);
        let lp = log_answer(params, env, q, y, a)?;
        debug_assert!(lp.is_finite(), "scope symmetry violated");
        answer_terms.push(lp);
    }
    Ok(JointTerms { support, log_topic: topic_terms, log_answer: answer_terms })
}

/// `A(y, q, a) = log P(y|q) + log P(a|y,q) - log Q(y|q,a)`.
pub fn learning_signal(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId, y: EntityId) -> Result<f64> {
    let lq = posterior(params, env, q, a)?.log_prob(y);
    let l1 = log_topic(params, env, q, y)?;
    let l2 = log_answer(params, env, q, y, a)?;
    let value = l1 + l2 - lq;
    assert!(value.is_finite(), "learning signal is not finite: y outside scope(a)?");
    Ok(value)
}

/// `log sum_y P(y|q) P(a|y,q)`.
pub fn marginal_loglik(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId) -> Result<f64> {
    let t = joint_terms(params, env, q, a)?;
    let joint: Vec<f64> = t.log_topic.iter().zip(&t.log_answer).map(|(x, y)| x + y).collect();
    let v = log_sum_exp(&joint);
    if v == f64::NEG_INFINITY {
        return Err(VrnError::AnswerUnreachable);
    }
    Ok(v)
}

/// Exact posterior `P(y | q, a)` over scope(a).
pub fn exact_posterior(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId) -> Result<Distribution> {
    let t = joint_terms(params, env, q, a)?;
    let joint: Vec<f64> = t.log_topic.iter().zip(&t.log_answer).map(|(x, y)| x + y).collect();
    Ok(Distribution::from_logits(t.support, &joint))
}

/// ELBO under an arbitrary distribution over scope(a).
pub fn elbo_under(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId, qd: &Distribution) -> Result<f64> {
    let t = joint_terms(params, env, q, a)?;
    let mut total = 0.0;
    for (i, &y) in t.support.iter().enumerate() {
        let Some(j) = qd.position(y) else { continue };
        let p = qd.probs[j];
        if p == 0.0 {
            continue;
        }
        total += p * (t.log_topic[i] + t.log_answer[i] - qd.log_probs[j]);
    }
    Ok(total)
}

/// Exact ELBO under the model's variational posterior.
pub fn elbo(params: &Params, env: &Env<'_>, q: &[usize], a: EntityId) -> Result<f64> {
    let qd = posterior(params, env, q, a)?;
    elbo_under(params, env, q, a, &qd)
}
