//! Reference implementations used to check the optimized code paths.
//!
//! Every oracle here is written against the raw triple list or the scalar
//! definitions, never against the structures it checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::distributions::WeightedIndex;
use rand::prelude::*;

use crate::error::Result;
use crate::kg::{Direction, EntityId, GraphBuilder, KnowledgeGraph, RelationId, Triple, Vocabulary};
use crate::model::grad::{gradients, LossSpec};
use crate::model::{posterior_distribution, topic_distribution, answer_forward, EntityNames, Matrix, ModelConfig, Params, Shapes, WeightMode};
use crate::rng;
use crate::scope::{compute_scope, ScopeCache};
use crate::train::{elbo, elbo_under, exact_posterior, marginal_loglik, learning_signal, BaselineNet};
use crate::Env;

/// Outcome of one oracle suite.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl OracleReport {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

// ---------------------------------------------------------------------------
// graphs

/// Random multigraph-free graph over `num_entities` entities named `e<i>`.
/// Entities that end up isolated are still registered.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, num_entities: usize, num_triples: usize, num_relations: usize) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::new();
    let ids: Vec<EntityId> = (0..num_entities).map(|i| b.entity(&format!("e{i}"))).collect();
    let rels: Vec<RelationId> = (0..num_relations).map(|i| b.relation(&format!("r{i}"))).collect();
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while b.num_triples() < num_triples && attempts < num_triples * 20 {
        attempts += 1;
        let s = ids[rng.gen_range(0..num_entities)];
        let o = ids[rng.gen_range(0..num_entities)];
        let r = rels[rng.gen_range(0..num_relations)];
        if s == o || !seen.insert((s, r, o)) {
            continue;
        }
        b.add_triple(Triple { subject: s, relation: r, object: o }, 0)?;
    }
    if b.num_triples() == 0 {
        b.add_triple(Triple { subject: ids[0], relation: rels[0], object: ids[1 % num_entities] }, 0)?;
    }
    b.build()
}

/// Hop distances and parent edges computed by relaxation over the triple list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfsOracle {
    pub hops: BTreeMap<EntityId, usize>,
    /// (parent, relation, direction of the walk parent -> child)
    pub parents: BTreeMap<EntityId, BTreeSet<(EntityId, RelationId, Direction)>>,
}

pub fn bfs_oracle(triples: &[Triple], source: EntityId, max_hops: usize) -> BfsOracle {
    let mut hops = BTreeMap::new();
    hops.insert(source, 0usize);
    for round in 1..=max_hops {
        let mut found = Vec::new();
        for t in triples {
            for (a, b) in [(t.subject, t.object), (t.object, t.subject)] {
                if hops.get(&a) == Some(&(round - 1)) && !hops.contains_key(&b) {
                    found.push(b);
                }
            }
        }
        for e in found {
            hops.entry(e).or_insert(round);
        }
    }
    let mut parents: BTreeMap<EntityId, BTreeSet<_>> = hops.keys().map(|&e| (e, BTreeSet::new())).collect();
    for t in triples {
        let (hs, ho) = (hops.get(&t.subject), hops.get(&t.object));
        if let (Some(&hs), Some(&ho)) = (hs, ho) {
            if ho == hs + 1 {
                parents.get_mut(&t.object).unwrap().insert((t.subject, t.relation, Direction::Forward));
            }
            if hs == ho + 1 {
                parents.get_mut(&t.subject).unwrap().insert((t.object, t.relation, Direction::Backward));
            }
        }
    }
    BfsOracle { hops, parents }
}

/// Compares `compute_scope` with [`bfs_oracle`]; returns a description of
/// the first mismatch.
pub fn check_scope(g: &KnowledgeGraph, source: EntityId, max_hops: usize) -> std::result::Result<(), String> {
    let s = compute_scope(g, source, max_hops).map_err(|e| e.to_string())?;
    let o = bfs_oracle(g.triples(), source, max_hops);
    let got: BTreeMap<EntityId, usize> = s.nodes().iter().map(|n| (n.entity, n.hop)).collect();
    if got != o.hops {
        return Err(format!("source {}: hop map differs", source.0));
    }
    for n in s.nodes() {
        let ps: BTreeSet<_> = n
            .parents
            .iter()
            .map(|p| (s.nodes()[p.node].entity, p.relation, p.direction))
            .collect();
        if ps.len() != n.parents.len() {
            return Err(format!("source {}: duplicate parent edge at {}", source.0, n.entity.0));
        }
        if ps != o.parents[&n.entity] {
            return Err(format!("source {}: parents of {} differ", source.0, n.entity.0));
        }
    }
    let mut prev = (0, EntityId(0));
    for (i, n) in s.nodes().iter().enumerate() {
        if i > 0 && (n.hop, n.entity) <= prev {
            return Err(format!("source {}: node order broken at {i}", source.0));
        }
        prev = (n.hop, n.entity);
    }
    Ok(())
}

/// Scope against BFS on random graphs, plus the symmetry probe.
pub fn scope_suite(seed: u64, graphs: usize, probes: usize) -> Result<OracleReport> {
    let mut r = rng::substream(seed, "oracle-scope");
    let mut detail = String::new();
    let mut ok = true;
    let mut checked = 0;
    for _ in 0..graphs {
        let n = r.gen_range(2..=200);
        let m = r.gen_range(1..=3 * n);
        let rels = r.gen_range(1..=6);
        let g = random_graph(&mut r, n, m, rels)?;
        for _ in 0..5 {
            let src = EntityId(r.gen_range(0..n));
            let t = r.gen_range(0..=4);
            checked += 1;
            if let Err(e) = check_scope(&g, src, t) {
                ok = false;
                let _ = writeln!(detail, "{e}");
            }
        }
    }
    let mut asym = 0;
    let mut gi = random_graph(&mut r, 60, 90, 3)?;
    for p in 0..probes {
        if p % 500 == 0 {
            let n = r.gen_range(2..=200);
            let m = r.gen_range(1..=2 * n);
            gi = random_graph(&mut r, n, m, 3)?;
        }
        let n = gi.num_entities();
        let (y, a, t) = (EntityId(r.gen_range(0..n)), EntityId(r.gen_range(0..n)), r.gen_range(0..=3));
        let fwd = compute_scope(&gi, y, t)?.contains(a);
        let bwd = compute_scope(&gi, a, t)?.contains(y);
        if fwd != bwd {
            asym += 1;
        }
    }
    if asym > 0 {
        ok = false;
    }
    let _ = write!(detail, "{checked} scopes vs BFS, {probes} symmetry probes, {asym} asymmetric");
    Ok(OracleReport::new("scope", ok, detail))
}

/// Executes a relation path by scanning the triple list: every entity
/// reachable from `start` by following the steps in order.
pub fn execute_path(triples: &[Triple], start: EntityId, path: &[(RelationId, Direction)]) -> BTreeSet<EntityId> {
    let mut cur: BTreeSet<EntityId> = [start].into();
    for &(r, dir) in path {
        let mut next = BTreeSet::new();
        for t in triples.iter().filter(|t| t.relation == r) {
            let (from, to) = match dir {
                Direction::Forward => (t.subject, t.object),
                Direction::Backward => (t.object, t.subject),
            };
            if cur.contains(&from) {
                next.insert(to);
            }
        }
        cur = next;
    }
    cur
}

/// Generated questions checked against path execution over the raw triples,
/// the greedy labeler, and the template inventory.
pub fn dataset_suite(seed: u64, per_hop: usize) -> Result<OracleReport> {
    use crate::datagen::{generate_kg, generate_questions, label_entities, templates, KGGenConfig, DEFAULT_ANSWER_CAP};

    let g = generate_kg(&KGGenConfig { seed, ..KGGenConfig::default() })?;
    let names: Vec<&str> = g.entities().map(|e| g.entity_name(e)).collect();
    let mut failures = Vec::new();
    let mut checked = 0usize;
    let mut labeled = 0usize;
    let mut missing = Vec::new();
    for hops in 1..=3 {
        let ts = templates(hops);
        let items = generate_questions(&g, &ts, per_hop, 0.5, DEFAULT_ANSWER_CAP, seed.wrapping_add(hops as u64))?;
        let mut seen = BTreeSet::new();
        for it in &items {
            let t = ts.iter().find(|t| t.id == it.type_id).expect("generated from these templates");
            seen.insert(t.id.clone());
            let path = crate::datagen::resolve_path(&g, t)?;
            let source = it.source.expect("generated items know their source");
            let mut want = execute_path(g.triples(), source, &path);
            want.remove(&source);
            checked += 1;
            if want.into_iter().collect::<Vec<_>>() != it.answers {
                failures.push(format!("answers differ for `{}`", it.text()));
            }
            if let Some(topic) = it.topic {
                labeled += 1;
                let l = label_entities(&it.text(), &names);
                if l.matches != [topic.0] || l.text != it.surface() {
                    failures.push(format!("labeling differs for `{}`", it.text()));
                }
            }
        }
        if hops > 1 {
            missing.extend(ts.iter().filter(|t| !seen.contains(&t.id)).map(|t| t.id.clone()));
        }
    }
    let types = templates(2).len() + templates(3).len();
    let passed = failures.is_empty() && missing.is_empty() && types == 36;
    let mut detail = format!("{checked} answer sets, {labeled} labeled round trips, {types} multi-hop types");
    if !missing.is_empty() {
        let _ = write!(detail, "; never instantiated: {}", missing.join(", "));
    }
    if let Some(f) = failures.first() {
        let _ = write!(detail, "; {} failures, first: {f}", failures.len());
    }
    Ok(OracleReport::new("dataset", passed, detail))
}

// ---------------------------------------------------------------------------
// numerics

/// Softmax computed term by term with a max shift.
pub fn scalar_softmax(logits: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    for &l in logits {
        if l > m {
            m = l;
        }
    }
    let mut z = 0.0;
    for &l in logits {
        z += (l - m).exp();
    }
    logits.iter().map(|&l| (l - m).exp() / z).collect()
}

/// Anything exposing named parameter matrices.
pub trait Blocks: Clone {
    fn block_list(&self) -> Vec<(&'static str, &Matrix)>;
    fn block_list_mut(&mut self) -> Vec<(&'static str, &mut Matrix)>;
}

impl Blocks for Params {
    fn block_list(&self) -> Vec<(&'static str, &Matrix)> {
        self.blocks()
    }
    fn block_list_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        self.blocks_mut()
    }
}

impl Blocks for BaselineNet {
    fn block_list(&self) -> Vec<(&'static str, &Matrix)> {
        self.blocks()
    }
    fn block_list_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        self.blocks_mut()
    }
}

/// Central differences of `f` with respect to every parameter entry.
pub fn finite_differences<T: Blocks>(x: &T, h: f64, f: impl Fn(&T) -> Result<f64>) -> Result<T> {
    let mut probe = x.clone();
    let mut out = x.clone();
    let sizes: Vec<usize> = x.block_list().iter().map(|(_, m)| m.as_slice().len()).collect();
    for (b, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = x.block_list()[b].1.as_slice()[i];
            probe.block_list_mut()[b].1.as_mut_slice()[i] = orig + h;
            let fp = f(&probe)?;
            probe.block_list_mut()[b].1.as_mut_slice()[i] = orig - h;
            let fm = f(&probe)?;
            probe.block_list_mut()[b].1.as_mut_slice()[i] = orig;
            out.block_list_mut()[b].1.as_mut_slice()[i] = (fp - fm) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over all entries, with the
/// block name and entry index where it occurs.
pub fn max_relative_error<T: Blocks>(a: &T, b: &T, floor: f64) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for ((name, ma), (_, mb)) in a.block_list().into_iter().zip(b.block_list()) {
        for (i, (&x, &y)) in ma.as_slice().iter().zip(mb.as_slice()).enumerate() {
            let err = (x - y).abs() / x.abs().max(y.abs()).max(floor);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {x:e}, numeric {y:e}"));
            }
        }
    }
    worst
}

pub const FD_STEP: f64 = 1e-5;
/// Magnitude below which a gradient entry is compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-5;

/// A small instance: random graph with multi-token names, a vocabulary, a
/// question and random parameters.
#[derive(Clone, Debug)]
pub struct Toy {
    pub graph: KnowledgeGraph,
    pub vocab: Vocabulary,
    pub names: EntityNames,
    pub question: Vec<usize>,
    pub params: Params,
    pub hops: usize,
}

const TOY_WORDS: [&str; 8] = ["red", "blue", "fox", "cat", "old", "moon", "river", "stone"];
const QUESTION_WORDS: [&str; 6] = ["who", "what", "directed", "wrote", "films", "which"];

impl Toy {
    pub fn new(seed: u64, num_entities: usize, num_triples: usize, model: &ModelConfig, scale: f64, hops: usize) -> Result<Self> {
        let mut r = rng::substream(seed, "toy");
        let mut b = GraphBuilder::new();
        let mut used = BTreeSet::new();
        let mut ids = Vec::new();
        while ids.len() < num_entities {
            let k = r.gen_range(1..=2);
            let name: Vec<&str> = (0..k).map(|_| TOY_WORDS[r.gen_range(0..TOY_WORDS.len())]).collect();
            let name = name.join(" ");
            if used.insert(name.clone()) {
                ids.push(b.entity(&name));
            }
        }
        let rels: Vec<RelationId> = (0..3).map(|i| b.relation(&format!("r{i}"))).collect();
        let mut seen = BTreeSet::new();
        // a spanning path keeps the graph connected
        for w in ids.windows(2) {
            let rel = rels[r.gen_range(0..rels.len())];
            seen.insert((w[0], rel, w[1]));
            b.add_triple(Triple { subject: w[0], relation: rel, object: w[1] }, 0)?;
        }
        while b.num_triples() < num_triples.max(num_entities - 1) {
            let s = ids[r.gen_range(0..num_entities)];
            let o = ids[r.gen_range(0..num_entities)];
            let rel = rels[r.gen_range(0..rels.len())];
            if s != o && seen.insert((s, rel, o)) {
                b.add_triple(Triple { subject: s, relation: rel, object: o }, 0)?;
            }
        }
        let graph = b.build()?;
        let mut vocab = Vocabulary::new();
        for w in TOY_WORDS.iter().chain(&QUESTION_WORDS) {
            vocab.insert(w);
        }
        let names = EntityNames::new(&graph, &vocab);
        let qlen = r.gen_range(2..=5);
        let question = (0..qlen).map(|_| r.gen_range(1..vocab.len())).collect();
        let shapes = Params::shapes_for(model, &graph, &vocab);
        let params = Params::init(shapes, model.weight_mode, model.share_posterior, scale, &mut r);
        Ok(Self { graph, vocab, names, question, params, hops })
    }

    pub fn shapes(&self) -> Shapes {
        self.params.shapes
    }
}

fn model_variants() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for weight_mode in [WeightMode::NameBow, WeightMode::Free] {
        for share_posterior in [false, true] {
            for directional_relations in [false, true] {
                out.push(ModelConfig { dim: 4, weight_mode, directional_relations, share_posterior, ..Default::default() });
            }
        }
    }
    out
}

/// Analytic vs numeric gradients for the recognition, answer, posterior and
/// baseline losses on ≤10-entity instances, across parameterizations.
pub fn gradient_suite(seed: u64) -> Result<OracleReport> {
    let mut worst: BTreeMap<&'static str, (f64, String)> = BTreeMap::new();
    let mut note = |family: &'static str, e: (f64, String)| {
        let w = worst.entry(family).or_insert((0.0, String::new()));
        if e.0 >= w.0 {
            *w = e;
        }
    };
    for (vi, model) in model_variants().into_iter().enumerate() {
        let toy = Toy::new(seed.wrapping_add(vi as u64), 8, 11, &model, 0.6, 2)?;
        let q = toy.question.as_slice();
        let mut r = rng::child(seed, "oracle-grad", vi as u64);
        let y = EntityId(r.gen_range(0..toy.graph.num_entities()));
        let ys = compute_scope(&toy.graph, y, toy.hops)?;
        let a = ys.nodes()[r.gen_range(0..ys.len())].entity;
        let specs = [
            ("topic", LossSpec::Topic { question: q, topic: y }),
            ("answer", LossSpec::Answer { question: q, topic: y, answer: a, hops: toy.hops }),
            ("posterior", LossSpec::Posterior { question: q, answer: a, topic: y, hops: toy.hops }),
        ];
        for (family, spec) in specs {
            let (_, analytic) = gradients(&toy.params, &toy.names, &toy.graph, &spec)?;
            let numeric = finite_differences(&toy.params, FD_STEP, |p| Ok(gradients(p, &toy.names, &toy.graph, &spec)?.0))?;
            note(family, max_relative_error(&analytic, &numeric, FD_FLOOR));
        }

        let mut br = rng::child(seed, "oracle-baseline", vi as u64);
        let mut net = BaselineNet::init(toy.graph.num_entities(), toy.vocab.len(), 5, 0.6, &mut br);
        for (_, m) in net.blocks_mut().into_iter().skip(1) {
            *m = Matrix::uniform(m.rows(), m.cols(), 0.6, &mut br);
        }
        let target = br.gen_range(-2.0..2.0);
        let (_, analytic) = net.loss_and_grad(q, a, target);
        let numeric = finite_differences(&net, FD_STEP, |n| Ok(n.loss_and_grad(q, a, target).0))?;
        note("baseline", max_relative_error(&analytic, &numeric, FD_FLOOR));
    }
    let passed = worst.values().all(|(e, _)| *e < 1e-4);
    let detail = worst
        .iter()
        .map(|(k, (e, at))| format!("{k}: max rel err {e:.2e} ({at})"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(OracleReport::new("gradients", passed, detail))
}

/// `log sum_{y in V(G)} P(y|q) P(a|y,q)` by direct summation over every
/// entity, recomputing each scope from scratch.
pub fn brute_force_marginal(params: &Params, names: &EntityNames, g: &KnowledgeGraph, q: &[usize], a: EntityId, hops: usize) -> Result<f64> {
    let topic = topic_distribution(&params.recognition, names, q)?;
    let mut total = 0.0;
    for y in g.entities() {
        let s = compute_scope(g, y, hops)?;
        let Some(pos) = s.position(a) else { continue };
        let ans = answer_forward(&params.shapes, &params.reasoning, q, &s)?;
        total += topic.probs[y.0] * ans.dist.probs[pos];
    }
    Ok(total.ln())
}

/// Jensen bound on random draws, tightness at the exact posterior, and the
/// scope-restricted marginal against direct summation.
pub fn elbo_suite(seed: u64, draws: usize) -> Result<OracleReport> {
    let mut r = rng::substream(seed, "oracle-elbo");
    let (mut max_gap, mut max_tight, mut max_marg) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for i in 0..draws {
        let model = ModelConfig {
            dim: r.gen_range(2..=5),
            weight_mode: if r.gen_bool(0.5) { WeightMode::NameBow } else { WeightMode::Free },
            directional_relations: r.gen_bool(0.5),
            share_posterior: r.gen_bool(0.3),
            ..Default::default()
        };
        let n = r.gen_range(2..=8);
        let scale = r.gen_range(0.05..2.0);
        let hops = r.gen_range(1..=3);
        let toy = Toy::new(seed ^ (i as u64).wrapping_mul(0x9e37_79b9), n, n + r.gen_range(0..n), &model, scale, hops)?;
        let cache = ScopeCache::new(hops);
        let env = Env::new(&toy.graph, &toy.names, &cache);
        let a = EntityId(r.gen_range(0..n));
        let q = &toy.question;
        let m = marginal_loglik(&toy.params, &env, q, a)?;
        let e = elbo(&toy.params, &env, q, a)?;
        max_gap = max_gap.max(e - m);
        let exact = exact_posterior(&toy.params, &env, q, a)?;
        max_tight = max_tight.max((elbo_under(&toy.params, &env, q, a, &exact)? - m).abs());
        let brute = brute_force_marginal(&toy.params, &toy.names, &toy.graph, q, a, hops)?;
        max_marg = max_marg.max((brute - m).abs());
    }
    let passed = max_gap <= 1e-9 && max_tight <= 1e-9 && max_marg <= 1e-9;
    let detail = format!(
        "{draws} draws: max(elbo - marginal) {max_gap:.2e}, max |elbo_exact - marginal| {max_tight:.2e}, max |marginal - direct sum| {max_marg:.2e}"
    );
    Ok(OracleReport::new("elbo", passed, detail))
}

/// Result of the score-function check on one instance.
#[derive(Clone, Debug)]
pub struct ReinforceCheck {
    pub scope_size: usize,
    pub samples: usize,
    /// Largest `|mc - exact| / se` over components with nonzero standard error.
    pub max_z: f64,
    /// Largest `|mc - exact|` over components with zero standard error.
    pub max_degenerate: f64,
    /// Largest entry of `sum_y Q(y) grad log Q(y)`.
    pub score_identity: f64,
    /// Largest difference between the exact gradients with and without a constant baseline.
    pub baseline_shift: f64,
}

fn flat(p: &Params) -> Vec<f64> {
    p.blocks().into_iter().flat_map(|(_, m)| m.as_slice().to_vec()).collect()
}

/// Monte Carlo mean of `grad log Q(y) (A(y) - b)` under `y ~ Q` against
/// the enumerated expectation.
pub fn reinforce_check(toy: &Toy, answer: EntityId, baseline: f64, samples: usize, seed: u64) -> Result<ReinforceCheck> {
    let cache = ScopeCache::new(toy.hops);
    let env = Env::new(&toy.graph, &toy.names, &cache);
    let q = &toy.question;
    let qd = posterior_distribution(&toy.params, &toy.names, q, answer, &toy.graph, toy.hops)?;
    let mut scores = Vec::new();
    let mut signals = Vec::new();
    for &y in &qd.support {
        let spec = LossSpec::Posterior { question: q, answer, topic: y, hops: toy.hops };
        scores.push(flat(&gradients(&toy.params, &toy.names, &toy.graph, &spec)?.1));
        signals.push(learning_signal(&toy.params, &env, q, answer, y)?);
    }
    let dim = scores[0].len();
    let mut exact = vec![0.0; dim];
    let mut exact_plain = vec![0.0; dim];
    let mut identity = vec![0.0; dim];
    for (k, s) in scores.iter().enumerate() {
        for i in 0..dim {
            exact[i] += qd.probs[k] * s[i] * (signals[k] - baseline);
            exact_plain[i] += qd.probs[k] * s[i] * signals[k];
            identity[i] += qd.probs[k] * s[i];
        }
    }
    let mut r = rng::substream(seed, "oracle-reinforce");
    let sampler = WeightedIndex::new(&qd.probs).expect("posterior is a distribution");
    let mut counts = vec![0usize; qd.len()];
    for _ in 0..samples {
        counts[sampler.sample(&mut r)] += 1;
    }
    let n = samples as f64;
    let (mut max_z, mut max_degenerate) = (0.0f64, 0.0f64);
    for i in 0..dim {
        let (mut mean, mut second) = (0.0, 0.0);
        for (k, &c) in counts.iter().enumerate() {
            let v = scores[k][i] * (signals[k] - baseline);
            mean += c as f64 / n * v;
            second += c as f64 / n * v * v;
        }
        let var = (second - mean * mean).max(0.0) * n / (n - 1.0);
        let se = (var / n).sqrt();
        let diff = (mean - exact[i]).abs();
        if se > 1e-12 * (1.0 + mean.abs()) {
            max_z = max_z.max(diff / se);
        } else {
            max_degenerate = max_degenerate.max(diff);
        }
    }
    let score_identity = identity.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let baseline_shift = exact.iter().zip(&exact_plain).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ReinforceCheck { scope_size: qd.len(), samples, max_z, max_degenerate, score_identity, baseline_shift })
}

/// The toy used for the unbiasedness check: an answer whose scope holds a
/// handful of entities.
pub fn reinforce_toy(seed: u64) -> Result<(Toy, EntityId)> {
    let model = ModelConfig { dim: 3, weight_mode: WeightMode::NameBow, directional_relations: false, share_posterior: false, ..Default::default() };
    let toy = Toy::new(seed, 6, 6, &model, 0.8, 1)?;
    let a = toy
        .graph
        .entities()
        .find(|&e| matches!(compute_scope(&toy.graph, e, 1).map(|s| s.len()), Ok(3..=4)))
        .unwrap_or(EntityId(0));
    Ok((toy, a))
}

pub fn reinforce_suite(seed: u64, samples: usize) -> Result<OracleReport> {
    let (toy, a) = reinforce_toy(seed)?;
    let c = reinforce_check(&toy, a, 0.3, samples, seed)?;
    let passed = c.scope_size <= 10 && c.max_z <= 3.0 && c.max_degenerate <= 1e-12 && c.score_identity <= 1e-9 && c.baseline_shift <= 1e-9;
    let detail = format!(
        "scope {} entities, {} samples: max |z| {:.3}, degenerate diff {:.1e}, |sum Q grad log Q| {:.1e}, baseline shift {:.1e}",
        c.scope_size, c.samples, c.max_z, c.max_degenerate, c.score_identity, c.baseline_shift
    );
    Ok(OracleReport::new("reinforce", passed, detail))
}

/// Softmax kernels against the scalar reference.
pub fn softmax_suite(seed: u64) -> Result<OracleReport> {
    let mut r = rng::substream(seed, "oracle-softmax");
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = r.gen_range(1..30);
        let spread = r.gen_range(0.1..200.0);
        let logits: Vec<f64> = (0..n).map(|_| r.gen_range(-spread..spread)).collect();
        let (p, lp) = crate::model::tensor::log_softmax(&logits);
        let want = scalar_softmax(&logits);
        for i in 0..n {
            worst = worst.max((p[i] - want[i]).abs());
            if want[i] > 1e-300 {
                worst = worst.max((lp[i] - want[i].ln()).abs() * want[i].min(1.0));
            }
        }
        let sum: f64 = p.iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    Ok(OracleReport::new("softmax", worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

/// Every suite at the sizes used by `oracle-check`.
pub fn run_all(seed: u64) -> Result<Vec<OracleReport>> {
    Ok(vec![
        softmax_suite(seed)?,
        scope_suite(seed, 100, 10_000)?,
        elbo_suite(seed, 1000)?,
        gradient_suite(seed)?,
        reinforce_suite(seed, 100_000)?,
        dataset_suite(seed, 3000)?,
    ])
}
