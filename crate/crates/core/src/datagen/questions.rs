use std::collections::BTreeSet;

use rand::prelude::*;

use super::labeling::EntityMatcher;
use super::templates::QuestionTemplate;
use super::entity_classes;
use crate::error::{Result, VrnError};
use crate::kg::{tokenize, Direction, EntityId, KnowledgeGraph, RelationId};
use crate::rng;

pub const DEFAULT_ANSWER_CAP: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QAItem {
    pub tokens: Vec<String>,
    /// Word span `(start, len)` of the topic entity mention, when known.
    pub mention: Option<(usize, usize)>,
    /// Entity the question was generated from. Hidden from training when
    /// the item is unlabeled.
    pub source: Option<EntityId>,
    /// Topic label, present iff the item is labeled.
    pub topic: Option<EntityId>,
    /// Sorted, nonempty.
    pub answers: Vec<EntityId>,
    pub hops: usize,
    pub type_id: String,
}

impl QAItem {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Text with the mention bracketed if the item is labeled.
    pub fn surface(&self) -> String {
        match (self.topic, self.mention) {
            (Some(_), Some((s, l))) => {
                let mut out: Vec<String> = self.tokens[..s].to_vec();
                out.push(format!("[{}]", self.tokens[s..s + l].join(" ")));
                out.extend_from_slice(&self.tokens[s + l..]);
                out.join(" ")
            }
            _ => self.text(),
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.topic.is_some()
    }
}

/// Resolves relation names against the graph.
pub fn resolve_path(g: &KnowledgeGraph, t: &QuestionTemplate) -> Result<Vec<(RelationId, Direction)>> {
    t.path
        .iter()
        .map(|&(name, dir)| {
            g.relation_by_name(name)
                .map(|r| (r, dir))
                .ok_or_else(|| VrnError::Config(format!("graph has no relation `{name}` needed by {}", t.id)))
        })
        .collect()
}

/// Entities reached from `start` along `path`, excluding `start` itself.
pub fn answer_set(g: &KnowledgeGraph, start: EntityId, path: &[(RelationId, Direction)]) -> Vec<EntityId> {
    let mut cur: BTreeSet<EntityId> = [start].into();
    for &(rel, dir) in path {
        let mut next = BTreeSet::new();
        for &e in &cur {
            let edges = match dir {
                Direction::Forward => g.out_edges(e),
                Direction::Backward => g.in_edges(e),
            };
            next.extend(edges.iter().filter(|(_, r)| *r == rel).map(|(o, _)| *o));
        }
        cur = next;
    }
    cur.remove(&start);
    cur.into_iter().collect()
}

struct Eligible {
    template: usize,
    topics: Vec<(EntityId, Vec<EntityId>)>,
}

/// Samples `count` questions: a type uniformly, then a topic entity
/// uniformly among those whose answer set is nonempty and at most
/// `answer_cap` large, then a surface pattern uniformly. Exactly
/// `ceil(label_fraction * count)` items keep their topic label.
pub fn generate_questions(
    g: &KnowledgeGraph,
    templates: &[QuestionTemplate],
    count: usize,
    label_fraction: f64,
    answer_cap: usize,
    seed: u64,
) -> Result<Vec<QAItem>> {
    if !(0.0..=1.0).contains(&label_fraction) {
        return Err(VrnError::Config("label_fraction must be in [0, 1]".into()));
    }
    if templates.is_empty() {
        return Err(VrnError::Config("no question templates".into()));
    }
    let classes = entity_classes(g);
    let matcher = EntityMatcher::for_graph(g);
    let mut eligible = Vec::with_capacity(templates.len());
    for (ti, t) in templates.iter().enumerate() {
        let path = resolve_path(g, t)?;
        let topics: Vec<_> = g
            .entities()
            .filter(|e| classes[e.0] == Some(t.start))
            .map(|e| (e, answer_set(g, e, &path)))
            .filter(|(_, a)| !a.is_empty() && a.len() <= answer_cap)
            .collect();
        if topics.is_empty() {
            return Err(VrnError::NoEligibleTopic(t.id.clone()));
        }
        eligible.push(Eligible { template: ti, topics });
    }

    let mut r = rng::substream(seed, "questions");
    let mut items = Vec::with_capacity(count);
    let mut rejected = 0usize;
    while items.len() < count {
        let el = eligible.choose(&mut r).unwrap();
        let t = &templates[el.template];
        let (e, answers) = el.topics.choose(&mut r).unwrap();
        let text = t.fill(r.gen_range(0..t.patterns.len()), g.entity_name(*e));
        let tokens = tokenize(&text);
        match matcher.unique_entity(&tokens) {
            Some((found, span)) if found == *e => items.push(QAItem {
                tokens,
                mention: Some(span),
                source: Some(*e),
                topic: Some(*e),
                answers: answers.clone(),
                hops: t.hops(),
                type_id: t.id.clone(),
            }),
            _ => {
                rejected += 1;
                if rejected > 100 * count.max(100) {
                    return Err(VrnError::Config("entity names cannot be recovered from question text".into()));
                }
            }
        }
    }
    mask_labels(&mut items, label_fraction, seed);
    Ok(items)
}

/// Labels exactly `ceil(fraction * n)` items, chosen uniformly, with their
/// source entity and removes the label elsewhere.
pub fn mask_labels(items: &mut [QAItem], fraction: f64, seed: u64) {
    let keep = (fraction * items.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng::substream(seed, "labels"));
    for (rank, &i) in order.iter().enumerate() {
        items[i].topic = if rank < keep { items[i].source } else { None };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::templates::templates;
    use crate::kg::load_graph;

    fn two_movies() -> KnowledgeGraph {
        load_graph(
            "ka lo\tstarred_actors\tmi ra\nbe tu\tstarred_actors\tmi ra\nka lo\tdirected_by\tzo pe\n\
             be tu\tdirected_by\tdu si\nka lo\twritten_by\tfa ne\nbe tu\twritten_by\tfa ne\n\
             ka lo\thas_genre\tdrama\nka lo\trelease_year\t1999\nka lo\tin_language\tenglish\n"
                .as_bytes(),
            None::<&[u8]>,
        )
        .unwrap()
    }

    #[test]
    fn shared_actor_gives_the_other_movie() {
        let g = two_movies();
        let t = templates(2).into_iter().find(|t| t.id == "movie_to_actor_to_movie").unwrap();
        let path = resolve_path(&g, &t).unwrap();
        let ka = g.entity_by_name("ka lo").unwrap();
        assert_eq!(answer_set(&g, ka, &path), vec![g.entity_by_name("be tu").unwrap()]);
    }

    #[test]
    fn label_counts() {
        let g = two_movies();
        let ts: Vec<_> = templates(1).into_iter().filter(|t| t.id == "movie_to_actor").collect();
        let items = generate_questions(&g, &ts, 10, 0.0, 50, 1).unwrap();
        assert!(items.iter().all(|i| i.topic.is_none()));
        let items = generate_questions(&g, &ts, 10, 0.25, 50, 1).unwrap();
        assert_eq!(items.iter().filter(|i| i.is_labeled()).count(), 3);
        for it in &items {
            assert_eq!(it.hops, 1);
            assert!(!it.answers.contains(&it.source.unwrap()));
        }
    }

    #[test]
    fn no_eligible_topic_is_an_error() {
        let g = two_movies();
        // the two movies have different directors
        let ts: Vec<_> = templates(2).into_iter().filter(|t| t.id == "movie_to_director_to_movie").collect();
        assert!(matches!(generate_questions(&g, &ts, 5, 1.0, 50, 1), Err(VrnError::NoEligibleTopic(_))));
    }

    #[test]
    fn surface_brackets_mention() {
        let g = two_movies();
        let ts: Vec<_> = templates(1).into_iter().filter(|t| t.id == "movie_to_director").collect();
        let items = generate_questions(&g, &ts, 4, 1.0, 50, 2).unwrap();
        for it in items {
            let s = it.surface();
            assert!(s.contains("[ka lo]") || s.contains("[be tu]"), "{s}");
        }
    }
}
