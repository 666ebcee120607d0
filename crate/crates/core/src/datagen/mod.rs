//! Synthetic movie-domain knowledge graph and templated multi-hop questions.

mod io;
mod labeling;
mod names;
mod noise;
mod questions;
mod split;
pub mod templates;

use std::collections::BTreeSet;

use rand::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_qa, write_qa, write_types};
pub use labeling::{label_entities, EntityMatcher, Labeled};
pub use noise::{apply_noise, synonym_words, NoiseConfig};
pub use questions::{answer_set, generate_questions, mask_labels, resolve_path, QAItem, DEFAULT_ANSWER_CAP};
pub use split::{split, DatasetSplit};
pub use templates::{templates, QuestionTemplate};

use crate::error::{Result, VrnError};
use crate::kg::{EntityId, GraphBuilder, KnowledgeGraph, Triple};
use crate::rng;

/// Entity classes of the movie domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    Movie,
    Actor,
    Director,
    Writer,
    Genre,
    Year,
    Language,
}

impl EntityClass {
    pub const ATTRIBUTES: [EntityClass; 6] = [
        EntityClass::Actor,
        EntityClass::Director,
        EntityClass::Writer,
        EntityClass::Genre,
        EntityClass::Year,
        EntityClass::Language,
    ];
    pub const PEOPLE: [EntityClass; 3] = [EntityClass::Actor, EntityClass::Writer, EntityClass::Director];

    /// Relation linking a movie (subject) to an entity of this class.
    pub fn relation(self) -> Option<&'static str> {
        Some(match self {
            EntityClass::Movie => return None,
            EntityClass::Actor => "starred_actors",
            EntityClass::Director => "directed_by",
            EntityClass::Writer => "written_by",
            EntityClass::Genre => "has_genre",
            EntityClass::Year => "release_year",
            EntityClass::Language => "in_language",
        })
    }

    pub fn from_relation(name: &str) -> Option<Self> {
        Self::ATTRIBUTES.into_iter().find(|c| c.relation() == Some(name))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Movie => "movie",
            EntityClass::Actor => "actor",
            EntityClass::Director => "director",
            EntityClass::Writer => "writer",
            EntityClass::Genre => "genre",
            EntityClass::Year => "year",
            EntityClass::Language => "language",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KGGenConfig {
    pub movies: usize,
    pub actors: usize,
    pub directors: usize,
    pub writers: usize,
    pub genres: usize,
    pub languages: usize,
    pub years: usize,
    /// Mean number of entities of each class attached to a movie.
    pub actors_per_movie: f64,
    pub directors_per_movie: f64,
    pub writers_per_movie: f64,
    pub genres_per_movie: f64,
    pub years_per_movie: f64,
    pub languages_per_movie: f64,
    /// Distinct person first names before they start repeating; 0 means
    /// every person has a fresh first name.
    pub first_name_pool: usize,
    /// Multiplier applied to every per-movie mean.
    pub edge_density: f64,
    pub seed: u64,
}

impl Default for KGGenConfig {
    fn default() -> Self {
        Self {
            movies: 100,
            actors: 80,
            directors: 40,
            writers: 40,
            genres: 15,
            languages: 8,
            years: 20,
            actors_per_movie: 3.0,
            directors_per_movie: 1.3,
            writers_per_movie: 1.5,
            genres_per_movie: 1.5,
            years_per_movie: 1.0,
            languages_per_movie: 1.0,
            first_name_pool: 0,
            edge_density: 1.0,
            seed: 0,
        }
    }
}

impl KGGenConfig {
    pub fn count(&self, class: EntityClass) -> usize {
        match class {
            EntityClass::Movie => self.movies,
            EntityClass::Actor => self.actors,
            EntityClass::Director => self.directors,
            EntityClass::Writer => self.writers,
            EntityClass::Genre => self.genres,
            EntityClass::Year => self.years,
            EntityClass::Language => self.languages,
        }
    }

    fn per_movie(&self, class: EntityClass) -> f64 {
        self.edge_density
            * match class {
                EntityClass::Movie => 0.0,
                EntityClass::Actor => self.actors_per_movie,
                EntityClass::Director => self.directors_per_movie,
                EntityClass::Writer => self.writers_per_movie,
                EntityClass::Genre => self.genres_per_movie,
                EntityClass::Year => self.years_per_movie,
                EntityClass::Language => self.languages_per_movie,
            }
    }

    pub fn minimal() -> Self {
        Self { movies: 1, actors: 1, directors: 1, writers: 1, genres: 1, languages: 1, years: 1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for class in std::iter::once(EntityClass::Movie).chain(EntityClass::ATTRIBUTES) {
            if self.count(class) == 0 {
                return Err(VrnError::Config(format!("{} count must be >= 1", class.as_str())));
            }
            if class != EntityClass::Movie && self.per_movie(class).partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(VrnError::Config(format!("{}_per_movie * edge_density must be > 0", class.as_str())));
            }
        }
        if self.years > names::max_years() {
            return Err(VrnError::Config(format!("at most {} distinct years", names::max_years())));
        }
        Ok(())
    }
}

/// Class of every entity, inferred from the relations it takes part in.
pub fn entity_classes(g: &KnowledgeGraph) -> Vec<Option<EntityClass>> {
    let mut out = vec![None; g.num_entities()];
    for t in g.triples() {
        if let Some(c) = EntityClass::from_relation(g.relation_name(t.relation)) {
            out[t.subject.0] = Some(EntityClass::Movie);
            out[t.object.0] = Some(c);
        }
    }
    out
}

/// Draws members of a class so that every member is used before any is
/// reused, skipping members already attached to the current movie.
struct Deck<'a> {
    members: &'a [EntityId],
    cards: Vec<EntityId>,
}

impl<'a> Deck<'a> {
    fn new(members: &'a [EntityId]) -> Self {
        Self { members, cards: Vec::new() }
    }

    fn draw(&mut self, taken: &BTreeSet<EntityId>, rng: &mut impl Rng) -> EntityId {
        let mut skipped = Vec::new();
        let pick = loop {
            if self.cards.is_empty() {
                self.cards = self.members.to_vec();
                self.cards.shuffle(rng);
            }
            let c = self.cards.pop().expect("refilled");
            if taken.contains(&c) {
                skipped.push(c);
            } else {
                break c;
            }
        };
        self.cards.extend(skipped);
        pick
    }
}

/// Random rounding of `mean`, at least 1 and at most `cap`.
fn draw_count(mean: f64, cap: usize, rng: &mut impl Rng) -> usize {
    let base = mean.floor();
    let extra = usize::from(rng.gen_bool((mean - base).clamp(0.0, 1.0)));
    (base as usize + extra).clamp(1, cap)
}

pub fn generate_kg(cfg: &KGGenConfig) -> Result<KnowledgeGraph> {
    cfg.validate()?;
    let mut r = rng::substream(cfg.seed, rng::stream::DATAGEN);
    let mut pool = names::NamePool::new();
    let mut b = GraphBuilder::new();
    let movies: Vec<EntityId> = (0..cfg.movies).map(|_| b.entity(&pool.title(&mut r))).collect();
    let mut members = Vec::new();
    for class in EntityClass::ATTRIBUTES {
        let n = cfg.count(class);
        let names: Vec<String> = match class {
            EntityClass::Actor | EntityClass::Director | EntityClass::Writer => {
                (0..n).map(|_| pool.person(cfg.first_name_pool, &mut r)).collect()
            }
            EntityClass::Genre => pool.genres(n, &mut r),
            EntityClass::Language => pool.languages(n, &mut r),
            EntityClass::Year => names::years(n, &mut r),
            EntityClass::Movie => unreachable!(),
        };
        members.push(names.iter().map(|s| b.entity(s)).collect::<Vec<_>>());
    }
    let relations: Vec<_> = EntityClass::ATTRIBUTES.iter().map(|c| b.relation(c.relation().unwrap())).collect();
    for (ci, class) in EntityClass::ATTRIBUTES.into_iter().enumerate() {
        let mut deck = Deck::new(&members[ci]);
        for &m in &movies {
            let k = draw_count(cfg.per_movie(class), members[ci].len(), &mut r);
            let mut taken = BTreeSet::new();
            for _ in 0..k {
                taken.insert(deck.draw(&taken, &mut r));
            }
            for o in taken {
                b.add_triple(Triple { subject: m, relation: relations[ci], object: o }, 0)?;
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_a_star() {
        let g = generate_kg(&KGGenConfig::minimal()).unwrap();
        assert_eq!(g.num_entities(), 7);
        assert_eq!(g.num_triples(), 6);
        assert_eq!(g.num_relations(), 6);
        let movie = g.triples()[0].subject;
        assert!(g.triples().iter().all(|t| t.subject == movie));
    }

    #[test]
    fn same_seed_same_triples() {
        let cfg = KGGenConfig::default();
        let a = generate_kg(&cfg).unwrap();
        let b = generate_kg(&cfg).unwrap();
        assert_eq!(a.triples(), b.triples());
        let names = |g: &KnowledgeGraph| g.entities().map(|e| g.entity_name(e).to_owned()).collect::<Vec<_>>();
        assert_eq!(names(&a), names(&b));
        let c = generate_kg(&KGGenConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.triples(), c.triples());
    }

    #[test]
    fn doubling_density_doubles_edges() {
        let cfg = KGGenConfig::default();
        let e1 = generate_kg(&cfg).unwrap().num_triples() as f64;
        let e2 = generate_kg(&KGGenConfig { edge_density: 2.0, ..cfg }).unwrap().num_triples() as f64;
        let ratio = e2 / e1;
        assert!((ratio - 2.0).abs() <= 0.2, "ratio {ratio}");
    }

    #[test]
    fn every_entity_is_used_and_classified() {
        let g = generate_kg(&KGGenConfig::default()).unwrap();
        let classes = entity_classes(&g);
        assert!(classes.iter().all(|c| c.is_some()));
        let movies = classes.iter().filter(|c| **c == Some(EntityClass::Movie)).count();
        assert_eq!(movies, 100);
        for e in g.entities() {
            let toks = g.name_tokens(e).len();
            match classes[e.0].unwrap() {
                EntityClass::Year | EntityClass::Genre | EntityClass::Language => assert_eq!(toks, 1),
                _ => assert!((2..=3).contains(&toks), "{}", g.entity_name(e)),
            }
        }
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(generate_kg(&KGGenConfig { writers: 0, ..KGGenConfig::default() }).is_err());
    }
}
