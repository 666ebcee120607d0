//! Question types and their surface patterns.
//!
//! One-hop types ask for a single attribute of a movie or for the movies
//! sharing an attribute. Two- and three-hop patterns are built by wrapping a
//! description of a set of movies in a question frame about the target class.

use std::collections::BTreeSet;

use super::EntityClass::{self, *};
use crate::kg::{tokenize, Direction};

/// Placeholder for the topic entity in a pattern.
pub const SLOT: &str = "{e}";

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionTemplate {
    /// e.g. `actor_to_movie_to_director`
    pub id: String,
    pub start: EntityClass,
    pub target: EntityClass,
    /// Relation name and traversal direction of every step.
    pub path: Vec<(&'static str, Direction)>,
    pub patterns: Vec<String>,
}

impl QuestionTemplate {
    pub fn hops(&self) -> usize {
        self.path.len()
    }

    pub fn fill(&self, pattern: usize, entity: &str) -> String {
        self.patterns[pattern].replace(SLOT, entity)
    }
}

fn movie_to(class: EntityClass) -> (&'static str, Direction) {
    (class.relation().expect("attribute class"), Direction::Forward)
}

fn to_movie(class: EntityClass) -> (&'static str, Direction) {
    (class.relation().expect("attribute class"), Direction::Backward)
}

/// Question frames around a description `{s}` of a set of movies.
fn frames(target: EntityClass) -> [&'static str; 5] {
    match target {
        Movie => [
            "what are the {s}",
            "name the {s}",
            "list the {s}",
            "can you name some {s}",
            "which are the {s}",
        ],
        Actor => [
            "who acted in the {s}",
            "who starred in the {s}",
            "the {s} starred who",
            "which actors appeared in the {s}",
            "who are the actors in the {s}",
        ],
        Director => [
            "who directed the {s}",
            "the {s} were directed by who",
            "who is the director of the {s}",
            "which directors made the {s}",
            "who was behind the camera for the {s}",
        ],
        Writer => [
            "who wrote the {s}",
            "the {s} were written by who",
            "who are the writers of the {s}",
            "which screenwriters wrote the {s}",
            "who penned the {s}",
        ],
        Genre => [
            "what genres are the {s}",
            "which genres do the {s} belong to",
            "the {s} are what kind of movies",
            "what types of films are the {s}",
            "what genre are the {s} in",
        ],
        Year => [
            "when were the {s} released",
            "what years did the {s} come out",
            "the {s} were released in which years",
            "in which years were the {s} released",
            "what are the release dates of the {s}",
        ],
        Language => [
            "what languages are the {s} in",
            "which languages are spoken in the {s}",
            "the {s} are in which languages",
            "what language are the {s}",
            "in what languages were the {s} made",
        ],
    }
}

/// Descriptions of the movies linked to an entity of `class`.
fn movies_of(class: EntityClass) -> [&'static str; 2] {
    match class {
        Actor => ["films starring {e}", "movies {e} acted in"],
        Director => ["movies directed by {e}", "films {e} directed"],
        Writer => ["films written by {e}", "movies {e} wrote the screenplay for"],
        Genre => ["{e} films", "movies in the {e} genre"],
        Year => ["films released in {e}", "movies from {e}"],
        Language => ["films in {e}", "movies in the {e} language"],
        Movie => unreachable!("movies are described through an attribute"),
    }
}

/// Descriptions of the movies sharing a person of `class` with movie `{e}`.
fn movies_sharing(class: EntityClass) -> [&'static str; 2] {
    match class {
        Actor => ["films that share actors with {e}", "movies featuring the actors of {e}"],
        Director => ["films by the director of {e}", "movies that share directors with {e}"],
        Writer => ["films by the writer of {e}", "movies that share screenwriters with {e}"],
        _ => unreachable!("only people link movies here"),
    }
}

/// Hand-written one-hop questions about a movie `{e}`.
fn movie_attribute(class: EntityClass) -> [&'static str; 10] {
    match class {
        Actor => [
            "who acted in {e}",
            "who starred in {e}",
            "who are the actors in {e}",
            "which actors appeared in {e}",
            "{e} starred who",
            "who was in the cast of {e}",
            "the film {e} starred which actors",
            "who appeared in the movie {e}",
            "who are the stars of {e}",
            "which actors were in {e}",
        ],
        Director => [
            "who directed {e}",
            "who is the director of {e}",
            "{e} was directed by who",
            "who was behind the camera for {e}",
            "which director made {e}",
            "the film {e} was directed by whom",
            "who is the director of the movie {e}",
            "who made the film {e}",
            "name the director of {e}",
            "who helmed {e}",
        ],
        Writer => [
            "who wrote {e}",
            "who is the writer of {e}",
            "{e} was written by who",
            "who wrote the screenplay for {e}",
            "which screenwriter wrote {e}",
            "the film {e} was written by whom",
            "who penned {e}",
            "who is the screenwriter of the movie {e}",
            "name the writer of {e}",
            "who authored the script of {e}",
        ],
        Genre => [
            "what genre is {e}",
            "what kind of movie is {e}",
            "{e} is what type of film",
            "which genre does {e} belong to",
            "what type of movie is {e}",
            "the film {e} is of which genre",
            "what genres is the movie {e}",
            "what sort of film is {e}",
            "describe the genre of {e}",
            "{e} is which kind of movie",
        ],
        Year => [
            "when was {e} released",
            "what year did {e} come out",
            "{e} was released in which year",
            "in which year was {e} released",
            "when did the movie {e} come out",
            "what is the release year of {e}",
            "the film {e} came out when",
            "when was the film {e} released",
            "what year was {e} made",
            "which year did {e} premiere",
        ],
        Language => [
            "what language is {e} in",
            "which language is spoken in {e}",
            "{e} is in which language",
            "what is the language of {e}",
            "the film {e} is in what language",
            "in which language was {e} made",
            "what language does the movie {e} use",
            "which language is the film {e}",
            "what language was {e} filmed in",
            "in what language is {e}",
        ],
        Movie => unreachable!(),
    }
}

fn compose(frames: [&str; 5], descriptions: [&str; 2]) -> Vec<String> {
    let mut out = Vec::with_capacity(10);
    for d in descriptions {
        for f in frames {
            out.push(f.replace("{s}", d));
        }
    }
    out
}

fn id(classes: &[EntityClass]) -> String {
    classes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("_to_")
}

fn one_hop() -> Vec<QuestionTemplate> {
    let mut out = Vec::new();
    for c in EntityClass::ATTRIBUTES {
        out.push(QuestionTemplate {
            id: id(&[Movie, c]),
            start: Movie,
            target: c,
            path: vec![movie_to(c)],
            patterns: movie_attribute(c).iter().map(|s| s.to_string()).collect(),
        });
    }
    for c in EntityClass::ATTRIBUTES {
        out.push(QuestionTemplate {
            id: id(&[c, Movie]),
            start: c,
            target: Movie,
            path: vec![to_movie(c)],
            patterns: compose(frames(Movie), movies_of(c)),
        });
    }
    out
}

fn two_hop() -> Vec<QuestionTemplate> {
    let mut out = Vec::new();
    for p in EntityClass::PEOPLE {
        for t in EntityClass::ATTRIBUTES {
            out.push(QuestionTemplate {
                id: id(&[p, Movie, t]),
                start: p,
                target: t,
                path: vec![to_movie(p), movie_to(t)],
                patterns: compose(frames(t), movies_of(p)),
            });
        }
    }
    for p in EntityClass::PEOPLE {
        out.push(QuestionTemplate {
            id: id(&[Movie, p, Movie]),
            start: Movie,
            target: Movie,
            path: vec![movie_to(p), to_movie(p)],
            patterns: compose(frames(Movie), movies_sharing(p)),
        });
    }
    out
}

/// Movie -> person -> movie -> attribute, without the types that return to
/// the same kind of person they went through.
fn three_hop() -> Vec<QuestionTemplate> {
    let mut out = Vec::new();
    for p in EntityClass::PEOPLE {
        for t in EntityClass::ATTRIBUTES {
            if t == p {
                continue;
            }
            out.push(QuestionTemplate {
                id: id(&[Movie, p, Movie, t]),
                start: Movie,
                target: t,
                path: vec![movie_to(p), to_movie(p), movie_to(t)],
                patterns: compose(frames(t), movies_sharing(p)),
            });
        }
    }
    out
}

/// Every question type with the given number of hops (1, 2 or 3).
pub fn templates(hops: usize) -> Vec<QuestionTemplate> {
    match hops {
        1 => one_hop(),
        2 => two_hop(),
        3 => three_hop(),
        _ => Vec::new(),
    }
}

/// Every word used by any pattern.
pub fn template_words() -> BTreeSet<String> {
    (1..=3)
        .flat_map(templates)
        .flat_map(|t| t.patterns)
        .flat_map(|p| tokenize(&p.replace(SLOT, " ")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_sizes() {
        assert_eq!(templates(1).len(), 12);
        assert_eq!(templates(2).len(), 21);
        assert_eq!(templates(3).len(), 15);
        assert!(templates(4).is_empty());
    }

    #[test]
    fn every_template_is_well_formed() {
        let mut ids = BTreeSet::new();
        for h in 1..=3 {
            for t in templates(h) {
                assert_eq!(t.hops(), h);
                assert_eq!(t.patterns.len(), 10, "{}", t.id);
                assert!(t.patterns.iter().all(|p| p.matches(SLOT).count() == 1), "{}", t.id);
                let distinct: BTreeSet<_> = t.patterns.iter().collect();
                assert_eq!(distinct.len(), 10, "{}", t.id);
                assert!(ids.insert(t.id.clone()));
            }
        }
    }

    #[test]
    fn shape_of_a_sharing_question() {
        let t = templates(2).into_iter().find(|t| t.id == "movie_to_actor_to_movie").unwrap();
        assert!(t.patterns.iter().any(|p| p == "which are the movies featuring the actors of {e}"));
        assert_eq!(t.fill(0, "zoka minar"), "what are the films that share actors with zoka minar");
    }
}
