//! Knowledge graph storage, adjacency indexes and token vocabularies.
//!
//! Triples are read from tab-separated text (`subject<TAB>relation<TAB>object`).
//! Entity and relation ids are dense and assigned in order of first
//! appearance. The graph is immutable once built.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VrnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub usize);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Orientation of an edge relative to the stored triple.
///
/// `Forward` means the edge is walked from subject to object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

/// One entry of the undirected neighbor list of an entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub entity: EntityId,
    pub relation: RelationId,
    /// `Forward` when the owning entity is the subject of the triple.
    pub direction: Direction,
}

/// Lowercase, strip punctuation, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeGraph {
    names: Vec<String>,
    name_tokens: Vec<Vec<String>>,
    relations: Vec<String>,
    triples: Vec<Triple>,
    out_adj: Vec<Vec<(EntityId, RelationId)>>,
    in_adj: Vec<Vec<(EntityId, RelationId)>>,
    undirected: Vec<Vec<Neighbor>>,
    entity_index: HashMap<String, EntityId>,
    relation_index: HashMap<String, RelationId>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.names.len()).map(EntityId)
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.names[e.0]
    }

    pub fn name_tokens(&self, e: EntityId) -> &[String] {
        &self.name_tokens[e.0]
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relations[r.0]
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn entity_by_name(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_by_name(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn contains_entity(&self, e: EntityId) -> bool {
        e.0 < self.names.len()
    }

    pub fn out_edges(&self, e: EntityId) -> &[(EntityId, RelationId)] {
        &self.out_adj[e.0]
    }

    pub fn in_edges(&self, e: EntityId) -> &[(EntityId, RelationId)] {
        &self.in_adj[e.0]
    }

    /// Neighbors of `e` ignoring edge direction, sorted by
    /// (neighbor id, relation id, direction).
    pub fn neighbors(&self, e: EntityId) -> Result<&[Neighbor]> {
        self.undirected
            .get(e.0)
            .map(Vec::as_slice)
            .ok_or(VrnError::UnknownEntity(e.0))
    }

    pub fn has_triple(&self, t: &Triple) -> bool {
        self.out_adj
            .get(t.subject.0)
            .is_some_and(|adj| adj.contains(&(t.object, t.relation)))
    }

    /// Writes the triples file format.
    pub fn write_triples<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.triples {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.names[t.subject.0], self.relations[t.relation.0], self.names[t.object.0]
            )?;
        }
        Ok(())
    }

    /// Writes the entity list (one name per line, id order).
    pub fn write_entities<W: Write>(&self, mut w: W) -> Result<()> {
        for n in &self.names {
            writeln!(w, "{n}")?;
        }
        Ok(())
    }
}

/// Incremental construction of a [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    allow_self_loops: bool,
    names: Vec<String>,
    relations: Vec<String>,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    entity_index: HashMap<String, EntityId>,
    relation_index: HashMap<String, RelationId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allow_self_loops(mut self, allow: bool) -> Self {
        self.allow_self_loops = allow;
        self
    }

    /// Registers an entity, returning the existing id if already known.
    pub fn entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = EntityId(self.names.len());
        self.names.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    pub fn relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelationId(self.relations.len());
        self.relations.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    /// Adds a triple; `line` is only used for error reporting.
    pub fn add_triple(&mut self, t: Triple, line: usize) -> Result<()> {
        if t.subject == t.object && !self.allow_self_loops {
            return Err(VrnError::SelfLoop { line, name: self.names[t.subject.0].clone() });
        }
        if !self.seen.insert(t) {
            return Err(VrnError::DuplicateTriple { line });
        }
        self.triples.push(t);
        Ok(())
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.triples.is_empty() {
            return Err(VrnError::EmptyGraph);
        }
        let n = self.names.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        let mut undirected = vec![Vec::new(); n];
        for t in &self.triples {
            out_adj[t.subject.0].push((t.object, t.relation));
            in_adj[t.object.0].push((t.subject, t.relation));
            undirected[t.subject.0].push(Neighbor {
                entity: t.object,
                relation: t.relation,
                direction: Direction::Forward,
            });
            undirected[t.object.0].push(Neighbor {
                entity: t.subject,
                relation: t.relation,
                direction: Direction::Backward,
            });
        }
        for adj in &mut undirected {
            adj.sort_unstable();
        }
        let name_tokens = self.names.iter().map(|s| tokenize(s)).collect();
        Ok(KnowledgeGraph {
            names: self.names,
            name_tokens,
            relations: self.relations,
            triples: self.triples,
            out_adj,
            in_adj,
            undirected,
            entity_index: self.entity_index,
            relation_index: self.relation_index,
        })
    }
}

/// Parses the triples file and, optionally, the entity list.
///
/// When an entity list is supplied it is the complete registry: it fixes the
/// id order, and a triple naming an unlisted entity is a dangling reference.
/// Without it, entities are registered on first appearance in the triples.
pub fn load_graph<R: BufRead, S: BufRead>(triples: R, entities: Option<S>) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::new();
    let strict = entities.is_some();
    if let Some(src) = entities {
        for (i, line) in src.lines().enumerate() {
            let line = line?;
            let name = line.trim_end_matches('\r');
            if name.trim().is_empty() {
                continue;
            }
            if b.lookup(name).is_some() {
                return Err(VrnError::Malformed { line: i + 1, reason: format!("entity `{name}` listed twice") });
            }
            b.entity(name);
        }
    }
    for (i, line) in triples.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(VrnError::Malformed {
                line: lineno,
                reason: format!("expected 3 non-empty tab-separated fields, got {}", fields.len()),
            });
        }
        let mut resolve = |name: &str| -> Result<EntityId> {
            if strict {
                b.lookup(name)
                    .ok_or_else(|| VrnError::DanglingEntity { line: lineno, name: name.to_owned() })
            } else {
                Ok(b.entity(name))
            }
        };
        let subject = resolve(fields[0])?;
        let object = resolve(fields[2])?;
        let relation = b.relation(fields[1]);
        b.add_triple(Triple { subject, relation, object }, lineno)?;
    }
    b.build()
}

/// Dense token index with `<unk>` reserved at 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const UNK: usize = 0;
    pub const UNK_TOKEN: &'static str = "<unk>";

    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(Self::UNK_TOKEN.to_owned(), Self::UNK);
        Self { tokens: vec![Self::UNK_TOKEN.to_owned()], index }
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens[1..] {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut v = Self::new();
        for line in r.lines() {
            let line = line?;
            if !line.is_empty() {
                v.insert(&line);
            }
        }
        Ok(v)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds a vocabulary over token streams in first-appearance order.
pub fn build_vocab<I, T, S>(streams: I) -> Vocabulary
where
    I: IntoIterator<Item = T>,
    T: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut v = Vocabulary::new();
    for stream in streams {
        for tok in stream {
            v.insert(tok.as_ref());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<KnowledgeGraph> {
        load_graph(s.as_bytes(), None::<&[u8]>)
    }

    #[test]
    fn three_entities_two_triples() {
        let g = load("a\tr\tb\nb\ts\tc\n").unwrap();
        assert_eq!(g.num_entities(), 3);
        assert_eq!(g.num_triples(), 2);
        assert_eq!(g.out_edges(EntityId(0)), &[(EntityId(1), RelationId(0))]);
        assert_eq!(g.in_edges(EntityId(2)), &[(EntityId(1), RelationId(1))]);
    }

    #[test]
    fn empty_source_is_an_error() {
        assert!(matches!(load(""), Err(VrnError::EmptyGraph)));
    }

    #[test]
    fn duplicate_line_reports_line_number() {
        let err = load("a\tr\tb\nc\tr\td\na\tr\tb\n").unwrap_err();
        assert!(matches!(err, VrnError::DuplicateTriple { line: 3 }), "{err}");
    }

    #[test]
    fn malformed_and_dangling() {
        assert!(matches!(load("a\tr\n"), Err(VrnError::Malformed { line: 1, .. })));
        let err = load_graph("a\tr\tz\n".as_bytes(), Some("a\nb\n".as_bytes())).unwrap_err();
        assert!(matches!(err, VrnError::DanglingEntity { line: 1, .. }));
        assert!(matches!(load("a\tr\ta\n"), Err(VrnError::SelfLoop { .. })));
    }

    #[test]
    fn entity_list_preregisters_isolated() {
        let g = load_graph("a\tr\tb\n".as_bytes(), Some("z\na\nb\n".as_bytes())).unwrap();
        assert_eq!(g.entity_by_name("z"), Some(EntityId(0)));
        assert!(g.neighbors(EntityId(0)).unwrap().is_empty());
    }

    #[test]
    fn neighbor_mirror_and_order() {
        // x -r0-> b, x -r1-> a, c -r0-> x
        let g = load("x\tr0\tb\nx\tr1\ta\nc\tr0\tx\n").unwrap();
        let x = g.entity_by_name("x").unwrap();
        let a = g.entity_by_name("a").unwrap();
        let b = g.entity_by_name("b").unwrap();
        let c = g.entity_by_name("c").unwrap();
        let r0 = g.relation_by_name("r0").unwrap();
        let r1 = g.relation_by_name("r1").unwrap();
        // ids: x=0 b=1 a=2 c=3
        let expect = vec![
            Neighbor { entity: b, relation: r0, direction: Direction::Forward },
            Neighbor { entity: a, relation: r1, direction: Direction::Forward },
            Neighbor { entity: c, relation: r0, direction: Direction::Backward },
        ];
        assert_eq!(g.neighbors(x).unwrap(), expect.as_slice());
        assert_eq!(
            g.neighbors(b).unwrap(),
            &[Neighbor { entity: x, relation: r0, direction: Direction::Backward }]
        );
        assert!(matches!(g.neighbors(EntityId(99)), Err(VrnError::UnknownEntity(99))));
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(tokenize("Who directed [The Road]?"), vec!["who", "directed", "the", "road"]);
    }

    #[test]
    fn vocab_basics() {
        let empty: Vec<Vec<&str>> = vec![];
        assert_eq!(build_vocab(empty).len(), 1);
        let v = build_vocab(vec![vec!["who", "wrote", "who"]]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("who"), 1);
        assert_eq!(v.id("nope"), Vocabulary::UNK);
        let w = build_vocab(vec![vec!["who", "wrote", "who"]]);
        assert_eq!(v, w);
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(Vocabulary::read(buf.as_slice()).unwrap(), v);
    }
}
