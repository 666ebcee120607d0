//! T-hop scope of a source entity.
//!
//! Nodes are ordered by (hop, entity id). A node's parents are its neighbors
//! exactly one hop closer to the source, so the parent structure is a layered
//! DAG and the node order is a topological order of it. Edges between nodes
//! of equal hop are not parent edges.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use crate::error::{Result, VrnError};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParentEdge {
    /// Position of the parent in [`Scope::nodes`].
    pub node: usize,
    pub relation: RelationId,
    /// Direction of the walk from the parent to the child, relative to the
    /// stored triple.
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScopeNode {
    pub entity: EntityId,
    pub hop: usize,
    pub parents: Vec<ParentEdge>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scope {
    source: EntityId,
    max_hops: usize,
    nodes: Vec<ScopeNode>,
    index: HashMap<EntityId, usize>,
}

impl Scope {
    pub fn source(&self) -> EntityId {
        self.source
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    pub fn nodes(&self) -> &[ScopeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, e: EntityId) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.index.contains_key(&e)
    }

    pub fn hop_of(&self, e: EntityId) -> Option<usize> {
        self.position(e).map(|i| self.nodes[i].hop)
    }

    pub fn num_parent_edges(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.nodes.iter().map(|n| n.entity)
    }

    /// Debug dump: `hop<TAB>entity_name<TAB>parent_count` per node.
    pub fn dump<W: Write>(&self, g: &KnowledgeGraph, mut w: W) -> Result<()> {
        for n in &self.nodes {
            writeln!(w, "{}\t{}\t{}", n.hop, g.entity_name(n.entity), n.parents.len())?;
        }
        Ok(())
    }
}

pub fn compute_scope(g: &KnowledgeGraph, source: EntityId, max_hops: usize) -> Result<Scope> {
    if !g.contains_entity(source) {
        return Err(VrnError::UnknownEntity(source.0));
    }
    let mut dist: HashMap<EntityId, usize> = HashMap::new();
    dist.insert(source, 0);
    let mut order = vec![source];
    let mut frontier = vec![source];
    for hop in 1..=max_hops {
        let mut next = Vec::new();
        for &e in &frontier {
            for nb in g.neighbors(e)? {
                if let std::collections::hash_map::Entry::Vacant(v) = dist.entry(nb.entity) {
                    v.insert(hop);
                    next.push(nb.entity);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        order.extend_from_slice(&next);
        frontier = next;
    }

    let index: HashMap<EntityId, usize> = order.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut nodes = Vec::with_capacity(order.len());
    for &e in &order {
        let hop = dist[&e];
        let mut parents = Vec::new();
        if hop > 0 {
            for nb in g.neighbors(e)? {
                if dist.get(&nb.entity) == Some(&(hop - 1)) {
                    parents.push(ParentEdge {
                        node: index[&nb.entity],
                        relation: nb.relation,
                        direction: nb.direction.reversed(),
                    });
                }
            }
        }
        nodes.push(ScopeNode { entity: e, hop, parents });
    }
    Ok(Scope { source, max_hops, nodes, index })
}

/// Membership test; usable without keeping the scope around.
pub fn contains(s: &Scope, e: EntityId) -> bool {
    s.contains(e)
}

/// Memoized scopes for a fixed hop budget, shared across workers.
#[derive(Debug)]
pub struct ScopeCache {
    hops: usize,
    capacity: usize,
    scopes: RwLock<HashMap<EntityId, Arc<Scope>>>,
}

impl ScopeCache {
    pub fn new(hops: usize) -> Self {
        Self::with_capacity(hops, 8192)
    }

    /// At most `capacity` scopes are retained; later ones are recomputed.
    pub fn with_capacity(hops: usize, capacity: usize) -> Self {
        Self { hops, capacity, scopes: RwLock::new(HashMap::new()) }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn get(&self, g: &KnowledgeGraph, source: EntityId) -> Result<Arc<Scope>> {
        if let Some(s) = self.scopes.read().expect("scope cache poisoned").get(&source) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(compute_scope(g, source, self.hops)?);
        let mut w = self.scopes.write().expect("scope cache poisoned");
        if w.len() < self.capacity {
            w.insert(source, Arc::clone(&s));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_graph;

    fn graph(s: &str) -> KnowledgeGraph {
        load_graph(s.as_bytes(), None::<&[u8]>).unwrap()
    }

    #[test]
    fn zero_hops_is_source_only() {
        let g = graph("a\tr\tb\n");
        let s = compute_scope(&g, EntityId(0), 0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.nodes()[0].parents.is_empty());
    }

    #[test]
    fn star_one_hop() {
        let g = graph("c\tr\tx\nc\tr\ty\nz\tq\tc\n");
        let s = compute_scope(&g, EntityId(0), 1).unwrap();
        let hops: Vec<usize> = s.nodes().iter().map(|n| n.hop).collect();
        assert_eq!(hops, vec![0, 1, 1, 1]);
        assert!(s.nodes()[1..].iter().all(|n| n.parents.len() == 1));
        let z = g.entity_by_name("z").unwrap();
        let zn = &s.nodes()[s.position(z).unwrap()];
        assert_eq!(zn.parents[0].direction, Direction::Backward);
    }

    #[test]
    fn layered_example_two_parents() {
        let g = graph(
            "the assassination\thas_genre\tcrime\n\
             the assassination\tdirected_by\tandrew dominik\n\
             killing them softly\thas_genre\tcrime\n\
             killing them softly\tdirected_by\tandrew dominik\n",
        );
        let y = g.entity_by_name("the assassination").unwrap();
        let s = compute_scope(&g, y, 2).unwrap();
        let k = g.entity_by_name("killing them softly").unwrap();
        assert_eq!(s.hop_of(k), Some(2));
        assert_eq!(s.hop_of(g.entity_by_name("crime").unwrap()), Some(1));
        assert_eq!(s.hop_of(g.entity_by_name("andrew dominik").unwrap()), Some(1));
        assert_eq!(s.nodes()[s.position(k).unwrap()].parents.len(), 2);
        assert!(contains(&s, y));
        let s1 = compute_scope(&g, y, 1).unwrap();
        assert!(!contains(&s1, k));
    }

    #[test]
    fn equal_hop_edges_are_not_parents() {
        // triangle: a-b, a-c, b-c
        let g = graph("a\tr\tb\na\tr\tc\nb\tr\tc\n");
        let s = compute_scope(&g, EntityId(0), 2).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.num_parent_edges(), 2);
    }

    #[test]
    fn dump_format() {
        let g = graph("a\tr\tb\n");
        let s = compute_scope(&g, EntityId(0), 1).unwrap();
        let mut out = Vec::new();
        s.dump(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0\ta\t0\n1\tb\t1\n");
    }

    #[test]
    fn unknown_source() {
        let g = graph("a\tr\tb\n");
        assert!(compute_scope(&g, EntityId(7), 1).is_err());
    }
}
