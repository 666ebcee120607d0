use std::sync::Arc;

use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph};
use crate::model::EntityNames;
use crate::scope::{Scope, ScopeCache};

/// Read-only data every forward pass needs besides the parameters.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub graph: &'a KnowledgeGraph,
    pub names: &'a EntityNames,
    pub scopes: &'a ScopeCache,
}

impl<'a> Env<'a> {
    pub fn new(graph: &'a KnowledgeGraph, names: &'a EntityNames, scopes: &'a ScopeCache) -> Self {
        Self { graph, names, scopes }
    }

    pub fn hops(&self) -> usize {
        self.scopes.hops()
    }

    pub fn scope(&self, source: EntityId) -> Result<Arc<Scope>> {
        self.scopes.get(self.graph, source)
    }
}
