//! Repository structural semantic graph.
//!
//! Entities are classes, functions and class-bound attributes. Edges carry one
//! of six relation types grouped into three views: structural/type dependency
//! (`Contains`, `Returns`, `AsParameter`, `Inherits`), `Calls` and `Imports`.

mod build;
mod schema;
mod target;

pub use build::{build_graph, build_graph_with_diagnostics, BuildDiagnostics};
pub use schema::{validate_schema, SchemaViolation};
pub use target::{imported_entities, TargetSpec};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
pub use crate::source::{DeclKind as EntityKind, LineSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Contains,
    Returns,
    AsParameter,
    Inherits,
    Calls,
    Imports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    StructuralType,
    Calls,
    Imports,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Contains,
        Relation::Returns,
        Relation::AsParameter,
        Relation::Inherits,
        Relation::Calls,
        Relation::Imports,
    ];

    pub fn view(self) -> View {
        match self {
            Relation::Contains | Relation::Returns | Relation::AsParameter | Relation::Inherits => View::StructuralType,
            Relation::Calls => View::Calls,
            Relation::Imports => View::Imports,
        }
    }

    pub fn is_structural(self) -> bool {
        self.view() == View::StructuralType
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    pub qualified_name: String,
    pub signature: String,
    pub docstring: String,
    /// Slash-joined module path followed by the qualified name,
    /// e.g. `pkg/mod/Class/method`.
    pub path: String,
    pub file: String,
    pub line_span: LineSpan,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub annotation: String,
    /// Verbatim declaration source, kept for functions.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_text: String,
    #[serde(skip)]
    pub embedding: Option<EmbeddingVector>,
}

impl Entity {
    pub fn is_class(&self) -> bool {
        self.kind == EntityKind::Class
    }

    pub fn is_function(&self) -> bool {
        self.kind == EntityKind::Function
    }

    pub fn is_attribute(&self) -> bool {
        self.kind == EntityKind::Attribute
    }
}

/// Builds the `e_path` of an entity: file path without `.py`, then the
/// qualified name with dots turned into slashes.
pub fn entity_path(file: &str, qualified_name: &str) -> String {
    let stem = file.strip_suffix(".py").unwrap_or(file);
    format!("{stem}/{}", qualified_name.replace('.', "/"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: EntityId,
    pub relation: Relation,
    pub tail: EntityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<u32>,
}

impl RelationTriple {
    pub fn new(head: EntityId, relation: Relation, tail: EntityId) -> Self {
        let weight = (relation == Relation::Calls).then_some(1);
        Self {
            head,
            relation,
            tail,
            weight,
        }
    }

    pub fn calls(head: EntityId, tail: EntityId, weight: u32) -> Self {
        Self {
            head,
            relation: Relation::Calls,
            tail,
            weight: Some(weight),
        }
    }
}

/// Per-file information needed when composing prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleInfo {
    pub path: String,
    pub import_statements: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Adjacency {
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct Rssg {
    pub entities: Vec<Entity>,
    pub triples: Vec<RelationTriple>,
    pub modules: Vec<ModuleInfo>,
    adjacency: Adjacency,
    by_path: HashMap<String, EntityId>,
}

impl PartialEq for Rssg {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities && self.triples == other.triples && self.modules == other.modules
    }
}

impl Rssg {
    /// Assembles a graph from parts, sorting triples and rebuilding lookups.
    pub fn from_parts(entities: Vec<Entity>, mut triples: Vec<RelationTriple>, modules: Vec<ModuleInfo>) -> Self {
        triples.sort_by_key(|t| (t.head, t.relation, t.tail));
        let mut graph = Self {
            entities,
            triples,
            modules,
            adjacency: Adjacency::default(),
            by_path: HashMap::new(),
        };
        graph.reindex();
        graph
    }

    fn reindex(&mut self) {
        let n = self.entities.len();
        let mut adjacency = Adjacency {
            outgoing: vec![Vec::new(); n],
            incoming: vec![Vec::new(); n],
        };
        for (i, t) in self.triples.iter().enumerate() {
            if t.head.index() < n && t.tail.index() < n {
                adjacency.outgoing[t.head.index()].push(i);
                adjacency.incoming[t.tail.index()].push(i);
            }
        }
        self.adjacency = adjacency;
        self.by_path = self.entities.iter().map(|e| (e.path.clone(), e.id)).collect();
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn get(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(id.index())
    }

    pub fn by_path(&self, path: &str) -> Option<EntityId> {
        self.by_path.get(path).copied()
    }

    pub fn find(&self, file: &str, qualified_name: &str) -> Option<EntityId> {
        self.by_path(&entity_path(file, qualified_name))
            .filter(|id| self.entity(*id).file == file)
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entities.iter().map(|e| e.id)
    }

    pub fn outgoing(&self, id: EntityId) -> impl Iterator<Item = &RelationTriple> + '_ {
        self.adjacency
            .outgoing
            .get(id.index())
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
    }

    pub fn incoming(&self, id: EntityId) -> impl Iterator<Item = &RelationTriple> + '_ {
        self.adjacency
            .incoming
            .get(id.index())
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
    }

    pub fn outgoing_with(&self, id: EntityId, relation: Relation) -> impl Iterator<Item = EntityId> + '_ {
        self.outgoing(id)
            .filter(move |t| t.relation == relation)
            .map(|t| t.tail)
    }

    pub fn incoming_with(&self, id: EntityId, relation: Relation) -> impl Iterator<Item = EntityId> + '_ {
        self.incoming(id)
            .filter(move |t| t.relation == relation)
            .map(|t| t.head)
    }

    /// Structural/type-dependency successors ordered by (tail id, relation).
    pub fn structural_successors(&self, id: EntityId) -> Vec<(Relation, EntityId)> {
        let mut out: Vec<(Relation, EntityId)> = self
            .outgoing(id)
            .filter(|t| t.relation.is_structural())
            .map(|t| (t.relation, t.tail))
            .collect();
        out.sort_by_key(|&(r, t)| (t, r));
        out
    }

    pub fn has_triple(&self, head: EntityId, relation: Relation, tail: EntityId) -> bool {
        self.outgoing(head).any(|t| t.relation == relation && t.tail == tail)
    }

    /// The class that directly contains `id`, if any.
    pub fn owner(&self, id: EntityId) -> Option<EntityId> {
        self.incoming_with(id, Relation::Contains).next()
    }

    /// Drops every outgoing `Calls` edge of `id`, simulating an unimplemented body.
    pub fn mask_body(&mut self, id: EntityId) {
        self.triples
            .retain(|t| !(t.head == id && t.relation == Relation::Calls));
        self.reindex();
    }

    pub fn module(&self, file: &str) -> Option<&ModuleInfo> {
        self.modules.iter().find(|m| m.path == file)
    }

    pub fn relation_counts(&self) -> BTreeMap<Relation, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.triples {
            *counts.entry(t.relation).or_insert(0) += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_paths() {
        assert_eq!(
            entity_path("infrared/core/inspector/inspector.py", "SpecParser.get_deprecated_args"),
            "infrared/core/inspector/inspector/SpecParser/get_deprecated_args"
        );
        assert_eq!(entity_path("a/b.py", "C"), "a/b/C");
    }

    #[test]
    fn relation_views() {
        let structural: Vec<Relation> = Relation::ALL.into_iter().filter(|r| r.is_structural()).collect();
        assert_eq!(
            structural,
            vec![
                Relation::Contains,
                Relation::Returns,
                Relation::AsParameter,
                Relation::Inherits
            ]
        );
        assert_eq!(Relation::Calls.view(), View::Calls);
        assert_eq!(Relation::Imports.view(), View::Imports);
    }
}
