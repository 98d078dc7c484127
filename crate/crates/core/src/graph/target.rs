use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EntityId, LineSpan, Relation, Rssg};
use crate::error::{Error, Result};

/// The function to generate: its header and docstring, never its body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub entity: EntityId,
    pub file: String,
    pub qualified_name: String,
    pub signature: String,
    pub docstring: String,
    pub owning_class: Option<EntityId>,
    pub owner_name: Option<String>,
    pub line_span: LineSpan,
    /// Module-level import statements of the target's file.
    pub local_context: String,
}

impl TargetSpec {
    /// Looks up `file:qualified_name` (e.g. `pkg/mod.py:Class.method`).
    pub fn parse(graph: &Rssg, spec: &str) -> Result<Self> {
        let (file, qualified) = spec
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("target `{spec}` must look like <file>:<qualified_name>")))?;
        Self::resolve(graph, file, qualified)
    }

    pub fn resolve(graph: &Rssg, file: &str, qualified_name: &str) -> Result<Self> {
        let file = crate::source::normalize_path(file);
        let id = graph
            .find(&file, qualified_name)
            .filter(|&id| graph.entity(id).is_function())
            .ok_or_else(|| Error::TargetNotFound {
                target: format!("{file}:{qualified_name}"),
                suggestions: suggestions(graph, &file, qualified_name),
            })?;
        Ok(Self::from_entity(graph, id))
    }

    pub fn from_entity(graph: &Rssg, id: EntityId) -> Self {
        let e = graph.entity(id);
        let local_context = graph
            .module(&e.file)
            .map(|m| m.import_statements.join("\n"))
            .unwrap_or_default();
        Self {
            entity: id,
            file: e.file.clone(),
            qualified_name: e.qualified_name.clone(),
            signature: e.signature.clone(),
            docstring: e.docstring.clone(),
            owning_class: graph.owner(id),
            owner_name: graph.owner(id).map(|o| graph.entity(o).name.clone()),
            line_span: e.line_span,
            local_context,
        }
    }

    /// Signature plus docstring: the query text for fragment similarity.
    pub fn query_text(&self) -> String {
        if self.docstring.is_empty() {
            self.signature.clone()
        } else {
            format!("{}\n{}", self.signature, self.docstring)
        }
    }
}

/// Up to five function targets closest to the requested one by edit distance.
fn suggestions(graph: &Rssg, file: &str, qualified_name: &str) -> Vec<String> {
    let wanted = format!("{file}:{qualified_name}");
    let mut scored: Vec<(f64, String)> = graph
        .entities
        .iter()
        .filter(|e| e.is_function())
        .map(|e| {
            let candidate = format!("{}:{}", e.file, e.qualified_name);
            let name_score = strsim::normalized_levenshtein(&e.qualified_name, qualified_name);
            let full_score = strsim::normalized_levenshtein(&candidate, &wanted);
            (name_score.max(full_score), candidate)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.into_iter().take(5).map(|(_, c)| c).collect()
}

/// Entities the target can reach directly: the tails of its `Imports` edges.
pub fn imported_entities(graph: &Rssg, target: &TargetSpec) -> BTreeSet<EntityId> {
    graph.outgoing_with(target.entity, Relation::Imports).collect()
}
