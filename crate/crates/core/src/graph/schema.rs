use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{EntityKind, Relation, RelationTriple, Rssg};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub triple: RelationTriple,
    pub reason: String,
}

fn allowed(relation: Relation, head: EntityKind, tail: EntityKind) -> bool {
    use EntityKind::*;
    match relation {
        Relation::Contains => head == Class,
        Relation::Returns => matches!(head, Function | Attribute) && tail == Class,
        Relation::AsParameter => head == Class && tail == Function,
        Relation::Inherits => head == Class && tail == Class,
        Relation::Calls => head == Function,
        Relation::Imports => head == Function && matches!(tail, Class | Function),
    }
}

/// Checks every triple against the entity-kind rules of its relation, plus
/// referential integrity, duplicate edges, `Calls` weights and `Imports`
/// irreflexivity. An empty result means the graph is well formed.
pub fn validate_schema(graph: &Rssg) -> Vec<SchemaViolation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for t in &graph.triples {
        let mut fail = |reason: String| out.push(SchemaViolation { triple: *t, reason });
        let (Some(head), Some(tail)) = (graph.get(t.head), graph.get(t.tail)) else {
            fail("references a missing entity".into());
            continue;
        };
        if !allowed(t.relation, head.kind, tail.kind) {
            fail(format!(
                "{:?} cannot link {:?} to {:?}",
                t.relation, head.kind, tail.kind
            ));
        }
        if t.relation == Relation::Imports && t.head == t.tail {
            fail("an entity cannot import itself".into());
        }
        match (t.relation, t.weight) {
            (Relation::Calls, Some(w)) if w > 0 => {}
            (Relation::Calls, _) => fail("Calls edge without a positive weight".into()),
            (_, Some(_)) => fail("only Calls edges carry a weight".into()),
            _ => {}
        }
        if !seen.insert((t.head, t.relation, t.tail)) {
            fail("duplicate triple".into());
        }
    }
    out
}
