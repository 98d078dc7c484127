use std::collections::HashMap;

use crate::chains::CallChain;
use crate::graph::{EntityId, Relation, Rssg};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub entity: EntityId,
    pub children: Vec<TreeNode>,
}

/// Chain entities arranged by `Contains`. Roots and children keep the order in
/// which entities first appear across the chains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureTree {
    pub roots: Vec<TreeNode>,
}

impl StructureTree {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Entities in preorder.
    pub fn preorder(&self) -> Vec<(EntityId, usize)> {
        fn walk(node: &TreeNode, depth: usize, out: &mut Vec<(EntityId, usize)>) {
            out.push((node.entity, depth));
            for child in &node.children {
                walk(child, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        for root in &self.roots {
            walk(root, 0, &mut out);
        }
        out
    }
}

/// Collects core and extension entities of every chain, merges duplicates and
/// hangs each entity under its owning class when that class is present too.
pub fn build_structure_tree(chains: &[CallChain], graph: &Rssg) -> StructureTree {
    let mut order: Vec<EntityId> = Vec::new();
    let mut position: HashMap<EntityId, usize> = HashMap::new();
    for chain in chains {
        for entity in chain.all_entities() {
            if graph.get(entity).is_some() && !position.contains_key(&entity) {
                position.insert(entity, order.len());
                order.push(entity);
            }
        }
    }
    // A parent is rejected if it already hangs below the entity, which keeps
    // the result a forest even on malformed graphs with Contains cycles.
    let mut parent: HashMap<EntityId, EntityId> = HashMap::new();
    for &e in &order {
        let mut candidates: Vec<EntityId> = graph
            .incoming_with(e, Relation::Contains)
            .filter(|p| *p != e && position.contains_key(p))
            .collect();
        candidates.sort_by_key(|p| position[p]);
        for p in candidates {
            let mut up = Some(p);
            while let Some(x) = up {
                if x == e {
                    break;
                }
                up = parent.get(&x).copied();
            }
            if up.is_none() {
                parent.insert(e, p);
                break;
            }
        }
    }
    let mut children: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    let mut roots = Vec::new();
    for &e in &order {
        match parent.get(&e) {
            Some(&p) => children.entry(p).or_default().push(e),
            None => roots.push(e),
        }
    }
    fn node(e: EntityId, children: &HashMap<EntityId, Vec<EntityId>>) -> TreeNode {
        TreeNode {
            entity: e,
            children: children
                .get(&e)
                .map(|c| c.iter().map(|&x| node(x, children)).collect())
                .unwrap_or_default(),
        }
    }
    StructureTree {
        roots: roots.into_iter().map(|r| node(r, &children)).collect(),
    }
}

/// One output line; `entity` is `None` for file comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerializedLine {
    pub entity: Option<EntityId>,
    pub depth: usize,
    pub text: String,
}

pub fn serialize_lines(tree: &StructureTree, graph: &Rssg) -> Vec<SerializedLine> {
    let mut out = Vec::new();
    for root in &tree.roots {
        out.push(SerializedLine {
            entity: None,
            depth: 0,
            text: format!("# {}", graph.entity(root.entity).file),
        });
        emit(root, 0, graph, &mut out);
    }
    out
}

/// Preorder rendering with four spaces per nesting level: class headers,
/// function signatures, attribute declarations, each with its docstring.
pub fn serialize_tree(tree: &StructureTree, graph: &Rssg) -> String {
    let mut text = String::new();
    for line in serialize_lines(tree, graph) {
        text.push_str(&line.text);
        text.push('\n');
    }
    text
}

fn emit(node: &TreeNode, depth: usize, graph: &Rssg, out: &mut Vec<SerializedLine>) {
    let e = graph.entity(node.entity);
    let pad = "    ".repeat(depth);
    let mut line = |text: String| {
        out.push(SerializedLine {
            entity: Some(node.entity),
            depth,
            text,
        })
    };
    let docstring = |line: &mut dyn FnMut(String)| {
        if !e.docstring.is_empty() {
            let inner = "    ".repeat(depth + 1);
            let mut doc = e.docstring.lines();
            let first = doc.next().unwrap_or_default();
            let rest: Vec<&str> = doc.collect();
            if rest.is_empty() {
                line(format!("{inner}\"\"\"{first}\"\"\""));
            } else {
                line(format!("{inner}\"\"\"{first}"));
                for l in rest {
                    line(if l.is_empty() {
                        String::new()
                    } else {
                        format!("{inner}{l}")
                    });
                }
                line(format!("{inner}\"\"\""));
            }
        }
    };
    if e.is_class() {
        line(format!("{pad}class {}:", e.name));
        docstring(&mut line);
    } else if e.is_function() {
        let signature: Vec<&str> = e.signature.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let last = signature.len().saturating_sub(1);
        for (i, l) in signature.iter().enumerate() {
            line(if i == last {
                format!("{pad}{l}:")
            } else {
                format!("{pad}{l}")
            });
        }
        if e.docstring.is_empty() {
            line(format!("{pad}    ..."));
        } else {
            docstring(&mut line);
        }
    } else {
        let annotation = attribute_type(graph, node.entity);
        line(match annotation {
            Some(t) => format!("{pad}{}: {t}", e.name),
            None => format!("{pad}{}", e.name),
        });
    }
    for child in &node.children {
        emit(child, depth + 1, graph, out);
    }
}

/// Written annotation, or else the class the attribute was inferred to hold.
fn attribute_type(graph: &Rssg, id: EntityId) -> Option<String> {
    let e = graph.entity(id);
    if !e.annotation.is_empty() {
        return Some(e.annotation.clone());
    }
    graph
        .outgoing_with(id, Relation::Returns)
        .min()
        .map(|c| graph.entity(c).name.clone())
}
