use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use super::{CallChain, ChainConfig, Extension};
use crate::graph::{EntityId, Relation, Rssg};

/// Attaches, for each core entity where they exist: a class's `__init__`, a
/// function's parameter and return classes, an attribute's type class, and
/// the owning class of a function or attribute. Entities already in the core
/// are not repeated; the core itself is untouched.
pub fn extend_chain(mut chain: CallChain, graph: &Rssg) -> CallChain {
    let core: BTreeSet<EntityId> = chain.core.entities.iter().copied().collect();
    let mut seen: BTreeSet<EntityId> = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |x: Extension| {
        if !core.contains(&x.entity) && seen.insert(x.entity) {
            out.push(x);
        }
    };
    for &anchor in &chain.core.entities {
        let e = graph.entity(anchor);
        let forward = |relation, entity| Extension {
            anchor,
            relation,
            entity,
            inverse: false,
        };
        let inverse = |relation, entity| Extension {
            anchor,
            relation,
            entity,
            inverse: true,
        };
        if e.is_class() {
            for member in graph.outgoing_with(anchor, Relation::Contains) {
                let m = graph.entity(member);
                if m.is_function() && m.name == "__init__" {
                    push(forward(Relation::Contains, member));
                }
            }
        }
        if e.is_function() {
            let mut params: Vec<EntityId> = graph.incoming_with(anchor, Relation::AsParameter).collect();
            params.sort();
            for class in params {
                push(inverse(Relation::AsParameter, class));
            }
        }
        if e.is_function() || e.is_attribute() {
            let mut returns: Vec<EntityId> = graph.outgoing_with(anchor, Relation::Returns).collect();
            returns.sort();
            for class in returns {
                push(forward(Relation::Returns, class));
            }
            if let Some(owner) = graph.owner(anchor) {
                push(inverse(Relation::Contains, owner));
            }
        }
    }
    chain.extensions = out;
    chain
}

fn mean_score(chain: &CallChain, scores: &HashMap<EntityId, f64>) -> f64 {
    let total: f64 = chain
        .core
        .entities
        .iter()
        .map(|e| scores.get(e).copied().unwrap_or(0.0))
        .sum();
    total / chain.core.len() as f64
}

fn path_key<'g>(chain: &CallChain, graph: &'g Rssg) -> Vec<&'g str> {
    chain
        .core
        .entities
        .iter()
        .map(|&e| graph.entity(e).path.as_str())
        .collect()
}

/// Scores each chain by the mean of its core entity scores, sorts (score
/// descending, shorter core, then entity paths), and selects greedily: a chain
/// contained in an already selected one is dropped, at most `tau` chains per
/// start entity, at most `k_chain` overall.
pub fn rank_chains(
    chains: Vec<CallChain>,
    scores: &HashMap<EntityId, f64>,
    cfg: &ChainConfig,
    graph: &Rssg,
) -> Vec<CallChain> {
    if cfg.k_chain == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(CallChain, Vec<&str>)> = chains
        .into_iter()
        .map(|mut c| {
            c.score = mean_score(&c, scores);
            let key = path_key(&c, graph);
            (c, key)
        })
        .collect();
    scored.sort_by(|(a, ka), (b, kb)| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.core.len().cmp(&b.core.len()))
            .then_with(|| ka.cmp(kb))
            .then_with(|| a.core.relations.cmp(&b.core.relations))
            .then(Ordering::Equal)
    });

    let mut selected: Vec<CallChain> = Vec::new();
    let mut per_start: HashMap<EntityId, usize> = HashMap::new();
    for (chain, _) in scored {
        if selected.len() == cfg.k_chain {
            break;
        }
        if selected.iter().any(|s| chain.core.is_contained_in(&s.core)) {
            continue;
        }
        let used = per_start.entry(chain.start).or_insert(0);
        if *used >= cfg.tau {
            continue;
        }
        *used += 1;
        selected.push(chain);
    }
    selected
}
