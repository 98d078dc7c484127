use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use super::ChainCore;
use crate::graph::{EntityId, Rssg};

/// Every simple path over structural edges that starts at one of `starts` and
/// has between 1 and `l_max` entities. Each prefix is its own chain. Output is
/// grouped by start (ascending id), then in DFS preorder with successors
/// visited by ascending tail id.
pub fn enumerate_chains(graph: &Rssg, starts: &BTreeSet<EntityId>, l_max: usize) -> Vec<ChainCore> {
    enumerate_chains_avoiding(graph, starts, l_max, &HashSet::new())
}

/// [`enumerate_chains`] that never steps onto an entity in `avoid`.
pub fn enumerate_chains_avoiding(
    graph: &Rssg,
    starts: &BTreeSet<EntityId>,
    l_max: usize,
    avoid: &HashSet<EntityId>,
) -> Vec<ChainCore> {
    if l_max == 0 {
        return Vec::new();
    }
    let starts: Vec<EntityId> = starts
        .iter()
        .copied()
        .filter(|s| graph.get(*s).is_some() && !avoid.contains(s))
        .collect();
    starts
        .par_iter()
        .map(|&start| {
            let mut out = Vec::new();
            let mut path = ChainCore::single(start);
            dfs(graph, &mut path, l_max, avoid, &mut out);
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn dfs(graph: &Rssg, path: &mut ChainCore, l_max: usize, avoid: &HashSet<EntityId>, out: &mut Vec<ChainCore>) {
    out.push(path.clone());
    if path.len() == l_max {
        return;
    }
    let last = *path.entities.last().expect("path is never empty");
    for (relation, next) in graph.structural_successors(last) {
        if avoid.contains(&next) || path.entities.contains(&next) {
            continue;
        }
        path.entities.push(next);
        path.relations.push(relation);
        dfs(graph, path, l_max, avoid, out);
        path.entities.pop();
        path.relations.pop();
    }
}
