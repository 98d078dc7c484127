//! Call-chain prediction for an unimplemented target function.
//!
//! Entities reachable from the target's imports are walked over the
//! structural/type-dependency edges, each resulting path is extended with
//! constructor, type and owner context, and the best-scoring paths are kept.

mod enumerate;
mod rank;
mod score;

pub use enumerate::{enumerate_chains, enumerate_chains_avoiding};
pub use rank::{extend_chain, rank_chains};
pub use score::{score_entity, ScoreHook, Scorer};

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embedding::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::{imported_entities, EntityId, Relation, Rssg, TargetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiTransform {
    /// `log2(x + 1)`
    #[default]
    Log2,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub l_max: usize,
    pub tau: usize,
    pub k_chain: usize,
    #[serde(default)]
    pub phi: PhiTransform,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 2.0,
            alpha3: 2.0,
            l_max: 5,
            tau: 4,
            k_chain: 5,
            phi: PhiTransform::Log2,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let alphas = [self.alpha1, self.alpha2, self.alpha3];
        if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha weights must be finite and non-negative, got {alphas:?}"
            )));
        }
        if self.l_max < 1 {
            return Err(Error::InvalidArgument("l_max must be at least 1".into()));
        }
        if self.tau < 1 {
            return Err(Error::InvalidArgument("tau must be at least 1".into()));
        }
        Ok(())
    }

    pub fn apply_phi(&self, x: f64) -> Result<f64> {
        match self.phi {
            PhiTransform::Log2 => phi(x),
            PhiTransform::Identity if x >= 0.0 => Ok(x),
            PhiTransform::Identity => Err(negative(x)),
        }
    }
}

fn negative(x: f64) -> Error {
    Error::InvalidArgument(format!("call value must be non-negative, got {x}"))
}

/// `log2(x + 1)`; negative input is an error.
pub fn phi(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(negative(x));
    }
    Ok((x + 1.0).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub entity: EntityId,
    pub similarity: f64,
    pub call_value: f64,
    pub score: f64,
}

/// Alternating entity/relation path: `relations[i]` links `entities[i]` to
/// `entities[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainCore {
    pub entities: Vec<EntityId>,
    pub relations: Vec<Relation>,
}

impl ChainCore {
    pub fn single(entity: EntityId) -> Self {
        Self {
            entities: vec![entity],
            relations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn start(&self) -> EntityId {
        self.entities[0]
    }

    /// True when `self` occurs as a contiguous run of `other`, relations included.
    pub fn is_contained_in(&self, other: &ChainCore) -> bool {
        let n = self.len();
        if n == 0 || n > other.len() {
            return false;
        }
        (0..=other.len() - n).any(|offset| {
            other.entities[offset..offset + n] == self.entities[..]
                && other.relations[offset..offset + n - 1] == self.relations[..]
        })
    }

    /// Checks the path against the graph: every step is an existing
    /// structural triple and no entity repeats.
    pub fn is_valid(&self, graph: &Rssg, l_max: usize) -> bool {
        let distinct: HashSet<_> = self.entities.iter().collect();
        !self.is_empty()
            && self.len() <= l_max
            && distinct.len() == self.len()
            && self.relations.len() + 1 == self.len()
            && self
                .relations
                .iter()
                .enumerate()
                .all(|(i, &r)| r.is_structural() && graph.has_triple(self.entities[i], r, self.entities[i + 1]))
    }
}

/// Context entity attached to a chain. `inverse` marks edges that point at the
/// anchor rather than away from it (parameter classes, owning classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Extension {
    pub anchor: EntityId,
    pub relation: Relation,
    pub entity: EntityId,
    pub inverse: bool,
}

impl Extension {
    /// The underlying graph triple as (head, relation, tail).
    pub fn triple(&self) -> (EntityId, Relation, EntityId) {
        if self.inverse {
            (self.entity, self.relation, self.anchor)
        } else {
            (self.anchor, self.relation, self.entity)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallChain {
    pub core: ChainCore,
    pub extensions: Vec<Extension>,
    pub score: f64,
    pub start: EntityId,
}

impl CallChain {
    pub fn from_core(core: ChainCore) -> Self {
        let start = core.start();
        Self {
            core,
            extensions: Vec::new(),
            score: 0.0,
            start,
        }
    }

    /// Core entities followed by extension entities, without repeats.
    pub fn all_entities(&self) -> Vec<EntityId> {
        let mut seen = HashSet::new();
        self.core
            .entities
            .iter()
            .copied()
            .chain(self.extensions.iter().map(|x| x.entity))
            .filter(|id| seen.insert(*id))
            .collect()
    }
}

/// Ablation switches for [`predict`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictOptions {
    /// Use the call-pooling term; off means similarity-only scoring.
    pub weighted: bool,
    /// Walk structural edges; off keeps only the imported entities themselves.
    pub dfs: bool,
    /// Attach constructor/type/owner extensions.
    pub extend: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            dfs: true,
            extend: true,
        }
    }
}

/// Full prediction for `target`: enumerate from its imported entities, score,
/// extend and rank.
pub fn predict(
    graph: &Rssg,
    target: &TargetSpec,
    clusters: &ClusterAssignment,
    cfg: &ChainConfig,
    options: PredictOptions,
) -> Result<Vec<CallChain>> {
    let scorer = Scorer::new(graph, target.entity, clusters, cfg)?.weighted(options.weighted);
    predict_with(graph, target, &scorer, cfg, options)
}

/// [`predict`] with a caller-supplied scorer, so one scorer can serve several
/// `k_chain` settings.
pub fn predict_with(
    graph: &Rssg,
    target: &TargetSpec,
    scorer: &Scorer<'_>,
    cfg: &ChainConfig,
    options: PredictOptions,
) -> Result<Vec<CallChain>> {
    cfg.validate()?;
    let starts: BTreeSet<EntityId> = imported_entities(graph, target);
    let l_max = if options.dfs { cfg.l_max } else { 1 };
    let avoid: HashSet<EntityId> = [target.entity].into_iter().collect();
    let cores = enumerate_chains_avoiding(graph, &starts, l_max, &avoid);

    let mut scores: HashMap<EntityId, f64> = HashMap::new();
    for core in &cores {
        for &e in &core.entities {
            if let std::collections::hash_map::Entry::Vacant(slot) = scores.entry(e) {
                slot.insert(scorer.score(e)?.score);
            }
        }
    }

    let chains: Vec<CallChain> = cores
        .into_iter()
        .map(|core| {
            let chain = CallChain::from_core(core);
            if options.extend {
                let mut chain = extend_chain(chain, graph);
                chain.extensions.retain(|x| x.entity != target.entity);
                chain
            } else {
                chain
            }
        })
        .collect();
    Ok(rank_chains(chains, &scores, cfg, graph))
}
