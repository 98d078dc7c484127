use crate::embedding::{cosine, ClusterAssignment, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::{EntityId, Relation, Rssg};

use super::{ChainConfig, EntityScore};

/// Extra additive term on top of the weighted score, e.g. a sequence prior for
/// API-level completion. Returns 0 for entities it has no opinion on.
pub trait ScoreHook: Send + Sync {
    fn extra(&self, graph: &Rssg, target: EntityId, entity: EntityId) -> f64;
}

/// Scores entities against one target. Call values are pooled per cluster, so
/// they are computed once up front.
pub struct Scorer<'g> {
    graph: &'g Rssg,
    target: EntityId,
    target_vector: &'g EmbeddingVector,
    clusters: &'g ClusterAssignment,
    cfg: ChainConfig,
    pooled: Vec<f64>,
    weighted: bool,
    hook: Option<Box<dyn ScoreHook + 'g>>,
}

impl<'g> Scorer<'g> {
    pub fn new(graph: &'g Rssg, target: EntityId, clusters: &'g ClusterAssignment, cfg: &ChainConfig) -> Result<Self> {
        cfg.validate()?;
        if clusters.cluster_of.len() != graph.len() {
            return Err(Error::InvalidArgument(format!(
                "cluster assignment covers {} entities, graph has {}",
                clusters.cluster_of.len(),
                graph.len()
            )));
        }
        let target_vector = graph
            .get(target)
            .and_then(|e| e.embedding.as_ref())
            .ok_or_else(|| Error::Embedding(format!("target {target} has no embedding")))?;
        Ok(Self {
            graph,
            target,
            target_vector,
            clusters,
            cfg: cfg.clone(),
            pooled: pooled_call_values(graph, target, clusters, cfg.alpha3),
            weighted: true,
            hook: None,
        })
    }

    /// Similarity-only scoring when `false`.
    pub fn weighted(mut self, weighted: bool) -> Self {
        self.weighted = weighted;
        self
    }

    pub fn with_hook(mut self, hook: Box<dyn ScoreHook + 'g>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn call_value(&self, entity: EntityId) -> f64 {
        self.pooled[self.clusters.cluster(entity.index())]
    }

    pub fn score(&self, entity: EntityId) -> Result<EntityScore> {
        let similarity = match &self.graph.entity(entity).embedding {
            Some(v) => cosine(self.target_vector, v)?,
            None => 0.0,
        };
        let call_value = if self.weighted { self.call_value(entity) } else { 0.0 };
        let mut score = EntityScore {
            entity,
            similarity,
            call_value,
            score: weighted_score(&self.cfg, similarity, call_value)?,
        };
        if let Some(hook) = &self.hook {
            score.score += hook.extra(self.graph, self.target, entity);
        }
        Ok(score)
    }
}

/// `alpha1 * similarity + alpha2 * phi(call_value)`
fn weighted_score(cfg: &ChainConfig, similarity: f64, call_value: f64) -> Result<f64> {
    Ok(cfg.alpha1 * similarity + cfg.alpha2 * cfg.apply_phi(call_value)?)
}

/// Per cluster c: sum of `alpha3 * w` over Calls edges whose head is a
/// function in the target's cluster (other than the target) and whose tail
/// lies in c.
fn pooled_call_values(graph: &Rssg, target: EntityId, clusters: &ClusterAssignment, alpha3: f64) -> Vec<f64> {
    let mut pooled = vec![0.0; clusters.k.max(1)];
    let target_cluster = clusters.cluster(target.index());
    for t in &graph.triples {
        if t.relation != Relation::Calls || t.head == target {
            continue;
        }
        if !graph.entity(t.head).is_function() || clusters.cluster(t.head.index()) != target_cluster {
            continue;
        }
        let w = f64::from(t.weight.unwrap_or(1));
        pooled[clusters.cluster(t.tail.index())] += alpha3 * w;
    }
    pooled
}

/// One-off score of `entity` for `target`.
pub fn score_entity(
    graph: &Rssg,
    entity: EntityId,
    target: EntityId,
    clusters: &ClusterAssignment,
    cfg: &ChainConfig,
) -> Result<EntityScore> {
    Scorer::new(graph, target, clusters, cfg)?.score(entity)
}
