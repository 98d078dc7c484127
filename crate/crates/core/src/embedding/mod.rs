//! Entity text rendering, embedding providers, cosine similarity and clustering.

mod kmeans;
mod provider;

pub use kmeans::{cluster_entities, default_cluster_count, ClusterAssignment, DEFAULT_SEED};
pub use provider::{embed, embed_all, EmbeddingProvider, HashedProvider, RemoteProvider};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Entity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Rejects empty vectors and non-finite components.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Embedding("empty embedding vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding("embedding has NaN or infinite components".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// The tagged text an entity is embedded from. A missing docstring renders as
/// an empty description.
pub fn render_entity(e: &Entity) -> String {
    format!(
        "<name>{}</name><signature>{}</signature><description>{}</description><path>{}</path>",
        e.name, e.signature, e.docstring, e.path
    )
}
