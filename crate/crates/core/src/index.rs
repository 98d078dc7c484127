//! Building, persisting and loading the repository index.
//!
//! The index is a JSON document plus two binary sibling files holding entity
//! and fragment embeddings (`<stem>.entities.vec`, `<stem>.fragments.vec`).
//! Each binary file is the magic `RSSGVEC1` followed by little-endian `f32`
//! rows, row i belonging to entity (or fragment) i.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::{
    cluster_entities, default_cluster_count, embed_all, render_entity, ClusterAssignment, EmbeddingProvider,
    EmbeddingVector, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::graph::{build_graph_with_diagnostics, BuildDiagnostics, Entity, ModuleInfo, RelationTriple, Rssg};
use crate::source::{scan_repository, slice_fragments, Fragment, SourceFile};

pub const INDEX_VERSION: u32 = 1;
const VEC_MAGIC: &[u8; 8] = b"RSSGVEC1";
const EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSettings {
    pub window: usize,
    pub stride: usize,
    #[serde(default)]
    pub excludes: Vec<String>,
    /// Requested cluster count; `None` picks one from the entity count.
    #[serde(default)]
    pub clusters: Option<usize>,
    pub seed: u64,
}

impl Default for IndexSettings {
    fn default() -> Self {
        Self {
            window: 20,
            stride: 10,
            excludes: Vec::new(),
            clusters: None,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub settings: IndexSettings,
    /// Name of the embedding provider the vectors came from.
    pub provider: String,
    /// Entity embeddings live on `graph.entities[i].embedding`.
    pub graph: Rssg,
    pub fragments: Vec<Fragment>,
    pub fragment_embeddings: Vec<EmbeddingVector>,
    pub clusters: ClusterAssignment,
    /// Files that could not be read or parsed.
    pub diagnostics: Vec<String>,
}

/// Counts reported after indexing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub files: usize,
    pub entities: usize,
    pub triples: usize,
    pub fragments: usize,
    pub clusters: usize,
    pub skipped_files: usize,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    version: u32,
    settings: &'a IndexSettings,
    provider: &'a str,
    embedding_dim: usize,
    entities: &'a [Entity],
    triples: &'a [RelationTriple],
    modules: &'a [ModuleInfo],
    fragments: &'a [Fragment],
    clusters: &'a ClusterAssignment,
    diagnostics: &'a [String],
}

#[derive(Deserialize)]
struct Document {
    settings: IndexSettings,
    provider: String,
    embedding_dim: usize,
    entities: Vec<Entity>,
    triples: Vec<RelationTriple>,
    modules: Vec<ModuleInfo>,
    fragments: Vec<Fragment>,
    clusters: ClusterAssignment,
    diagnostics: Vec<String>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u32>,
}

impl Index {
    /// Scans `root` and indexes every Python file found.
    pub fn build(
        root: &Path,
        settings: &IndexSettings,
        provider: &dyn EmbeddingProvider,
    ) -> Result<(Self, BuildDiagnostics)> {
        let scan = scan_repository(root, &settings.excludes)?;
        let diagnostics = scan.diagnostics.iter().map(|d| d.to_string()).collect();
        Self::from_files(&scan.files, diagnostics, settings, provider)
    }

    /// Indexes already-parsed files.
    pub fn from_files(
        files: &[SourceFile],
        diagnostics: Vec<String>,
        settings: &IndexSettings,
        provider: &dyn EmbeddingProvider,
    ) -> Result<(Self, BuildDiagnostics)> {
        if settings.window == 0 || settings.stride == 0 {
            return Err(Error::InvalidArgument("window and stride must be positive".into()));
        }
        let models: Vec<_> = files.iter().map(|f| f.model.clone()).collect();
        let (mut graph, build_diagnostics) = build_graph_with_diagnostics(&models);

        let mut ordered: Vec<&SourceFile> = files.iter().collect();
        ordered.sort_by(|a, b| a.model.path.cmp(&b.model.path));
        let fragments: Vec<Fragment> = ordered
            .iter()
            .flat_map(|f| slice_fragments(&f.model, &f.source, settings.window, settings.stride))
            .collect();

        let entity_texts: Vec<String> = graph.entities.iter().map(render_entity).collect();
        let entity_vectors = embed_all(&entity_texts, provider, EMBED_BATCH)?;
        let fragment_texts: Vec<String> = fragments.iter().map(|f| f.text.clone()).collect();
        let fragment_embeddings = embed_all(&fragment_texts, provider, EMBED_BATCH)?;
        if let (Some(a), Some(b)) = (entity_vectors.first(), fragment_embeddings.first()) {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch(a.dim(), b.dim()));
            }
        }

        let k = settings
            .clusters
            .unwrap_or_else(|| default_cluster_count(entity_vectors.len()));
        let clusters = cluster_entities(&entity_vectors, k, settings.seed);
        for (entity, vector) in graph.entities.iter_mut().zip(entity_vectors) {
            entity.embedding = Some(vector);
        }

        Ok((
            Self {
                settings: settings.clone(),
                provider: provider.name(),
                graph,
                fragments,
                fragment_embeddings,
                clusters,
                diagnostics,
            },
            build_diagnostics,
        ))
    }

    pub fn summary(&self) -> IndexSummary {
        IndexSummary {
            files: self.graph.modules.len(),
            entities: self.graph.len(),
            triples: self.graph.triples.len(),
            fragments: self.fragments.len(),
            clusters: self.clusters.k,
            skipped_files: self.diagnostics.len(),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.graph
            .entities
            .iter()
            .find_map(|e| e.embedding.as_ref())
            .or(self.fragment_embeddings.first())
            .map_or(0, EmbeddingVector::dim)
    }

    /// The JSON document, without embeddings.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let doc = DocumentRef {
            version: INDEX_VERSION,
            settings: &self.settings,
            provider: &self.provider,
            embedding_dim: self.embedding_dim(),
            entities: &self.graph.entities,
            triples: &self.graph.triples,
            modules: &self.graph.modules,
            fragments: &self.fragments,
            clusters: &self.clusters,
            diagnostics: &self.diagnostics,
        };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Writes the JSON document and both vector files.
    pub fn persist(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let dim = self.embedding_dim();
        let entity_rows: Vec<&EmbeddingVector> = self
            .graph
            .entities
            .iter()
            .map(|e| {
                e.embedding
                    .as_ref()
                    .ok_or_else(|| Error::Embedding(format!("entity {} has no embedding", e.path)))
            })
            .collect::<Result<_>>()?;
        write_vectors(&vector_path(path, "entities"), &entity_rows, dim)?;
        let fragment_rows: Vec<&EmbeddingVector> = self.fragment_embeddings.iter().collect();
        write_vectors(&vector_path(path, "fragments"), &fragment_rows, dim)?;
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let probe: VersionProbe =
            serde_json::from_slice(&bytes).map_err(|e| Error::CorruptIndex(format!("{}: {e}", path.display())))?;
        match probe.version {
            Some(INDEX_VERSION) => {}
            Some(found) => {
                return Err(Error::IndexVersion {
                    found,
                    expected: INDEX_VERSION,
                })
            }
            None => return Err(Error::CorruptIndex(format!("{}: missing version", path.display()))),
        }
        let doc: Document =
            serde_json::from_slice(&bytes).map_err(|e| Error::CorruptIndex(format!("{}: {e}", path.display())))?;

        let mut entities = doc.entities;
        for (i, e) in entities.iter().enumerate() {
            if e.id.index() != i {
                return Err(Error::CorruptIndex(format!("entity #{i} has id {}", e.id)));
            }
        }
        if doc.clusters.cluster_of.len() != entities.len()
            || doc.clusters.cluster_of.iter().any(|&c| c >= doc.clusters.k.max(1))
        {
            return Err(Error::CorruptIndex("cluster assignment does not match entities".into()));
        }
        let entity_rows = read_vectors(&vector_path(path, "entities"), entities.len(), doc.embedding_dim)?;
        for (e, v) in entities.iter_mut().zip(entity_rows) {
            e.embedding = Some(v);
        }
        let fragment_embeddings =
            read_vectors(&vector_path(path, "fragments"), doc.fragments.len(), doc.embedding_dim)?;

        let graph = Rssg::from_parts(entities, doc.triples, doc.modules);
        if graph
            .triples
            .iter()
            .any(|t| graph.get(t.head).is_none() || graph.get(t.tail).is_none())
        {
            return Err(Error::CorruptIndex("triple references a missing entity".into()));
        }
        Ok(Self {
            settings: doc.settings,
            provider: doc.provider,
            graph,
            fragments: doc.fragments,
            fragment_embeddings,
            clusters: doc.clusters,
            diagnostics: doc.diagnostics,
        })
    }
}

/// `dir/index.json` → `dir/index.<kind>.vec`
pub fn vector_path(index_path: &Path, kind: &str) -> PathBuf {
    index_path.with_extension(format!("{kind}.vec"))
}

fn write_vectors(path: &Path, rows: &[&EmbeddingVector], dim: usize) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + rows.len() * dim * 4);
    bytes.extend_from_slice(VEC_MAGIC);
    for row in rows {
        if row.dim() != dim {
            return Err(Error::DimensionMismatch(dim, row.dim()));
        }
        for v in row.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_vectors(path: &Path, rows: usize, dim: usize) -> Result<Vec<EmbeddingVector>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..8] != VEC_MAGIC {
        return Err(Error::CorruptIndex(format!(
            "{}: bad vector file header",
            path.display()
        )));
    }
    let body = &bytes[8..];
    if body.len() != rows * dim * 4 {
        return Err(Error::CorruptIndex(format!(
            "{}: expected {rows} rows of {dim} floats, found {} bytes",
            path.display(),
            body.len()
        )));
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    body.chunks_exact(dim * 4)
        .map(|row| {
            let values = row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            EmbeddingVector::new(values).map_err(|e| Error::CorruptIndex(format!("{}: {e}", path.display())))
        })
        .collect()
}
