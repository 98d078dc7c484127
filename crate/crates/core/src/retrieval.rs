use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chains::CallChain;
use crate::embedding::{cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::{Entity, EntityId, Relation, Rssg, TargetSpec};
use crate::prompt::{build_structure_tree, serialize_tree, Tokenizer};
use crate::source::Fragment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextView {
    SimFragments,
    Callers,
    Chains,
    SimFunctions,
}

impl ContextView {
    /// Prompt order.
    pub const ALL: [ContextView; 4] = [
        ContextView::SimFragments,
        ContextView::Callers,
        ContextView::Chains,
        ContextView::SimFunctions,
    ];

    pub const DEFAULT_PRIORITY: [ContextView; 4] = [
        ContextView::Chains,
        ContextView::Callers,
        ContextView::SimFunctions,
        ContextView::SimFragments,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&v| v == self).expect("listed")
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ContextView::SimFragments => "simfrag",
            ContextView::Callers => "callers",
            ContextView::Chains => "chains",
            ContextView::SimFunctions => "simfn",
        }
    }
}

impl fmt::Display for ContextView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ContextView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "chains" => Ok(ContextView::Chains),
            "callers" => Ok(ContextView::Callers),
            "simfn" | "sim_functions" => Ok(ContextView::SimFunctions),
            "simfrag" | "sim_fragments" => Ok(ContextView::SimFragments),
            other => Err(Error::InvalidArgument(format!(
                "unknown context view `{other}` (expected chains, callers, simfn or simfrag)"
            ))),
        }
    }
}

/// Parses a comma-separated priority list that names every view exactly once.
pub fn parse_priority(s: &str) -> Result<Vec<ContextView>> {
    let views = s.split(',').map(str::parse).collect::<Result<Vec<ContextView>>>()?;
    let mut sorted = views.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != 4 || views.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "priority `{s}` must list chains, callers, simfn and simfrag once each"
        )));
    }
    Ok(views)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextUnit {
    pub view: ContextView,
    /// Entity path or `file:start-end` of the source.
    pub label: String,
    pub payload: String,
    pub rank: usize,
    pub token_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

impl ContextUnit {
    pub fn new(view: ContextView, label: String, payload: String, rank: usize, tokenizer: &dyn Tokenizer) -> Self {
        let token_len = tokenizer.count(&payload);
        Self {
            view,
            label,
            payload,
            rank,
            token_len,
            similarity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourViewContext {
    pub target: TargetSpec,
    pub sim_fragments: Vec<ContextUnit>,
    pub callers: Vec<ContextUnit>,
    pub chains: Vec<ContextUnit>,
    pub sim_functions: Vec<ContextUnit>,
    /// `chain_blocks[n]` is the merged block for the first `n` chains.
    #[serde(skip)]
    pub chain_blocks: Vec<String>,
}

impl FourViewContext {
    pub fn view(&self, view: ContextView) -> &[ContextUnit] {
        match view {
            ContextView::SimFragments => &self.sim_fragments,
            ContextView::Callers => &self.callers,
            ContextView::Chains => &self.chains,
            ContextView::SimFunctions => &self.sim_functions,
        }
    }

    /// Serialized chain block for the first `n` chains.
    pub fn chain_block(&self, n: usize) -> &str {
        self.chain_blocks
            .get(n.min(self.chain_blocks.len().saturating_sub(1)))
            .map_or("", String::as_str)
    }
}

pub fn assemble_four_views(
    target: TargetSpec,
    callers: Vec<ContextUnit>,
    chains: (Vec<ContextUnit>, Vec<String>),
    sim_functions: Vec<ContextUnit>,
    sim_fragments: Vec<ContextUnit>,
) -> FourViewContext {
    FourViewContext {
        target,
        sim_fragments,
        callers,
        chains: chains.0,
        sim_functions,
        chain_blocks: chains.1,
    }
}

/// Ordering key of a candidate relative to the target: other files come
/// after the target's own, nearer files in the directory tree first, then
/// smaller line distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Distance {
    pub different_file: bool,
    pub tree_edges: usize,
    pub line_diff: usize,
}

/// Edges between two files in the directory tree; 2 for files in the same
/// directory, 0 for the same file.
pub fn tree_distance(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let pa: Vec<&str> = a.split('/').collect();
    let pb: Vec<&str> = b.split('/').collect();
    let common = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
    (pa.len() - common) + (pb.len() - common)
}

pub fn entity_distance(graph: &Rssg, a: EntityId, target: EntityId) -> Distance {
    let (a, f) = (graph.entity(a), graph.entity(target));
    Distance {
        different_file: a.file != f.file,
        tree_edges: tree_distance(&a.file, &f.file),
        line_diff: a.line_span.start.abs_diff(f.line_span.start),
    }
}

/// Strips the declaration's own indentation from every line.
fn dedent(text: &str) -> String {
    let indent = text.len() - text.trim_start_matches([' ', '\t']).len();
    text.lines()
        .map(|line| {
            let strip = line.len() - line.trim_start_matches([' ', '\t']).len();
            &line[strip.min(indent)..]
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// `# filepath: <file>, owning class: <Class>` (the class part only for methods).
pub fn function_header(graph: &Rssg, id: EntityId) -> String {
    let e = graph.entity(id);
    match graph.owner(id) {
        Some(owner) => format!("# filepath: {}, owning class: {}", e.file, graph.entity(owner).name),
        None => format!("# filepath: {}", e.file),
    }
}

fn function_payload(graph: &Rssg, e: &Entity) -> String {
    let mut text = function_header(graph, e.id);
    text.push('\n');
    text.push_str(&dedent(&e.source_text));
    text.push('\n');
    text
}

/// Functions calling the target, closest first (ties by file path, then line).
pub fn retrieve_callers(graph: &Rssg, target: EntityId, k: usize, tokenizer: &dyn Tokenizer) -> Vec<ContextUnit> {
    let mut callers: Vec<EntityId> = graph
        .incoming_with(target, Relation::Calls)
        .filter(|&h| h != target && graph.entity(h).is_function())
        .collect();
    callers.sort();
    callers.dedup();
    callers.sort_by_cached_key(|&h| {
        let e = graph.entity(h);
        (entity_distance(graph, h, target), e.file.clone(), e.line_span.start)
    });
    callers
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, h)| {
            let e = graph.entity(h);
            ContextUnit::new(
                ContextView::Callers,
                e.path.clone(),
                function_payload(graph, e),
                rank,
                tokenizer,
            )
        })
        .collect()
}

/// Functions other than the target, most similar first (ties by path).
pub fn retrieve_similar_functions(
    graph: &Rssg,
    target: EntityId,
    k: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<ContextUnit>> {
    let Some(query) = graph.entity(target).embedding.as_ref() else {
        return Err(Error::Embedding(format!("target {target} has no embedding")));
    };
    let mut scored = Vec::new();
    for e in graph.entities.iter().filter(|e| e.is_function() && e.id != target) {
        if let Some(v) = &e.embedding {
            scored.push((cosine(query, v)?, e));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.path.cmp(&b.1.path)));
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, (sim, e))| {
            let mut unit = ContextUnit::new(
                ContextView::SimFunctions,
                e.path.clone(),
                function_payload(graph, e),
                rank,
                tokenizer,
            );
            unit.similarity = Some(sim);
            unit
        })
        .collect())
}

/// Fragments most similar to `query`, skipping any that overlap the target's
/// own declaration.
pub fn retrieve_similar_fragments(
    fragments: &[Fragment],
    embeddings: &[EmbeddingVector],
    query: &EmbeddingVector,
    target: &TargetSpec,
    k: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<ContextUnit>> {
    if fragments.len() != embeddings.len() {
        return Err(Error::InvalidArgument(format!(
            "{} fragments but {} fragment embeddings",
            fragments.len(),
            embeddings.len()
        )));
    }
    let mut scored = Vec::new();
    for (fragment, v) in fragments.iter().zip(embeddings) {
        if fragment.path == target.file && target.line_span.overlaps(fragment.start_line, fragment.end_line) {
            continue;
        }
        scored.push((cosine(query, v)?, fragment));
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.path.cmp(&b.1.path))
            .then_with(|| a.1.start_line.cmp(&b.1.start_line))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, (sim, f))| {
            let payload = format!("# {}\n{}\n", f.path, f.text);
            let label = format!("{}:{}-{}", f.path, f.start_line, f.end_line);
            let mut unit = ContextUnit::new(ContextView::SimFragments, label, payload, rank, tokenizer);
            unit.similarity = Some(sim);
            unit
        })
        .collect())
}

/// One unit per selected chain (its standalone serialization) plus the merged
/// block for every prefix of the ranking.
pub fn chain_units(chains: &[CallChain], graph: &Rssg, tokenizer: &dyn Tokenizer) -> (Vec<ContextUnit>, Vec<String>) {
    let units = chains
        .iter()
        .enumerate()
        .map(|(rank, chain)| {
            let label = chain
                .core
                .entities
                .iter()
                .map(|&e| graph.entity(e).path.as_str())
                .collect::<Vec<_>>()
                .join(" -> ");
            let payload = serialize_tree(&build_structure_tree(std::slice::from_ref(chain), graph), graph);
            ContextUnit::new(ContextView::Chains, label, payload, rank, tokenizer)
        })
        .collect();
    let blocks = (0..=chains.len())
        .map(|n| serialize_tree(&build_structure_tree(&chains[..n], graph), graph))
        .collect();
    (units, blocks)
}
