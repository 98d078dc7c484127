use serde::Serialize;

use crate::chains::{predict, CallChain, ChainConfig, PredictOptions};
use crate::embedding::{embed, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::graph::{Rssg, TargetSpec};
use crate::index::Index;
use crate::prompt::{compose_prompt, plan_prompt, PromptPlan, Tokenizer, DEFAULT_ELL};
use crate::retrieval::{
    assemble_four_views, chain_units, retrieve_callers, retrieve_similar_fragments, retrieve_similar_functions,
    ContextView, FourViewContext,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub chain: ChainConfig,
    pub k_caller: usize,
    pub k_sim_function: usize,
    pub k_sim_fragment: usize,
    pub ell: usize,
    pub priority: Vec<ContextView>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::default(),
            k_caller: 5,
            k_sim_function: 5,
            k_sim_fragment: 5,
            ell: DEFAULT_ELL,
            priority: ContextView::DEFAULT_PRIORITY.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutput {
    pub target: TargetSpec,
    pub chains: Vec<CallChain>,
    pub context: FourViewContext,
    pub plan: PromptPlan,
    pub prompt: String,
}

/// The index graph with the target's body hidden, plus the resolved target.
pub fn masked_target(index: &Index, target: &str) -> Result<(Rssg, TargetSpec)> {
    let spec = TargetSpec::parse(&index.graph, target)?;
    let mut graph = index.graph.clone();
    graph.mask_body(spec.entity);
    Ok((graph, spec))
}

fn check_provider(index: &Index, provider: &dyn EmbeddingProvider) -> Result<()> {
    if provider.name() != index.provider {
        return Err(Error::InvalidArgument(format!(
            "index was embedded with `{}` but the configured provider is `{}`",
            index.provider,
            provider.name()
        )));
    }
    Ok(())
}

pub fn predict_chains(index: &Index, target: &str, cfg: &ChainConfig) -> Result<(Rssg, TargetSpec, Vec<CallChain>)> {
    let (graph, spec) = masked_target(index, target)?;
    let chains = predict(&graph, &spec, &index.clusters, cfg, PredictOptions::default())?;
    Ok((graph, spec, chains))
}

/// Chains plus the three retrieved views for `target`.
pub fn build_context(
    index: &Index,
    target: &str,
    provider: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<(Vec<CallChain>, FourViewContext)> {
    check_provider(index, provider)?;
    let (graph, spec, chains) = predict_chains(index, target, &cfg.chain)?;
    let callers = retrieve_callers(&graph, spec.entity, cfg.k_caller, tokenizer);
    let sim_functions = retrieve_similar_functions(&graph, spec.entity, cfg.k_sim_function, tokenizer)?;
    let query = embed(&spec.query_text(), provider)?;
    let sim_fragments = retrieve_similar_fragments(
        &index.fragments,
        &index.fragment_embeddings,
        &query,
        &spec,
        cfg.k_sim_fragment,
        tokenizer,
    )?;
    let units = chain_units(&chains, &graph, tokenizer);
    let context = assemble_four_views(spec, callers, units, sim_functions, sim_fragments);
    Ok((chains, context))
}

/// Chains, four views, budget plan and the composed prompt.
pub fn run_pipeline(
    index: &Index,
    target: &str,
    provider: &dyn EmbeddingProvider,
    cfg: &PipelineConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<PipelineOutput> {
    let (chains, context) = build_context(index, target, provider, cfg, tokenizer)?;
    let plan = plan_prompt(&context, cfg.ell, &cfg.priority, tokenizer)?;
    let prompt = compose_prompt(&context, &plan);
    Ok(PipelineOutput {
        target: context.target.clone(),
        chains,
        context,
        plan,
        prompt,
    })
}
