use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{predict, CallChain, ChainConfig, PredictOptions};
use crate::error::{Error, Result};
use crate::graph::{imported_entities, EntityId, Relation, Rssg, TargetSpec};
use crate::index::Index;

/// Largest `k_chain` tried when matching callee counts across variants.
pub const K_SEARCH_MAX: usize = 64;
/// Allowed gap between a variant's mean callee count and the reference.
pub const MATCH_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "no-wes")]
    NoWes,
    #[serde(rename = "no-dfs")]
    NoDfs,
    #[serde(rename = "no-cce")]
    NoCce,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoWes, Variant::NoDfs, Variant::NoCce];

    pub fn options(self) -> PredictOptions {
        let mut o = PredictOptions::default();
        match self {
            Variant::Full => {}
            Variant::NoWes => o.weighted = false,
            Variant::NoDfs => o.dfs = false,
            Variant::NoCce => o.extend = false,
        }
        o
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NoWes => "no-wes",
            Variant::NoDfs => "no-dfs",
            Variant::NoCce => "no-cce",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Variant::Full),
            "no-wes" => Ok(Variant::NoWes),
            "no-dfs" => Ok(Variant::NoDfs),
            "no-cce" => Ok(Variant::NoCce),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant `{other}` (expected full, no-wes, no-dfs or no-cce)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from raw counts. Nothing predicted and nothing
/// expected counts as a perfect score.
pub fn prf_from_counts(hits: usize, predicted: usize, truth: usize) -> Prf {
    if predicted == 0 && truth == 0 {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let precision = if predicted == 0 {
        0.0
    } else {
        hits as f64 / predicted as f64
    };
    let recall = if truth == 0 { 0.0 } else { hits as f64 / truth as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

pub fn f1<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>) -> Prf {
    prf_from_counts(predicted.intersection(truth).count(), predicted.len(), truth.len())
}

/// Entities the function's body really calls. `None` when the body is not in
/// the corpus.
pub fn ground_truth_callees(graph: &Rssg, f: EntityId) -> Option<BTreeSet<EntityId>> {
    let e = graph.get(f)?;
    if !e.is_function() || e.source_text.is_empty() {
        return None;
    }
    Some(graph.outgoing_with(f, Relation::Calls).filter(|&t| t != f).collect())
}

/// Core entities of the chains, minus the entities the target could already
/// reach directly.
pub fn predicted_callees(chains: &[CallChain], imported: &BTreeSet<EntityId>) -> BTreeSet<EntityId> {
    chains
        .iter()
        .flat_map(|c| c.core.entities.iter().copied())
        .filter(|e| !imported.contains(e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub repo: String,
    pub target: String,
    pub predicted: Vec<String>,
    pub truth: Vec<String>,
    pub hits: usize,
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub k_chain: usize,
    /// Whether `mean_predicted` lies within tolerance of the reference.
    pub matched: bool,
    pub mean_predicted: f64,
    pub hits: usize,
    pub predicted: usize,
    pub truth: usize,
    pub micro: Prf,
    /// Micro scores with both sides restricted to function entities.
    pub functions_only: Prf,
    pub targets: Vec<TargetResult>,
}

struct Case<'a> {
    repo: &'a Index,
    repo_name: String,
    graph: Rssg,
    target: TargetSpec,
    imported: BTreeSet<EntityId>,
    truth: BTreeSet<EntityId>,
}

/// Every function in the corpus with a non-empty body-derived callee set,
/// its body masked.
fn cases(corpus: &[(String, Index)]) -> Vec<Case<'_>> {
    let mut out = Vec::new();
    for (name, index) in corpus {
        for e in index.graph.entities.iter().filter(|e| e.is_function()) {
            let Some(truth) = ground_truth_callees(&index.graph, e.id) else {
                continue;
            };
            if truth.is_empty() || e.embedding.is_none() {
                continue;
            }
            let mut graph = index.graph.clone();
            graph.mask_body(e.id);
            let target = TargetSpec::from_entity(&graph, e.id);
            let imported = imported_entities(&graph, &target);
            out.push(Case {
                repo: index,
                repo_name: name.clone(),
                graph,
                target,
                imported,
                truth,
            });
        }
    }
    out
}

/// Number of maskable targets (functions with a non-empty callee set).
pub fn count_targets(corpus: &[(String, Index)]) -> usize {
    corpus
        .iter()
        .map(|(_, index)| {
            index
                .graph
                .entities
                .iter()
                .filter(|e| ground_truth_callees(&index.graph, e.id).is_some_and(|t| !t.is_empty()))
                .count()
        })
        .sum()
}

/// Selections with `k_chain` uncapped; the selection for any smaller `k` is
/// a prefix of these.
fn ranked(cases: &[Case<'_>], cfg: &ChainConfig, variant: Variant) -> Result<Vec<Vec<CallChain>>> {
    let cfg = ChainConfig {
        k_chain: usize::MAX,
        ..cfg.clone()
    };
    cases
        .par_iter()
        .map(|c| predict(&c.graph, &c.target, &c.repo.clusters, &cfg, variant.options()))
        .collect()
}

fn report(cases: &[Case<'_>], ranked: &[Vec<CallChain>], variant: Variant, k: usize, matched: bool) -> EvalReport {
    let mut targets = Vec::with_capacity(cases.len());
    let (mut hits, mut predicted, mut truth) = (0, 0, 0);
    let (mut fn_hits, mut fn_predicted, mut fn_truth) = (0, 0, 0);
    for (case, chains) in cases.iter().zip(ranked) {
        let pred = predicted_callees(&chains[..k.min(chains.len())], &case.imported);
        let g = &case.graph;
        let is_fn = |e: &&EntityId| g.entity(**e).is_function();
        let h = pred.intersection(&case.truth).count();
        hits += h;
        predicted += pred.len();
        truth += case.truth.len();
        fn_hits += pred.intersection(&case.truth).filter(is_fn).count();
        fn_predicted += pred.iter().filter(is_fn).count();
        fn_truth += case.truth.iter().filter(is_fn).count();
        let paths = |s: &BTreeSet<EntityId>| s.iter().map(|&e| g.entity(e).path.clone()).collect();
        targets.push(TargetResult {
            repo: case.repo_name.clone(),
            target: format!("{}:{}", case.target.file, case.target.qualified_name),
            predicted: paths(&pred),
            truth: paths(&case.truth),
            hits: h,
            scores: f1(&pred, &case.truth),
        });
    }
    EvalReport {
        variant,
        k_chain: k,
        matched,
        mean_predicted: if cases.is_empty() {
            0.0
        } else {
            predicted as f64 / cases.len() as f64
        },
        hits,
        predicted,
        truth,
        micro: prf_from_counts(hits, predicted, truth),
        functions_only: prf_from_counts(fn_hits, fn_predicted, fn_truth),
        targets,
    }
}

fn mean_count(cases: &[Case<'_>], ranked: &[Vec<CallChain>], k: usize) -> f64 {
    if cases.is_empty() {
        return 0.0;
    }
    let total: usize = cases
        .iter()
        .zip(ranked)
        .map(|(c, chains)| predicted_callees(&chains[..k.min(chains.len())], &c.imported).len())
        .sum();
    total as f64 / cases.len() as f64
}

/// Runs every variant over the corpus. The full variant uses `cfg.k_chain`;
/// each other variant gets the smallest `k_chain` whose mean predicted-callee
/// count falls within tolerance of the full variant's (or the closest one).
pub fn run_benchmark(corpus: &[(String, Index)], variants: &[Variant], cfg: &ChainConfig) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let cases = cases(corpus);
    if cases.is_empty() {
        return Ok(Vec::new());
    }
    let full = ranked(&cases, cfg, Variant::Full)?;
    let reference = mean_count(&cases, &full, cfg.k_chain);
    let mut reports = Vec::new();
    for &variant in variants {
        if variant == Variant::Full {
            reports.push(report(&cases, &full, variant, cfg.k_chain, true));
            continue;
        }
        let chains = ranked(&cases, cfg, variant)?;
        let gaps: Vec<(usize, f64)> = (0..=K_SEARCH_MAX)
            .map(|k| (k, (mean_count(&cases, &chains, k) - reference).abs()))
            .collect();
        let (k, matched) = match gaps.iter().find(|(_, gap)| *gap <= MATCH_TOLERANCE) {
            Some(&(k, _)) => (k, true),
            None => {
                let &(k, _) = gaps.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty range");
                (k, false)
            }
        };
        reports.push(report(&cases, &chains, variant, k, matched));
    }
    Ok(reports)
}
