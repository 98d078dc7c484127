mod budget;
mod tokens;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use budget::{allocate_budget, fill_prefix, Allocation};
pub use tokens::{count_tokens, ByteApprox, Tokenizer};
pub use tree::{build_structure_tree, serialize_lines, serialize_tree, SerializedLine, StructureTree, TreeNode};

use crate::error::{Error, Result};
use crate::graph::TargetSpec;
use crate::retrieval::{ContextView, FourViewContext};

pub const DEFAULT_ELL: usize = 4096;

const INSTRUCTION: &str =
    "You need to implement the function located at the end of the instruction based on relevant repository information.";
const IMPLEMENT: &str = "Please implement the following function:";

fn view_header(view: ContextView) -> &'static str {
    match view {
        ContextView::SimFragments => "1. Here are some relevant code fragments from the repo:",
        ContextView::Callers => "2. Here are some functions in the repo that invoke the target function:",
        ContextView::Chains => {
            "3. Here are some relevant classes, functions, or attributes in the repo that you might use in the target function:"
        }
        ContextView::SimFunctions => "4. Here are some functions in the repo that are similar to the target function:",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub stage1_tokens: usize,
    pub stage1_units: usize,
    pub tokens: usize,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub ell: usize,
    /// Tokens reserved for the instruction, section headers and target.
    pub overhead: usize,
    /// Budget shared by the four views: `ell - overhead`.
    pub available: usize,
    pub share: usize,
    pub priority: Vec<ContextView>,
    pub views: BTreeMap<ContextView, ViewPlan>,
}

impl PromptPlan {
    pub fn selected(&self, view: ContextView) -> usize {
        self.views.get(&view).map_or(0, |v| v.units)
    }

    pub fn total_tokens(&self) -> usize {
        self.views.values().map(|v| v.tokens).sum()
    }
}

/// Costs the allocator sees for each view. Chain units are priced by how much
/// each one grows the merged block, so a selected prefix costs exactly what
/// its merged rendering costs (or more, never less).
fn unit_costs(ctx: &FourViewContext, view: ContextView, tokenizer: &dyn Tokenizer) -> Vec<usize> {
    match view {
        ContextView::Chains => {
            let sizes: Vec<usize> = (0..=ctx.chains.len())
                .map(|n| tokenizer.count(ctx.chain_block(n)))
                .collect();
            sizes.windows(2).map(|w| w[1].saturating_sub(w[0])).collect()
        }
        _ => ctx.view(view).iter().map(|u| u.token_len).collect(),
    }
}

/// Subtracts the fixed prompt text from `ell`, then runs the two-stage
/// allocation over the four views.
pub fn plan_prompt(
    ctx: &FourViewContext,
    ell: usize,
    priority: &[ContextView],
    tokenizer: &dyn Tokenizer,
) -> Result<PromptPlan> {
    if ell == 0 {
        return Err(Error::InvalidArgument("token budget must be positive".into()));
    }
    let separators: usize = ContextView::ALL
        .iter()
        .filter(|&&v| v != ContextView::Chains)
        .map(|&v| ctx.view(v).len().saturating_sub(1))
        .sum();
    let overhead = tokenizer.count(&render(ctx, &|_| String::new(), true)) + tokenizer.count(&"\n".repeat(separators));
    let available = ell.saturating_sub(overhead);
    let costs: Vec<Vec<usize>> = ContextView::ALL
        .iter()
        .map(|&v| unit_costs(ctx, v, tokenizer))
        .collect();
    let order: Vec<usize> = priority.iter().map(|v| v.index()).collect();
    let allocation = allocate_budget(&costs, available, &order);
    let views = ContextView::ALL
        .iter()
        .map(|&v| {
            let i = v.index();
            (
                v,
                ViewPlan {
                    stage1_tokens: allocation.stage1_used[i],
                    stage1_units: allocation.stage1_selected[i],
                    tokens: allocation.used[i],
                    units: allocation.selected[i],
                },
            )
        })
        .collect();
    Ok(PromptPlan {
        ell,
        overhead,
        available,
        share: allocation.share,
        priority: priority.to_vec(),
        views,
    })
}

/// Full prompt: instruction, the four numbered context sections, then the
/// target's imports, header comment, signature and docstring.
pub fn compose_prompt(ctx: &FourViewContext, plan: &PromptPlan) -> String {
    render(
        ctx,
        &|view| match view {
            ContextView::Chains => ctx.chain_block(plan.selected(ContextView::Chains)).to_string(),
            other => {
                let units = &ctx.view(other)[..plan.selected(other).min(ctx.view(other).len())];
                units.iter().map(|u| u.payload.as_str()).collect::<Vec<_>>().join("\n")
            }
        },
        false,
    )
}

fn render(ctx: &FourViewContext, body: &dyn Fn(ContextView) -> String, always_fence: bool) -> String {
    let mut out = String::new();
    out.push_str(INSTRUCTION);
    out.push_str("\n\n");
    for view in ContextView::ALL {
        out.push_str(view_header(view));
        out.push('\n');
        let text = body(view);
        if always_fence || !text.is_empty() {
            out.push_str("\n```python\n");
            out.push_str(&text);
            out.push_str("```\n");
        }
        out.push('\n');
    }
    out.push_str(IMPLEMENT);
    out.push_str("\n\n```python\n");
    out.push_str(&target_block(&ctx.target));
    out.push_str("```\n");
    out
}

/// Imports of the target's module, its header comment, signature and docstring.
pub fn target_block(target: &TargetSpec) -> String {
    let mut out = String::new();
    if !target.local_context.is_empty() {
        out.push_str(&target.local_context);
        out.push_str("\n\n");
    }
    match &target.owner_name {
        Some(owner) => out.push_str(&format!("# filepath: {}, owning class: {owner}\n", target.file)),
        None => out.push_str(&format!("# filepath: {}\n", target.file)),
    }
    let signature: Vec<&str> = target
        .signature
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    out.push_str(&signature.join("\n"));
    out.push_str(":\n");
    if !target.docstring.is_empty() {
        out.push_str("    \"\"\"\n");
        for line in target.docstring.lines() {
            if !line.is_empty() {
                out.push_str("    ");
                out.push_str(line);
            }
            out.push('\n');
        }
        out.push_str("    \"\"\"\n");
    }
    out
}
