use serde::{Deserialize, Serialize};

/// Outcome of the two-stage allocation over N views of ranked unit lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    /// Uniform per-view budget of the first stage.
    pub share: usize,
    /// Tokens used and units taken per view after the first stage.
    pub stage1_used: Vec<usize>,
    pub stage1_selected: Vec<usize>,
    /// Final tokens used and prefix length per view.
    pub used: Vec<usize>,
    pub selected: Vec<usize>,
}

/// Longest prefix of `lengths` whose total stays within `budget`. Stops at the
/// first unit that does not fit.
pub fn fill_prefix(lengths: &[usize], budget: usize) -> (usize, usize) {
    let mut used = 0usize;
    let mut taken = 0;
    for &len in lengths {
        match used.checked_add(len) {
            Some(total) if total <= budget => {
                used = total;
                taken += 1;
            }
            _ => break,
        }
    }
    (taken, used)
}

/// Stage 1 gives every view `ell / N` tokens. Stage 2 walks `priority` (view
/// indices) and lets each view claim whatever the others leave, refilling its
/// prefix from the top of its ranking.
pub fn allocate_budget(views: &[Vec<usize>], ell: usize, priority: &[usize]) -> Allocation {
    let n = views.len();
    let share = ell.checked_div(n).unwrap_or(0);
    let mut used = Vec::with_capacity(n);
    let mut selected = Vec::with_capacity(n);
    for lengths in views {
        let (taken, tokens) = fill_prefix(lengths, share);
        selected.push(taken);
        used.push(tokens);
    }
    let stage1_used = used.clone();
    let stage1_selected = selected.clone();

    for &view in priority.iter().filter(|&&v| v < n) {
        let others: usize = used
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != view)
            .map(|(_, u)| u)
            .sum();
        let grant = ell.saturating_sub(others);
        let (taken, tokens) = fill_prefix(&views[view], grant);
        selected[view] = taken;
        used[view] = tokens;
    }
    Allocation {
        share,
        stage1_used,
        stage1_selected,
        used,
        selected,
    }
}
