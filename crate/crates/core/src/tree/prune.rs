//! Weakest-link cost-complexity pruning.
//!
//! The raw error of a subtree is minus the sum of the logrank statistics of
//! its splits, so `R_cp(Θ) = R(Θ) + cp·|leaves(Θ)|` trades split strength
//! against size. Collapsing internal node `h` raises `R` by the statistics
//! of its branch `S(h)` and removes `I(h)` leaves (its internal count), so
//! the weakest link is the node minimizing `g(h) = S(h) / I(h)`.

use super::SurvivalTree;

#[derive(Debug, Clone, PartialEq)]
pub struct PruneStep {
    /// Smallest cp at which this subtree is optimal.
    pub cp: f64,
    /// Nodes of the full tree turned into leaves, cumulative.
    pub collapsed: Vec<usize>,
    pub n_leaves: usize,
    pub raw_error: f64,
}

/// Nested subtrees from the full tree (cp = 0) down to the root alone.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSequence {
    pub steps: Vec<PruneStep>,
}

impl PruneSequence {
    /// Index of the smallest subtree minimizing `R_cp`.
    pub fn index_for(&self, cp: f64) -> usize {
        self.steps.iter().rposition(|s| s.cp <= cp).unwrap_or(0)
    }

    pub fn step_for(&self, cp: f64) -> &PruneStep {
        &self.steps[self.index_for(cp)]
    }

    pub fn subtree(&self, tree: &SurvivalTree, cp: f64) -> SurvivalTree {
        tree.collapsed(&self.step_for(cp).collapsed)
    }

    /// Thresholds `α_1 < α_2 < …` at which the optimal subtree changes.
    pub fn alphas(&self) -> Vec<f64> {
        self.steps.iter().skip(1).map(|s| s.cp).collect()
    }
}

pub fn prune_cost_complexity(tree: &SurvivalTree) -> PruneSequence {
    let n = tree.nodes.len();
    let mut cut = vec![false; n];
    let mut collapsed = Vec::new();
    let mut steps = Vec::new();
    let mut last_cp = 0.0f64;
    loop {
        // Nodes reachable from the root without passing a cut node.
        let mut reach = vec![false; n];
        reach[0] = true;
        for h in 0..n {
            if reach[h] && !cut[h] {
                if let Some(s) = &tree.nodes[h].split {
                    reach[s.left] = true;
                    reach[s.right] = true;
                }
            }
        }
        let internal = |h: usize| reach[h] && !cut[h] && tree.nodes[h].split.is_some();
        let mut branch_stat = vec![0.0; n];
        let mut branch_internal = vec![0usize; n];
        // Children follow their parent in preorder.
        for h in (0..n).rev() {
            if internal(h) {
                let s = tree.nodes[h].split.as_ref().expect("internal");
                branch_stat[h] = s.statistic + branch_stat[s.left] + branch_stat[s.right];
                branch_internal[h] = 1 + branch_internal[s.left] + branch_internal[s.right];
            }
        }
        let n_leaves = (0..n).filter(|&h| reach[h] && !internal(h)).count();
        steps.push(PruneStep {
            cp: last_cp,
            collapsed: collapsed.clone(),
            n_leaves,
            raw_error: -branch_stat[0],
        });
        if !internal(0) {
            break;
        }
        let g: Vec<(usize, f64)> = (0..n)
            .filter(|&h| internal(h))
            .map(|h| (h, branch_stat[h] / branch_internal[h] as f64))
            .collect();
        let g_min = g.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * g_min.abs();
        let mut newly: Vec<usize> = g.iter().filter(|x| x.1 <= g_min + tol).map(|x| x.0).collect();
        newly.sort_unstable();
        for &h in &newly {
            cut[h] = true;
        }
        collapsed.extend(newly);
        collapsed.sort_unstable();
        last_cp = last_cp.max(g_min);
    }
    PruneSequence { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalDataset;
    use crate::rng::rng_from_seed;
    use crate::tree::{grow, GrowParams};
    use rand::Rng as _;

    fn random_tree(seed: u64, n: usize, min_leaf: usize) -> SurvivalTree {
        let mut rng = rng_from_seed(seed);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let times: Vec<f64> = (0..n)
            .map(|i| rng.random::<f64>() * (1.0 + 2.0 * cols[0][i]) + 0.01)
            .collect();
        let events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.8).collect();
        let ds = SurvivalDataset::from_columns(&times, &events, &cols, &["a", "b", "c"]).unwrap();
        grow(&ds, &GrowParams { min_leaf, min_events: 1, max_depth: None }).unwrap()
    }

    /// Every pruned subtree as (raw error, leaves, collapsed set).
    fn enumerate(tree: &SurvivalTree, h: usize) -> Vec<(f64, usize)> {
        match &tree.nodes[h].split {
            None => vec![(0.0, 1)],
            Some(s) => {
                let mut out = vec![(0.0, 1)];
                for l in enumerate(tree, s.left) {
                    for r in enumerate(tree, s.right) {
                        out.push((l.0 + r.0 - s.statistic, l.1 + r.1));
                    }
                }
                out
            }
        }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut checked = 0;
        for seed in 0..60u64 {
            let tree = random_tree(seed, 60, 10);
            if tree.n_leaves() > 6 || tree.n_leaves() < 2 {
                continue;
            }
            checked += 1;
            let seq = prune_cost_complexity(&tree);
            let all = enumerate(&tree, 0);
            let top = seq.alphas().last().copied().unwrap_or(1.0);
            for k in 0..20 {
                let cp = top * 1.5 * k as f64 / 19.0;
                let best = all.iter().map(|(r, l)| r + cp * *l as f64).fold(f64::INFINITY, f64::min);
                let tol = 1e-9 * best.abs().max(1.0);
                let smallest = all
                    .iter()
                    .filter(|(r, l)| r + cp * *l as f64 <= best + tol)
                    .map(|x| x.1)
                    .min()
                    .unwrap();
                let step = seq.step_for(cp);
                let got = step.raw_error + cp * step.n_leaves as f64;
                assert!((got - best).abs() <= tol, "seed {seed} cp {cp}: {got} vs {best}");
                assert_eq!(step.n_leaves, smallest, "seed {seed} cp {cp}");
                let sub = seq.subtree(&tree, cp);
                assert_eq!(sub.n_leaves(), step.n_leaves);
            }
        }
        assert!(checked >= 10, "only {checked} trees checked");
    }

    #[test]
    fn sequence_is_nested_and_ends_at_root() {
        for seed in 0..10u64 {
            let tree = random_tree(seed, 150, 5);
            let seq = prune_cost_complexity(&tree);
            assert_eq!(seq.steps[0].n_leaves, tree.n_leaves());
            assert_eq!(seq.steps[0].cp, 0.0);
            assert_eq!(seq.steps.last().unwrap().n_leaves, 1);
            for w in seq.steps.windows(2) {
                assert!(w[1].n_leaves < w[0].n_leaves);
                assert!(w[1].cp > w[0].cp || w[0].cp == 0.0);
                let prev: std::collections::BTreeSet<usize> = w[0].collapsed.iter().copied().collect();
                assert!(prev.iter().all(|c| w[1].collapsed.contains(c)));
                // Subtree node sets are nested.
                let a = tree.collapsed(&w[0].collapsed);
                let b = tree.collapsed(&w[1].collapsed);
                assert!(b.nodes.len() < a.nodes.len());
            }
            assert_eq!(seq.subtree(&tree, 0.0).n_leaves(), tree.n_leaves());
            assert_eq!(seq.subtree(&tree, f64::MAX).nodes.len(), 1);
        }
    }
}
