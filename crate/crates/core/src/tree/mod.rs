//! Survival trees: logrank splitting, Nelson-Aalen leaves, cost-complexity
//! pruning and cross-validated choice of the complexity parameter.

mod cv;
mod export;
pub mod logrank;
mod prune;
pub mod split;

pub use cv::{cv_choose_cp, CvPoint, CvResult};
pub use logrank::logrank_statistic;
pub use prune::{prune_cost_complexity, PruneSequence, PruneStep};
pub use split::{best_split, Candidate};

pub(crate) use cv::cv_choose_cp_with;

use crate::bnls::NodeVote;
use crate::curve::{nelson_aalen, NelsonAalenCurve};
use crate::data::{CovariateKind, SurvivalDataset};
use crate::error::{Error, Result};

/// Column-major copy of a dataset. Trees address it by row index, so
/// bootstrap samples are plain index lists with repeats.
#[derive(Debug, Clone)]
pub struct TreeData {
    pub(crate) columns: Vec<Vec<f64>>,
    pub(crate) times: Vec<f64>,
    pub(crate) events: Vec<bool>,
    pub(crate) n_levels: Vec<Option<usize>>,
    pub(crate) names: Vec<String>,
    pub(crate) levels: Vec<Option<Vec<String>>>,
}

impl TreeData {
    pub fn from_dataset(ds: &SurvivalDataset) -> Self {
        TreeData {
            columns: (0..ds.p()).map(|j| ds.column(j)).collect(),
            times: ds.times(),
            events: ds.events(),
            n_levels: ds.specs().iter().map(|s| s.n_levels()).collect(),
            names: ds.names(),
            levels: ds
                .specs()
                .iter()
                .map(|s| match &s.kind {
                    CovariateKind::Categorical { levels } => Some(levels.clone()),
                    CovariateKind::Continuous => None,
                })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub(crate) fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub(crate) fn node_curve(&self, rows: &[usize]) -> NelsonAalenCurve {
        let t: Vec<f64> = rows.iter().map(|&r| self.times[r]).collect();
        let e: Vec<bool> = rows.iter().map(|&r| self.events[r]).collect();
        nelson_aalen(&t, &e)
    }
}

/// `Threshold` sends `z ≤ threshold` left. `Levels` sends the listed level
/// codes left or right; a level seen by neither side goes to the daughter
/// that held more training rows (`unseen_left`).
#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    Threshold {
        covariate: usize,
        threshold: f64,
    },
    Levels {
        covariate: usize,
        left: Vec<usize>,
        right: Vec<usize>,
        unseen_left: bool,
    },
}

impl SplitRule {
    pub fn covariate(&self) -> usize {
        match self {
            SplitRule::Threshold { covariate, .. } | SplitRule::Levels { covariate, .. } => *covariate,
        }
    }

    /// `(goes_left, unseen_level)` for a full covariate vector.
    pub fn route(&self, z: &[f64]) -> (bool, bool) {
        self.route_value(z[self.covariate()])
    }

    /// `(goes_left, unseen_level)` for the value of the split covariate.
    pub fn route_value(&self, v: f64) -> (bool, bool) {
        match self {
            SplitRule::Threshold { threshold, .. } => (v <= *threshold, false),
            SplitRule::Levels {
                left, right, unseen_left, ..
            } => {
                if v.is_finite() && v >= 0.0 {
                    let code = v as usize;
                    if left.contains(&code) {
                        return (true, false);
                    }
                    if right.contains(&code) {
                        return (false, false);
                    }
                }
                (*unseen_left, true)
            }
        }
    }

    pub fn describe(&self, names: &[String], levels: &[Option<Vec<String>>]) -> (String, String) {
        match self {
            SplitRule::Threshold { covariate, threshold } => (
                format!("{} <= {}", names[*covariate], threshold),
                format!("{} > {}", names[*covariate], threshold),
            ),
            SplitRule::Levels {
                covariate, left, right, ..
            } => {
                let label = |codes: &[usize]| -> String {
                    let lv = levels[*covariate].as_deref().unwrap_or(&[]);
                    codes
                        .iter()
                        .map(|&c| lv.get(c).cloned().unwrap_or_else(|| c.to_string()))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                (
                    format!("{} in {{{}}}", names[*covariate], label(left)),
                    format!("{} in {{{}}}", names[*covariate], label(right)),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    pub rule: SplitRule,
    pub left: usize,
    pub right: usize,
    /// Logrank statistic of the split on the node's training rows.
    pub statistic: f64,
    pub vote: Option<NodeVote>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub depth: usize,
    /// Training rows (indices into the grown-on data; repeats for bootstrap
    /// samples).
    pub samples: Vec<usize>,
    pub n_events: usize,
    /// Nelson-Aalen curve of the node's rows; the prediction when the node
    /// is a leaf.
    pub curve: NelsonAalenCurve,
    pub split: Option<NodeSplit>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Binary tree stored as an arena in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTree {
    pub nodes: Vec<TreeNode>,
    pub names: Vec<String>,
    pub levels: Vec<Option<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowParams {
    pub min_leaf: usize,
    /// Minimum number of distinct event times in each daughter.
    pub min_events: usize,
    pub max_depth: Option<usize>,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams {
            min_leaf: 20,
            min_events: 3,
            max_depth: None,
        }
    }
}

/// What a split finder sees at one node.
pub(crate) struct NodeContext<'a> {
    pub id: usize,
    pub rows: &'a [usize],
}

pub(crate) struct FoundSplit {
    pub rule: SplitRule,
    pub statistic: f64,
    pub vote: Option<NodeVote>,
}

impl SurvivalTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Leaf reached by `z`, plus whether an unseen categorical level was
    /// routed by the majority rule on the way.
    pub fn leaf_for(&self, z: &[f64]) -> (&TreeNode, bool) {
        let mut node = &self.nodes[0];
        let mut unseen = false;
        while let Some(s) = &node.split {
            let (left, u) = s.rule.route(z);
            unseen |= u;
            node = &self.nodes[if left { s.left } else { s.right }];
        }
        (node, unseen)
    }

    pub fn predict_chf(&self, z: &[f64]) -> &NelsonAalenCurve {
        let (leaf, unseen) = self.leaf_for(z);
        if unseen {
            log::warn!("unseen categorical level routed to the larger daughter");
        }
        &leaf.curve
    }

    /// Covariates used by at least one split.
    pub fn split_covariates(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.rule.covariate()))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Copy with the listed nodes turned into leaves; descendants of a
    /// collapsed node are dropped and ids renumbered in preorder.
    pub fn collapsed(&self, collapse: &[usize]) -> SurvivalTree {
        let mut cut = vec![false; self.nodes.len()];
        for &c in collapse {
            cut[c] = true;
        }
        let mut nodes: Vec<TreeNode> = Vec::new();
        // (old id, parent new id, is_left)
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((old, parent)) = stack.pop() {
            let new_id = nodes.len();
            let mut node = self.nodes[old].clone();
            node.id = new_id;
            if let Some((p, is_left)) = parent {
                let s = nodes[p].split.as_mut().expect("parent is internal");
                if is_left {
                    s.left = new_id;
                } else {
                    s.right = new_id;
                }
            }
            if cut[old] {
                node.split = None;
            }
            if let Some(s) = &node.split {
                stack.push((s.right, Some((new_id, false))));
                stack.push((s.left, Some((new_id, true))));
            }
            nodes.push(node);
        }
        SurvivalTree {
            nodes,
            names: self.names.clone(),
            levels: self.levels.clone(),
        }
    }
}

/// Grows a tree on `rows` of `data`, asking `finder` for the split at every
/// node that passes the stopping rules. Nodes are numbered in preorder.
pub(crate) fn grow_with<F>(data: &TreeData, rows: Vec<usize>, params: &GrowParams, mut finder: F) -> SurvivalTree
where
    F: FnMut(&NodeContext<'_>) -> Option<FoundSplit>,
{
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(rows, 0, None)];
    while let Some((rows, depth, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some((p, is_left)) = parent {
            let s = nodes[p].split.as_mut().expect("parent is internal");
            if is_left {
                s.left = id;
            } else {
                s.right = id;
            }
        }
        let n_events = rows.iter().filter(|&&r| data.events[r]).count();
        let curve = data.node_curve(&rows);
        let can_split = n_events > 0
            && rows.len() >= 2 * params.min_leaf.max(1)
            && params.max_depth.is_none_or(|d| depth < d);
        let found = if can_split {
            finder(&NodeContext { id, rows: &rows })
        } else {
            None
        };
        let mut split = None;
        let mut daughters = None;
        if let Some(f) = found {
            let col = &data.columns[f.rule.covariate()];
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| f.rule.route_value(col[i]).0);
            if !l.is_empty() && !r.is_empty() {
                split = Some(NodeSplit {
                    rule: f.rule,
                    left: usize::MAX,
                    right: usize::MAX,
                    statistic: f.statistic,
                    vote: f.vote,
                });
                daughters = Some((l, r));
            }
        }
        nodes.push(TreeNode {
            id,
            depth,
            samples: rows,
            n_events,
            curve,
            split,
        });
        if let Some((l, r)) = daughters {
            stack.push((r, depth + 1, Some((id, false))));
            stack.push((l, depth + 1, Some((id, true))));
        }
    }
    SurvivalTree {
        nodes,
        names: data.names.clone(),
        levels: data.levels.clone(),
    }
}

/// Exhaustive-search tree on the given rows.
pub fn grow_rows(data: &TreeData, rows: Vec<usize>, params: &GrowParams) -> SurvivalTree {
    let all: Vec<usize> = (0..data.p()).collect();
    grow_with(data, rows, params, |ctx| {
        best_split(data, ctx.rows, &all, params).map(|c| FoundSplit {
            rule: c.rule,
            statistic: c.statistic,
            vote: None,
        })
    })
}

/// Grows an unpruned tree on the whole dataset. Data without events give a
/// single leaf with a zero curve.
pub fn grow(ds: &SurvivalDataset, params: &GrowParams) -> Result<SurvivalTree> {
    validate_params(params)?;
    if ds.n() == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    if ds.n_events() == 0 {
        log::warn!("no events: the tree is a single leaf with a zero hazard");
    }
    let data = TreeData::from_dataset(ds);
    Ok(grow_rows(&data, (0..ds.n()).collect(), params))
}

pub(crate) fn validate_params(params: &GrowParams) -> Result<()> {
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    Ok(())
}

/// How the complexity parameter of a pruned tree is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpChoice {
    Fixed(f64),
    CrossValidate { folds: usize },
}

/// A grown tree, its prune sequence and the subtree kept at `cp`.
#[derive(Debug, Clone)]
pub struct TreeFit {
    pub tree: SurvivalTree,
    pub full: SurvivalTree,
    pub sequence: PruneSequence,
    pub cp: f64,
    pub cv: Option<CvResult>,
}

/// Grows the exhaustive-search tree on `ds` and prunes it.
pub fn fit_tree(ds: &SurvivalDataset, params: &GrowParams, cp: CpChoice, seed: u64) -> Result<TreeFit> {
    let full = grow(ds, params)?;
    let data = TreeData::from_dataset(ds);
    let (cp, cv) = match cp {
        CpChoice::Fixed(cp) => (cp, None),
        CpChoice::CrossValidate { folds } => {
            let cv = cv_choose_cp_with(&data, &full, folds, seed, |rows, _| grow_rows(&data, rows, params))?;
            (cv.cp, Some(cv))
        }
    };
    let sequence = prune_cost_complexity(&full);
    let tree = sequence.subtree(&full, cp);
    Ok(TreeFit {
        tree,
        full,
        sequence,
        cp,
        cv,
    })
}

/// Maps the columns of `ds` onto the covariate layout of a fitted tree, by
/// name; categorical labels are translated to the tree's level codes and
/// unknown labels become NaN (routed as unseen).
pub(crate) fn align_rows(
    names: &[String],
    levels: &[Option<Vec<String>>],
    ds: &SurvivalDataset,
) -> Result<Vec<Vec<f64>>> {
    let mut maps: Vec<(usize, Option<Vec<f64>>)> = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let k = ds
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        let map = match (&levels[j], &ds.specs()[k].kind) {
            (Some(train), CovariateKind::Categorical { levels: test }) => Some(
                test.iter()
                    .map(|lab| train.iter().position(|t| t == lab).map_or(f64::NAN, |c| c as f64))
                    .collect(),
            ),
            (Some(_), CovariateKind::Continuous) | (None, CovariateKind::Categorical { .. }) => {
                return Err(Error::invalid(format!("covariate {name} changed type")));
            }
            (None, CovariateKind::Continuous) => None,
        };
        maps.push((k, map));
    }
    Ok(ds
        .records()
        .iter()
        .map(|r| {
            maps.iter()
                .map(|(k, m)| {
                    let v = r.covariates[*k];
                    match m {
                        Some(codes) => codes[v as usize],
                        None => v,
                    }
                })
                .collect()
        })
        .collect())
}

/// Anything that maps a covariate vector to a cumulative hazard curve.
/// Unseen levels are routed without a warning here; callers report them.
pub trait ChfPredictor: Sync {
    fn covariate_names(&self) -> &[String];
    fn covariate_levels(&self) -> &[Option<Vec<String>>];
    fn chf(&self, z: &[f64]) -> NelsonAalenCurve;
    /// `Σ_k Ĥ(t_k | z)` over an ascending grid.
    fn summed_chf(&self, z: &[f64], grid: &[f64]) -> f64 {
        self.chf(z).sum_over(grid)
    }
}

impl ChfPredictor for SurvivalTree {
    fn covariate_names(&self) -> &[String] {
        &self.names
    }
    fn covariate_levels(&self) -> &[Option<Vec<String>>] {
        &self.levels
    }
    fn chf(&self, z: &[f64]) -> NelsonAalenCurve {
        self.leaf_for(z).0.curve.clone()
    }
    fn summed_chf(&self, z: &[f64], grid: &[f64]) -> f64 {
        self.leaf_for(z).0.curve.sum_over(grid)
    }
}
