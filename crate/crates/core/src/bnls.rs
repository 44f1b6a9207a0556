//! Bootstrap node-level stabilization: at every node the split is decided
//! by a vote over best splits found on bootstrap resamples of the node.

use rayon::prelude::*;

use crate::data::{bootstrap_indices, SurvivalDataset};
use crate::error::Result;
use crate::rng::{stream, stream_seed, tag};
use crate::tree::{
    best_split, cv_choose_cp_with, grow_with, logrank_statistic, prune_cost_complexity, validate_params, CpChoice,
    FoundSplit, GrowParams, SplitRule, SurvivalTree, TreeData, TreeFit,
};

pub const DEFAULT_REPLICATES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeVote {
    pub replicates: usize,
    /// Per covariate, the number of replicates whose best split used it.
    pub tallies: Vec<usize>,
    pub winner: usize,
    /// Best split of each replicate, `None` where none was admissible.
    pub proposals: Vec<Option<SplitRule>>,
}

impl NodeVote {
    pub fn replicates_with_split(&self) -> usize {
        self.tallies.iter().sum()
    }

    pub fn winner_fraction(&self) -> f64 {
        self.tallies[self.winner] as f64 / self.replicates as f64
    }
}

/// Voted split of `rows`. The winning covariate is the most frequent one
/// among replicate best splits (ties to the lower index). A continuous
/// threshold is the lower median of the thresholds proposed for the
/// winner; a categorical level goes to the side most replicates put it on
/// (ties left), falling back to the most common proposed partition if that
/// leaves one side empty. The statistic is recomputed on `rows`.
pub fn stabilized_split(
    data: &TreeData,
    rows: &[usize],
    params: &GrowParams,
    replicates: usize,
    seed: u64,
) -> Option<(SplitRule, f64, NodeVote)> {
    let candidates: Vec<usize> = (0..data.p()).collect();
    let proposals: Vec<Option<SplitRule>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, tag::REPLICATE, r);
            let sample: Vec<usize> = bootstrap_indices(rows.len(), &mut rng).into_iter().map(|k| rows[k]).collect();
            best_split(data, &sample, &candidates, params).map(|c| c.rule)
        })
        .collect();
    let mut tallies = vec![0usize; data.p()];
    for p in proposals.iter().flatten() {
        tallies[p.covariate()] += 1;
    }
    let top = *tallies.iter().max()?;
    if top == 0 {
        return None;
    }
    let winner = tallies.iter().position(|&t| t == top).expect("max exists");
    let won: Vec<&SplitRule> = proposals.iter().flatten().filter(|p| p.covariate() == winner).collect();
    let column = &data.columns[winner];
    let rule = match won[0] {
        SplitRule::Threshold { .. } => {
            let mut b: Vec<f64> = won
                .iter()
                .map(|p| match p {
                    SplitRule::Threshold { threshold, .. } => *threshold,
                    SplitRule::Levels { .. } => unreachable!("one covariate, one kind"),
                })
                .collect();
            b.sort_by(f64::total_cmp);
            SplitRule::Threshold {
                covariate: winner,
                threshold: b[(b.len() - 1) / 2],
            }
        }
        SplitRule::Levels { .. } => voted_levels(winner, &won, column, rows),
    };
    let group: Vec<bool> = rows.iter().map(|&r| rule.route_value(column[r]).0).collect();
    let times: Vec<f64> = rows.iter().map(|&r| data.times[r]).collect();
    let events: Vec<bool> = rows.iter().map(|&r| data.events[r]).collect();
    let statistic = logrank_statistic(&times, &events, &group).ok()?;
    let vote = NodeVote {
        replicates,
        tallies,
        winner,
        proposals,
    };
    Some((rule, statistic, vote))
}

fn voted_levels(j: usize, won: &[&SplitRule], column: &[f64], rows: &[usize]) -> SplitRule {
    let mut present: Vec<usize> = rows.iter().map(|&r| column[r] as usize).collect();
    present.sort_unstable();
    present.dedup();
    let sides = |p: &SplitRule| match p {
        SplitRule::Levels { left, right, .. } => (left.clone(), right.clone()),
        SplitRule::Threshold { .. } => unreachable!("one covariate, one kind"),
    };
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &l in &present {
        let mut votes_left = 0usize;
        let mut votes_right = 0usize;
        for p in won {
            let (pl, pr) = sides(p);
            if pl.contains(&l) {
                votes_left += 1;
            } else if pr.contains(&l) {
                votes_right += 1;
            }
        }
        if votes_left >= votes_right {
            left.push(l);
        } else {
            right.push(l);
        }
    }
    if left.is_empty() || right.is_empty() {
        // Most frequent proposal; ties to the first seen.
        let mut best = (0usize, 0usize);
        for (i, p) in won.iter().enumerate() {
            let count = won.iter().filter(|q| sides(q).0 == sides(p).0).count();
            if count > best.1 {
                best = (i, count);
            }
        }
        let (l, _) = sides(won[best.0]);
        left = present.iter().copied().filter(|x| l.contains(x)).collect();
        right = present.iter().copied().filter(|x| !l.contains(x)).collect();
    }
    let n_left = rows.iter().filter(|&&r| left.contains(&(column[r] as usize))).count();
    SplitRule::Levels {
        covariate: j,
        left,
        right,
        unseen_left: 2 * n_left >= rows.len(),
    }
}

/// Unpruned tree with the voted split at every node. Node `h` draws its
/// replicates from a stream keyed by `(seed, h)`.
pub fn grow_bnls_rows(
    data: &TreeData,
    rows: Vec<usize>,
    params: &GrowParams,
    replicates: usize,
    seed: u64,
) -> SurvivalTree {
    grow_with(data, rows, params, |ctx| {
        let node_seed = stream_seed(seed, tag::NODE, ctx.id as u64);
        stabilized_split(data, ctx.rows, params, replicates, node_seed).map(|(rule, statistic, vote)| FoundSplit {
            rule,
            statistic,
            vote: Some(vote),
        })
    })
}

/// Grows the voted tree on `ds` and prunes it at the given or
/// cross-validated cp. Cross-validation regrows voted trees on each
/// training part.
pub fn fit_bnls(
    ds: &SurvivalDataset,
    params: &GrowParams,
    replicates: usize,
    cp: CpChoice,
    seed: u64,
) -> Result<TreeFit> {
    validate_params(params)?;
    if replicates == 0 {
        return Err(crate::Error::invalid("replicates must be at least 1"));
    }
    let data = TreeData::from_dataset(ds);
    let full = grow_bnls_rows(&data, (0..data.n()).collect(), params, replicates, seed);
    let (cp, cv) = match cp {
        CpChoice::Fixed(cp) => (cp, None),
        CpChoice::CrossValidate { folds } => {
            let cv = cv_choose_cp_with(&data, &full, folds, seed, |rows, f| {
                grow_bnls_rows(&data, rows, params, replicates, stream_seed(seed, tag::CV_TREE, f as u64))
            })?;
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
