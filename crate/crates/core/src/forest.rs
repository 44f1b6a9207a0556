//! Random survival forests: bootstrap trees grown with a random covariate
//! subset at every node, out-of-bag ensemble hazards and importance by
//! random routing.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;

use crate::curve::NelsonAalenCurve;
use crate::data::{bootstrap_indices, in_bag_flags, SurvivalDataset};
use crate::error::{Error, Result};
use crate::evaluation::concordance_index;
use crate::rng::{stream, tag, Rng};
use crate::tree::{best_split, grow_with, ChfPredictor, FoundSplit, GrowParams, SurvivalTree, TreeData};

pub const DEFAULT_NTREE: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub ntree: usize,
    /// Covariates tried per node; `None` means `⌈√p⌉`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// Minimum distinct event times per daughter.
    pub min_events: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            ntree: DEFAULT_NTREE,
            mtry: None,
            min_leaf: 3,
            min_events: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<SurvivalTree>,
    /// `in_bag[b][i]`: record `i` was drawn for tree `b`.
    pub in_bag: Vec<Vec<bool>>,
    pub mtry: usize,
    pub min_leaf: usize,
    pub min_events: usize,
    pub seed: u64,
    names: Vec<String>,
    levels: Vec<Option<Vec<String>>>,
}

/// Importance of each covariate: perturbed minus baseline OOB error.
#[derive(Debug, Clone, PartialEq)]
pub struct VimpTable {
    pub baseline_error: f64,
    pub entries: Vec<(String, f64)>,
    /// Records with no out-of-bag tree, left out of both errors.
    pub excluded: usize,
}

impl VimpTable {
    /// Entries by decreasing importance; equal values keep column order.
    pub fn sorted(&self) -> Vec<(String, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("covariate\tvimp\n");
        for (name, v) in self.sorted() {
            out.push_str(&format!("{name}\t{v}\n"));
        }
        out
    }
}

pub(crate) fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))
}

/// One forest tree on `rows`; each node tries `mtry` covariates drawn
/// from `rng`.
pub(crate) fn grow_random_tree(
    data: &TreeData,
    rows: Vec<usize>,
    params: &GrowParams,
    mtry: usize,
    rng: &mut Rng,
) -> SurvivalTree {
    let p = data.p();
    grow_with(data, rows, params, |ctx| {
        let mut subset = sample(rng, p, mtry).into_vec();
        subset.sort_unstable();
        best_split(data, ctx.rows, &subset, params).map(|c| FoundSplit {
            rule: c.rule,
            statistic: c.statistic,
            vote: None,
        })
    })
}

/// Tree `b` uses the stream `(seed, b)` for its bootstrap draw and node
/// subsets, so a forest is a prefix of any larger forest with the same seed.
pub fn fit_forest(ds: &SurvivalDataset, params: &ForestParams, seed: u64) -> Result<Forest> {
    let p = ds.p();
    if params.ntree == 0 {
        return Err(Error::invalid("ntree must be at least 1"));
    }
    if p == 0 || ds.n() == 0 {
        return Err(Error::invalid("forest needs at least one record and one covariate"));
    }
    let mtry = params.mtry.unwrap_or_else(|| default_mtry(p));
    if mtry == 0 || mtry > p {
        return Err(Error::invalid(format!("mtry {mtry} must lie in 1..={p}")));
    }
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    let data = TreeData::from_dataset(ds);
    let gp = GrowParams {
        min_leaf: params.min_leaf,
        min_events: params.min_events,
        max_depth: None,
    };
    let n = ds.n();
    let grown: Vec<(SurvivalTree, Vec<bool>)> = (0..params.ntree as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, tag::TREE, b);
            let draws = bootstrap_indices(n, &mut rng);
            let flags = in_bag_flags(n, &draws);
            (grow_random_tree(&data, draws, &gp, mtry, &mut rng), flags)
        })
        .collect();
    let (trees, in_bag) = grown.into_iter().unzip();
    Ok(Forest {
        trees,
        in_bag,
        mtry,
        min_leaf: params.min_leaf,
        min_events: params.min_events,
        seed,
        names: data.names,
        levels: data.levels,
    })
}

fn distinct_times(ds: &SurvivalDataset) -> Vec<f64> {
    let mut g = ds.times();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

impl Forest {
    pub fn ntree(&self) -> usize {
        self.trees.len()
    }

    pub fn n(&self) -> usize {
        self.in_bag.first().map_or(0, |f| f.len())
    }

    fn check_training(&self, ds: &SurvivalDataset) -> Result<()> {
        if ds.n() != self.n() || ds.names() != self.names {
            return Err(Error::invalid("dataset is not the forest's training set"));
        }
        Ok(())
    }

    /// Average of the leaf curves of the trees for which record `i` is out
    /// of bag; `None` when it is in bag everywhere.
    pub fn oob_ensemble_chf(&self, ds: &SurvivalDataset, i: usize) -> Result<Option<NelsonAalenCurve>> {
        self.check_training(ds)?;
        let z = &ds.records()[i].covariates;
        let curves: Vec<&NelsonAalenCurve> = self
            .trees
            .iter()
            .zip(&self.in_bag)
            .filter(|(_, bag)| !bag[i])
            .map(|(t, _)| &t.leaf_for(z).0.curve)
            .collect();
        Ok((!curves.is_empty()).then(|| NelsonAalenCurve::average(&curves)))
    }

    /// Average of every tree's prediction.
    pub fn ensemble_chf(&self, z: &[f64]) -> NelsonAalenCurve {
        let curves: Vec<&NelsonAalenCurve> = self.trees.iter().map(|t| &t.leaf_for(z).0.curve).collect();
        NelsonAalenCurve::average(&curves)
    }

    /// Out-of-bag summed-hazard score of every training record, with random
    /// routing at nodes splitting on `perturb = Some((covariate, rng))`.
    fn oob_scores(&self, rows: &[Vec<f64>], leaf_scores: &[Vec<f64>], mut perturb: Option<(usize, Rng)>) -> Vec<Option<f64>> {
        let n = rows.len();
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for (b, tree) in self.trees.iter().enumerate() {
            for i in (0..n).filter(|&i| !self.in_bag[b][i]) {
                let mut node = 0;
                while let Some(s) = &tree.nodes[node].split {
                    let left = match &mut perturb {
                        Some((j, rng)) if s.rule.covariate() == *j => rng.random::<bool>(),
                        _ => s.rule.route(&rows[i]).0,
                    };
                    node = if left { s.left } else { s.right };
                }
                sum[i] += leaf_scores[b][node];
                count[i] += 1;
            }
        }
        sum.iter()
            .zip(&count)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    fn leaf_scores(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        self.trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .map(|n| if n.is_leaf() { n.curve.sum_over(grid) } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    fn error_of(ds: &SurvivalDataset, scores: &[Option<f64>]) -> Result<f64> {
        let mut t = Vec::new();
        let mut e = Vec::new();
        let mut s = Vec::new();
        for (r, sc) in ds.records().iter().zip(scores) {
            if let Some(v) = sc {
                t.push(r.time);
                e.push(r.event);
                s.push(*v);
            }
        }
        Ok(1.0 - concordance_index(&t, &e, &s)?.0)
    }

    /// Out-of-bag `1 − C`, ranking by summed ensemble hazard over the
    /// training set's distinct times. Records without an out-of-bag tree
    /// are left out.
    pub fn oob_error(&self, ds: &SurvivalDataset) -> Result<f64> {
        self.check_training(ds)?;
        let grid = distinct_times(ds);
        let rows: Vec<Vec<f64>> = ds.records().iter().map(|r| r.covariates.clone()).collect();
        let scores = self.oob_scores(&rows, &self.leaf_scores(&grid), None);
        Self::error_of(ds, &scores)
    }

    /// Importance of covariate `j`: out-of-bag error when every node
    /// splitting on `j` sends cases to a uniformly random daughter, minus
    /// the plain out-of-bag error. Covariate `j` draws from the stream
    /// `(seed, j)`.
    pub fn vimp(&self, ds: &SurvivalDataset, seed: u64) -> Result<VimpTable> {
        self.check_training(ds)?;
        let grid = distinct_times(ds);
        let rows: Vec<Vec<f64>> = ds.records().iter().map(|r| r.covariates.clone()).collect();
        let leaf = self.leaf_scores(&grid);
        let base_scores = self.oob_scores(&rows, &leaf, None);
        let excluded = base_scores.iter().filter(|s| s.is_none()).count();
        let baseline_error = Self::error_of(ds, &base_scores)?;
        let values: Vec<Result<f64>> = (0..ds.p())
            .into_par_iter()
            .map(|j| {
                let rng = stream(seed, tag::VIMP, j as u64);
                let scores = self.oob_scores(&rows, &leaf, Some((j, rng)));
                Ok(Self::error_of(ds, &scores)? - baseline_error)
            })
            .collect();
        let entries = self
            .names
            .iter()
            .cloned()
            .zip(values)
            .map(|(n, v)| v.map(|v| (n, v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(VimpTable {
            baseline_error,
            entries,
            excluded,
        })
    }

    /// Mean fraction of distinct records drawn per tree.
    pub fn mean_in_bag_fraction(&self) -> f64 {
        let n = self.n() as f64;
        self.in_bag
            .iter()
            .map(|f| f.iter().filter(|x| **x).count() as f64 / n)
            .sum::<f64>()
            / self.ntree() as f64
    }

    /// Human-readable overview.
    pub fn summary(&self) -> String {
        let leaves: Vec<usize> = self.trees.iter().map(|t| t.n_leaves()).collect();
        let mean_leaves = leaves.iter().sum::<usize>() as f64 / leaves.len() as f64;
        format!(
            "trees\t{}\nmtry\t{}\nmin_leaf\t{}\nmin_events\t{}\nseed\t{}\nmean_leaves\t{:.2}\nmean_in_bag_fraction\t{:.4}\n",
            self.ntree(),
            self.mtry,
            self.min_leaf,
            self.min_events,
            self.seed,
            mean_leaves,
            self.mean_in_bag_fraction()
        )
    }
}

impl ChfPredictor for Forest {
    fn covariate_names(&self) -> &[String] {
        &self.names
    }
    fn covariate_levels(&self) -> &[Option<Vec<String>>] {
        &self.levels
    }
    fn chf(&self, z: &[f64]) -> NelsonAalenCurve {
        self.ensemble_chf(z)
    }
    /// Mean over trees of each tree's summed hazard, which equals the sum
    /// of the averaged curve.
    fn summed_chf(&self, z: &[f64], grid: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.leaf_for(z).0.curve.sum_over(grid)).sum::<f64>() / self.ntree() as f64
    }
}
