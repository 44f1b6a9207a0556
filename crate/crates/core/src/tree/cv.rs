//! K-fold cross-validated choice of the complexity parameter.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::prune::{prune_cost_complexity, PruneSequence};
use super::{grow_rows, validate_params, GrowParams, SurvivalTree, TreeData};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::evaluation::concordance_index;
use crate::rng::{stream, tag};

const MAX_FOLD_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CvPoint {
    pub cp: f64,
    /// Leaves of the full-data subtree selected by `cp`.
    pub n_leaves: usize,
    /// Cross-validated `1 − C`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub cp: f64,
    pub points: Vec<CvPoint>,
}

/// Held-out index sets, stratified by event status. Events and censored
/// records are shuffled separately and dealt round-robin. A fold without
/// events triggers a fresh shuffle, up to ten attempts; after that the last
/// assignment is used.
pub(crate) fn stratified_folds(events: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = events.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("fold count {k} must lie in 2..={n}")));
    }
    let mut folds = Vec::new();
    for attempt in 0..MAX_FOLD_ATTEMPTS {
        let mut rng = stream(seed, tag::FOLDS, attempt);
        let mut ev: Vec<usize> = (0..n).filter(|&i| events[i]).collect();
        let mut cens: Vec<usize> = (0..n).filter(|&i| !events[i]).collect();
        ev.shuffle(&mut rng);
        cens.shuffle(&mut rng);
        folds = vec![Vec::new(); k];
        for (pos, i) in ev.into_iter().chain(cens).enumerate() {
            folds[pos % k].push(i);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        if folds.iter().all(|f| f.iter().any(|&i| events[i])) {
            return Ok(folds);
        }
    }
    log::warn!("some cross-validation folds hold no events");
    Ok(folds)
}

/// Representative cp for every subtree of `seq`: 0 for the full tree, the
/// geometric mean of consecutive thresholds in between, the last threshold
/// for the root.
fn candidate_cps(seq: &PruneSequence) -> Vec<f64> {
    let a = seq.alphas();
    let mut c = vec![0.0];
    for k in 0..a.len() {
        c.push(if k + 1 < a.len() { (a[k] * a[k + 1]).sqrt() } else { a[k] });
    }
    c
}

fn summed_grid(times: &[f64], rows: &[usize]) -> Vec<f64> {
    let mut g: Vec<f64> = rows.iter().map(|&i| times[i]).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Cross-validates `full` (grown on every row of `data`) with trees grown
/// by `grower(training rows, fold index)`. The error of a candidate is the
/// mean over folds of held-out `1 − C`, ranking by summed cumulative hazard
/// over the fold's distinct times; folds where C is undefined are skipped,
/// and when every fold is (e.g. leave-one-out) the held-out scores are
/// pooled into one C. The smallest error wins; ties go to the larger cp.
pub(crate) fn cv_choose_cp_with<G>(
    data: &TreeData,
    full: &SurvivalTree,
    folds: usize,
    seed: u64,
    grower: G,
) -> Result<CvResult>
where
    G: Fn(Vec<usize>, usize) -> SurvivalTree + Sync,
{
    let seq = prune_cost_complexity(full);
    let cps = candidate_cps(&seq);
    let held = stratified_folds(&data.events, folds, seed)?;
    let global_grid = summed_grid(&data.times, &(0..data.n()).collect::<Vec<_>>());

    // Per fold and candidate: (fold C if defined, pooled-grid scores).
    let per_fold: Vec<Vec<(Option<f64>, Vec<f64>)>> = held
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; data.n()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..data.n()).filter(|&i| !in_test[i]).collect();
            let tree = grower(train, f);
            let fold_seq = prune_cost_complexity(&tree);
            let grid = summed_grid(&data.times, test);
            let t: Vec<f64> = test.iter().map(|&i| data.times[i]).collect();
            let e: Vec<bool> = test.iter().map(|&i| data.events[i]).collect();
            cps.iter()
                .map(|&cp| {
                    let sub = fold_seq.subtree(&tree, cp);
                    let curves: Vec<_> = test.iter().map(|&i| &sub.leaf_for(&data.row(i)).0.curve).collect();
                    let scores: Vec<f64> = curves.iter().map(|c| c.sum_over(&grid)).collect();
                    let pooled: Vec<f64> = curves.iter().map(|c| c.sum_over(&global_grid)).collect();
                    (concordance_index(&t, &e, &scores).ok().map(|x| x.0), pooled)
                })
                .collect()
        })
        .collect();

    let any_defined = per_fold.iter().any(|f| f.iter().any(|x| x.0.is_some()));
    let mut points = Vec::with_capacity(cps.len());
    for (k, &cp) in cps.iter().enumerate() {
        let error = if any_defined {
            let cs: Vec<f64> = per_fold.iter().filter_map(|f| f[k].0).collect();
            if cs.is_empty() {
                f64::NAN
            } else {
                cs.iter().map(|c| 1.0 - c).sum::<f64>() / cs.len() as f64
            }
        } else {
            let mut t = Vec::new();
            let mut e = Vec::new();
            let mut s = Vec::new();
            for (f, test) in held.iter().enumerate() {
                for (pos, &i) in test.iter().enumerate() {
                    t.push(data.times[i]);
                    e.push(data.events[i]);
                    s.push(per_fold[f][k].1[pos]);
                }
            }
            1.0 - concordance_index(&t, &e, &s)?.0
        };
        points.push(CvPoint {
            cp,
            n_leaves: seq.step_for(cp).n_leaves,
            error,
        });
    }
    let mut best: Option<&CvPoint> = None;
    for p in points.iter().filter(|p| p.error.is_finite()) {
        match best {
            Some(b) if p.error > b.error + 1e-12 => {}
            _ => best = Some(p),
        }
    }
    let cp = best.map(|b| b.cp).ok_or(Error::UndefinedConcordance)?;
    Ok(CvResult { cp, points })
}

/// Grows the full tree on `ds`, cross-validates its prune sequence and
/// returns the chosen cp with the CV curve.
pub fn cv_choose_cp(ds: &SurvivalDataset, folds: usize, params: &GrowParams, seed: u64) -> Result<CvResult> {
    validate_params(params)?;
    let data = TreeData::from_dataset(ds);
    let full = grow_rows(&data, (0..data.n()).collect(), params);
    cv_choose_cp_with(&data, &full, folds, seed, |rows, _| grow_rows(&data, rows, params))
}
