//! Concordance, risk scores and the repeated train/test experiment.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bnls::fit_bnls;
use crate::cox::CoxModel;
use crate::data::{train_test_split, CovariateKind, CovariateSpec, SurvivalDataset};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::rng::{stream_seed, tag};
use crate::selection::{finalize_model, run_selection, SelectionConfig};
use crate::tree::{align_rows, fit_tree, ChfPredictor, CpChoice, GrowParams};

pub const DEFAULT_SPLITS: usize = 30;

/// Harrell's C over permissible pairs.
///
/// A pair is dropped when its shorter time is censored, or when both the
/// times and the event indicators are equal. With equal times and one
/// event, the event member counts as the shorter survival. The shorter
/// member scoring higher counts 1, a score tie 0.5. Note that pairs of
/// tied event times are dropped, unlike some other implementations.
///
/// Returns `(C, permissible pairs)`.
pub fn concordance_index(times: &[f64], events: &[bool], scores: &[f64]) -> Result<(f64, usize)> {
    if times.len() != events.len() || times.len() != scores.len() {
        return Err(Error::invalid("times, events and scores differ in length"));
    }
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Ascending time, events before censorings at equal time: every
    // permissible pair then has its shorter member first.
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(events[b].cmp(&events[a])));
    let mut sum = 0.0;
    let mut permissible = 0usize;
    for (pos, &i) in order.iter().enumerate() {
        if !events[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if times[j] == times[i] && events[j] {
                continue;
            }
            permissible += 1;
            if scores[i] > scores[j] {
                sum += 1.0;
            } else if scores[i] == scores[j] {
                sum += 0.5;
            }
        }
    }
    if permissible == 0 {
        return Err(Error::UndefinedConcordance);
    }
    Ok((sum / permissible as f64, permissible))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreSource {
    LinearPredictor,
    SummedChf,
}

/// Per test record, a score where larger means a worse predicted outcome;
/// `None` marks a record that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScore {
    pub source: ScoreSource,
    pub scores: Vec<Option<f64>>,
    /// Records carrying a categorical level the model never saw. Cox scores
    /// leave them unscored; tree scores route them and count them here.
    pub unseen: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concordance {
    pub c: f64,
    pub error: f64,
    pub permissible: usize,
    pub unscorable: usize,
}

impl RiskScore {
    pub fn unscorable(&self) -> usize {
        self.scores.iter().filter(|s| s.is_none()).count()
    }

    /// C over the scored records of `test`.
    pub fn concordance(&self, test: &SurvivalDataset) -> Result<Concordance> {
        if test.n() != self.scores.len() {
            return Err(Error::invalid("score count differs from test set size"));
        }
        let mut t = Vec::new();
        let mut e = Vec::new();
        let mut s = Vec::new();
        for (r, sc) in test.records().iter().zip(&self.scores) {
            if let Some(v) = sc {
                t.push(r.time);
                e.push(r.event);
                s.push(*v);
            }
        }
        let (c, permissible) = concordance_index(&t, &e, &s)?;
        Ok(Concordance {
            c,
            error: 1.0 - c,
            permissible,
            unscorable: self.unscorable(),
        })
    }
}

enum Term {
    Value { column: usize, beta: f64 },
    /// `beta` times the indicator of training level `level`; `codes` maps
    /// test level codes to training level codes.
    Dummy { column: usize, level: usize, codes: Vec<Option<usize>>, beta: f64 },
}

/// `β̂'z` on `test`. `train` holds the covariate specs of the data the
/// model's selection ran on; model names refer either to its continuous
/// columns or to `name=level` indicators of its categorical ones.
pub fn score_cox(model: &CoxModel, train: &[CovariateSpec], test: &SurvivalDataset) -> Result<RiskScore> {
    let mut terms = Vec::with_capacity(model.names.len());
    for (name, &beta) in model.names.iter().zip(&model.beta) {
        let direct = train.iter().find(|s| &s.name == name && !s.is_categorical());
        if direct.is_some() {
            let column = test.column_index(name).ok_or_else(|| Error::MissingColumn(name.clone()))?;
            if test.specs()[column].is_categorical() {
                return Err(Error::invalid(format!("covariate {name} changed type")));
            }
            terms.push(Term::Value { column, beta });
            continue;
        }
        let found = train.iter().find_map(|s| match &s.kind {
            CovariateKind::Categorical { levels } => levels
                .iter()
                .position(|l| *name == format!("{}={}", s.name, l))
                .filter(|&k| k > 0)
                .map(|k| (s, levels, k)),
            CovariateKind::Continuous => None,
        });
        let (spec, levels, level) = found.ok_or_else(|| Error::MissingColumn(name.clone()))?;
        let column = test.column_index(&spec.name).ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
        let CovariateKind::Categorical { levels: test_levels } = &test.specs()[column].kind else {
            return Err(Error::invalid(format!("covariate {} changed type", spec.name)));
        };
        let codes = test_levels.iter().map(|l| levels.iter().position(|t| t == l)).collect();
        terms.push(Term::Dummy { column, level, codes, beta });
    }
    let mut unseen = 0;
    let scores = test
        .records()
        .iter()
        .map(|r| {
            let mut lp = 0.0;
            for term in &terms {
                match term {
                    Term::Value { column, beta } => lp += beta * r.covariates[*column],
                    Term::Dummy { column, level, codes, beta } => match codes[r.covariates[*column] as usize] {
                        Some(c) if c == *level => lp += beta,
                        Some(_) => {}
                        None => {
                            unseen += 1;
                            return None;
                        }
                    },
                }
            }
            Some(lp)
        })
        .collect();
    Ok(RiskScore {
        source: ScoreSource::LinearPredictor,
        scores,
        unseen,
    })
}

/// `Σ_k Ĥ(t_k | z)` over the distinct observed times `t_k` of `test`.
pub fn score_chf<P: ChfPredictor + ?Sized>(predictor: &P, test: &SurvivalDataset) -> Result<RiskScore> {
    let rows = align_rows(predictor.covariate_names(), predictor.covariate_levels(), test)?;
    let mut grid = test.times();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let unseen = rows.iter().filter(|z| z.iter().any(|v| v.is_nan())).count();
    if unseen > 0 {
        log::warn!("{unseen} test records carry categorical levels unseen in training");
    }
    let scores = rows.par_iter().map(|z| Some(predictor.summed_chf(z, &grid))).collect();
    Ok(RiskScore {
        source: ScoreSource::SummedChf,
        scores,
        unseen,
    })
}

/// One pipeline of the experiment, with its tuning fixed in advance.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    /// Bootstrap selection, thresholding at `kappa`, unpenalized refit.
    /// The seed inside `selection` is replaced per split.
    Cox { selection: SelectionConfig, kappa: f64 },
    Tree { params: GrowParams, cp: CpChoice },
    Bnls { params: GrowParams, replicates: usize, cp: CpChoice },
    Rsf { params: ForestParams },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub label: String,
    pub spec: MethodSpec,
}

impl MethodConfig {
    /// Trains on `train`, scores `test` and returns its concordance.
    pub fn run(&self, train: &SurvivalDataset, test: &SurvivalDataset, seed: u64) -> Result<Concordance> {
        let score = match &self.spec {
            MethodSpec::Cox { selection, kappa } => {
                let cfg = SelectionConfig { seed, ..selection.clone() };
                let table = run_selection(train, &cfg)?;
                let model = finalize_model(train, &table, *kappa, &cfg.fit)?;
                score_cox(&model, train.specs(), test)?
            }
            MethodSpec::Tree { params, cp } => score_chf(&fit_tree(train, params, *cp, seed)?.tree, test)?,
            MethodSpec::Bnls { params, replicates, cp } => {
                score_chf(&fit_bnls(train, params, *replicates, *cp, seed)?.tree, test)?
            }
            MethodSpec::Rsf { params } => score_chf(&fit_forest(train, params, seed)?, test)?,
        };
        score.concordance(test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(Error::invalid("splits must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!("test fraction {} not in (0, 1)", self.test_fraction)));
        }
        Ok(())
    }
}

/// Outcomes of one method over every split; failed cells keep their error
/// message.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub label: String,
    pub splits: Vec<std::result::Result<Concordance, String>>,
}

impl EvaluationReport {
    /// `1 − C` of the successful splits, in split order.
    pub fn errors(&self) -> Vec<f64> {
        self.splits.iter().filter_map(|s| s.as_ref().ok().map(|c| c.error)).collect()
    }

    pub fn failures(&self) -> usize {
        self.splits.iter().filter(|s| s.is_err()).count()
    }

    pub fn mean(&self) -> Option<f64> {
        let e = self.errors();
        (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
    }

    /// Sample standard deviation (denominator `n − 1`).
    pub fn sd(&self) -> Option<f64> {
        let e = self.errors();
        if e.len() < 2 {
            return None;
        }
        let m = e.iter().sum::<f64>() / e.len() as f64;
        Some((e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt())
    }

    pub fn median(&self) -> Option<f64> {
        let mut e = self.errors();
        if e.is_empty() {
            return None;
        }
        e.sort_by(f64::total_cmp);
        let k = e.len() / 2;
        Some(if e.len() % 2 == 1 { e[k] } else { 0.5 * (e[k - 1] + e[k]) })
    }
}

fn na(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// `method, mean, sd, median, failures`, one row per method.
pub fn summary_tsv(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("method\tmean\tsd\tmedian\tfailures\n");
    for r in reports {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.label, na(r.mean()), na(r.sd()), na(r.median()), r.failures());
    }
    out
}

/// Long format `method, split, error` with `NA` for failed cells.
pub fn per_split_tsv(reports: &[EvaluationReport]) -> String {
    let mut out = String::from("method\tsplit\terror\n");
    for r in reports {
        for (s, cell) in r.splits.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}", r.label, s, na(cell.as_ref().ok().map(|c| c.error)));
        }
    }
    out
}

/// Runs every method on `cfg.splits` random train/test partitions of `ds`.
/// Split `s` partitions with the stream `(seed, s)`; method `m` on that
/// split is seeded from `(split seed, m)`, so results do not depend on how
/// splits are scheduled. A method that fails on a split leaves a missing
/// cell.
pub fn repeated_split_experiment(
    ds: &SurvivalDataset,
    methods: &[MethodConfig],
    cfg: &ExperimentConfig,
) -> Result<Vec<EvaluationReport>> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods to evaluate"));
    }
    let cells: Vec<Vec<std::result::Result<Concordance, String>>> = (0..cfg.splits as u64)
        .into_par_iter()
        .map(|s| {
            let split_seed = stream_seed(cfg.seed, tag::SPLIT, s);
            match train_test_split(ds, cfg.test_fraction, split_seed) {
                Ok((train, test)) => methods
                    .iter()
                    .enumerate()
                    .map(|(m, method)| {
                        let seed = stream_seed(split_seed, tag::METHOD, m as u64);
                        method.run(&train, &test, seed).map_err(|e| {
                            log::warn!("{} failed on split {s}: {e}", method.label);
                            e.to_string()
                        })
                    })
                    .collect(),
                Err(e) => vec![Err(e.to_string()); methods.len()],
            }
        })
        .collect();
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, method)| EvaluationReport {
            label: method.label.clone(),
            splits: cells.iter().map(|row| row[m].clone()).collect(),
        })
        .collect())
}
