//! Bootstrap-wrapped Cox selection: stepwise AIC (BSS), the Lasso (BLS) and
//! the randomized Lasso (BRLS). Each replicate resamples the data, runs the
//! selector and records which covariates it kept; the inclusion frequency
//! `κ_j` is the share of successful replicates that kept covariate `j`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cox::{self, CoxModel, FitOptions};
use crate::data::{bootstrap_indices, normalize_columns, SurvivalDataset};
use crate::error::{Error, Result};
use crate::lasso::{fit_penalized_from, random_weights};
use crate::rng::{stream, tag};

pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Bss,
    Bls,
    Brls,
}

impl SelectionMethod {
    pub fn label(self) -> &'static str {
        match self {
            SelectionMethod::Bss => "bss",
            SelectionMethod::Bls => "bls",
            SelectionMethod::Brls => "brls",
        }
    }

    pub fn is_lasso(self) -> bool {
        !matches!(self, SelectionMethod::Bss)
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bss" => Ok(SelectionMethod::Bss),
            "bls" => Ok(SelectionMethod::Bls),
            "brls" => Ok(SelectionMethod::Brls),
            other => Err(Error::invalid(format!("unknown selection method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub replicates: usize,
    /// Penalty strength (Lagrangian form); Lasso methods only.
    pub lambda: Option<f64>,
    /// BRLS weight `W_j = alpha` with probability `p_w`, else 1.
    pub alpha: f64,
    pub p_w: f64,
    pub seed: u64,
    /// KKT tolerance of the penalized fits.
    pub tol: f64,
    pub fit: FitOptions,
}

impl SelectionConfig {
    pub fn new(method: SelectionMethod, seed: u64) -> Self {
        SelectionConfig {
            method,
            replicates: DEFAULT_REPLICATES,
            lambda: None,
            alpha: 0.5,
            p_w: 0.5,
            seed,
            tol: 1e-6,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.method.is_lasso() {
            match self.lambda {
                Some(l) if l >= 0.0 && l.is_finite() => {}
                Some(l) => return Err(Error::invalid(format!("lambda {l} must be finite and >= 0"))),
                None => return Err(Error::invalid(format!("{} needs lambda", self.method))),
            }
        }
        if self.method == SelectionMethod::Brls {
            if !(self.alpha > 0.0 && self.alpha < 1.0) {
                return Err(Error::invalid(format!("alpha {} not in (0, 1)", self.alpha)));
            }
            if !(self.p_w > 0.0 && self.p_w < 1.0) {
                return Err(Error::invalid(format!("p_w {} not in (0, 1)", self.p_w)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionFrequencyTable {
    pub method: SelectionMethod,
    pub lambda: Option<f64>,
    /// Covariate names after categorical expansion.
    pub names: Vec<String>,
    /// Successful replicates that kept each covariate.
    pub counts: Vec<usize>,
    pub n_effective: usize,
    pub failures: usize,
}

impl InclusionFrequencyTable {
    /// `κ_j`; NaN when no replicate succeeded.
    pub fn kappa(&self, j: usize) -> f64 {
        if self.n_effective == 0 {
            f64::NAN
        } else {
            self.counts[j] as f64 / self.n_effective as f64
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        (0..self.names.len()).map(|j| self.kappa(j)).collect()
    }

    /// Covariates with `κ_j ≥ kappa` and `κ_j > 0`.
    pub fn selected(&self, kappa: f64) -> Vec<String> {
        self.names
            .iter()
            .enumerate()
            .filter(|&(j, _)| self.counts[j] > 0 && self.kappa(j) >= kappa)
            .map(|(_, n)| n.clone())
            .collect()
    }

    pub fn tsv_header() -> &'static str {
        "method\tlambda\tcovariate\tkappa\tn_effective\n"
    }

    pub fn tsv_rows(&self) -> String {
        let lambda = self.lambda.map_or_else(|| "NA".to_string(), |l| l.to_string());
        let mut out = String::new();
        for (j, name) in self.names.iter().enumerate() {
            let k = self.kappa(j);
            let k = if k.is_nan() { "NA".to_string() } else { k.to_string() };
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", self.method, lambda, name, k, self.n_effective));
        }
        out
    }

    /// Cut-off in the middle of the widest gap between consecutive distinct
    /// κ values, as a suggestion only; `None` with fewer than two distinct
    /// values.
    pub fn suggest_gap(&self) -> Option<KappaGap> {
        let mut k: Vec<f64> = self.kappas().into_iter().filter(|x| x.is_finite()).collect();
        k.sort_by(|a, b| b.total_cmp(a));
        k.dedup();
        let mut best: Option<KappaGap> = None;
        for w in k.windows(2) {
            if best.as_ref().is_none_or(|b| w[0] - w[1] > b.upper - b.lower) {
                best = Some(KappaGap {
                    upper: w[0],
                    lower: w[1],
                    cut: 0.5 * (w[0] + w[1]),
                });
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGap {
    pub upper: f64,
    pub lower: f64,
    pub cut: f64,
}

/// Outcome of one replicate at one λ: the kept expanded-covariate indices.
type Outcome = std::result::Result<Vec<usize>, String>;

fn lasso_replicate(sample: &SurvivalDataset, weights: &[f64], lambdas: &[f64], tol: f64) -> Vec<Outcome> {
    // Columns that are all zero in this resample carry no information and
    // cannot be normalized; they are never selected.
    let norms = sample.column_norms();
    let kept: Vec<usize> = (0..sample.p()).filter(|&j| norms[j] > 0.0).collect();
    let normalized = match normalize_columns(&sample.select_columns(&kept)) {
        Ok((ds, _)) => ds,
        Err(e) => return lambdas.iter().map(|_| Err(e.to_string())).collect(),
    };
    let mut start = vec![0.0; kept.len()];
    lambdas
        .iter()
        .map(|&lambda| {
            let pens: Vec<f64> = kept.iter().map(|&j| lambda / weights[j]).collect();
            match fit_penalized_from(&normalized, &pens, start.clone(), tol) {
                Ok((model, beta)) => {
                    start = beta;
                    Ok(model.selected.iter().map(|&k| kept[k]).collect())
                }
                Err(e) => {
                    start = vec![0.0; kept.len()];
                    Err(e.to_string())
                }
            }
        })
        .collect()
}

/// Runs every replicate at each λ of `lambdas` (in the given order, warm
/// starting along it). BSS ignores `lambdas` beyond its length.
fn run_replicates(expanded: &SurvivalDataset, cfg: &SelectionConfig, lambdas: &[f64]) -> Result<Vec<Vec<Outcome>>> {
    let n = expanded.n();
    let p = expanded.p();
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, tag::REPLICATE, r);
            let sample = expanded.subset_rows(&bootstrap_indices(n, &mut rng));
            Ok(match cfg.method {
                SelectionMethod::Bss => vec![cox::stepwise_aic(&sample, &cfg.fit).map(|m| m.selected).map_err(|e| e.to_string())],
                SelectionMethod::Bls => lasso_replicate(&sample, &vec![1.0; p], lambdas, cfg.tol),
                SelectionMethod::Brls => {
                    let mut wrng = stream(cfg.seed, tag::WEIGHTS, r);
                    let w = random_weights(p, cfg.alpha, cfg.p_w, &mut wrng)?;
                    lasso_replicate(&sample, &w, lambdas, cfg.tol)
                }
            })
        })
        .collect()
}

fn tabulate(expanded: &SurvivalDataset, cfg: &SelectionConfig, lambda: Option<f64>, outcomes: &[&Outcome]) -> InclusionFrequencyTable {
    let mut counts = vec![0usize; expanded.p()];
    let mut n_effective = 0;
    let mut failures = 0;
    for o in outcomes {
        match o {
            Ok(sel) => {
                n_effective += 1;
                for &j in sel {
                    counts[j] += 1;
                }
            }
            Err(e) => {
                log::debug!("replicate failed: {e}");
                failures += 1;
            }
        }
    }
    InclusionFrequencyTable {
        method: cfg.method,
        lambda,
        names: expanded.names(),
        counts,
        n_effective,
        failures,
    }
}

/// Inclusion frequencies of `cfg.method` over `cfg.replicates` bootstrap
/// samples. Replicate `r` resamples with the stream `(seed, r)`; BRLS draws
/// its weights from a separate stream per replicate. Lasso methods
/// normalize each resample after dropping all-zero columns.
pub fn run_selection(ds: &SurvivalDataset, cfg: &SelectionConfig) -> Result<InclusionFrequencyTable> {
    cfg.validate()?;
    let expanded = ds.expand_categorical();
    let lambdas: Vec<f64> = cfg.lambda.into_iter().collect();
    let outcomes = run_replicates(&expanded, cfg, &lambdas)?;
    let firsts: Vec<&Outcome> = outcomes.iter().map(|o| &o[0]).collect();
    let table = tabulate(&expanded, cfg, if cfg.method.is_lasso() { cfg.lambda } else { None }, &firsts);
    if table.n_effective == 0 {
        return Err(Error::MethodFailure {
            method: cfg.method.to_string(),
            replicates: cfg.replicates,
        });
    }
    Ok(table)
}

/// One table per λ, in the order given. All λ share the same bootstrap
/// samples and (for BRLS) weight draws; each replicate follows the path
/// from the largest λ down with warm starts.
pub fn kappa_lambda_curve(ds: &SurvivalDataset, cfg: &SelectionConfig, lambdas: &[f64]) -> Result<Vec<InclusionFrequencyTable>> {
    if !cfg.method.is_lasso() {
        return Err(Error::invalid("a kappa-lambda curve needs a Lasso method"));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("lambda grid must be nonempty, finite and >= 0"));
    }
    let mut probe = cfg.clone();
    probe.lambda = Some(lambdas[0]);
    probe.validate()?;
    let mut path: Vec<f64> = lambdas.to_vec();
    path.sort_by(|a, b| b.total_cmp(a));
    path.dedup();
    let expanded = ds.expand_categorical();
    let outcomes = run_replicates(&expanded, cfg, &path)?;
    let tables: Vec<InclusionFrequencyTable> = lambdas
        .iter()
        .map(|l| {
            let k = path.iter().position(|x| x == l).expect("grid point on path");
            let col: Vec<&Outcome> = outcomes.iter().map(|o| &o[k]).collect();
            tabulate(&expanded, cfg, Some(*l), &col)
        })
        .collect();
    if tables.iter().all(|t| t.n_effective == 0) {
        return Err(Error::MethodFailure {
            method: cfg.method.to_string(),
            replicates: cfg.replicates,
        });
    }
    Ok(tables)
}

/// Unpenalized Cox refit on the covariates with `κ_j ≥ kappa` (and
/// `κ_j > 0`); none selected gives the null model.
pub fn finalize_model(
    train: &SurvivalDataset,
    table: &InclusionFrequencyTable,
    kappa: f64,
    opts: &FitOptions,
) -> Result<CoxModel> {
    let names = table.selected(kappa);
    let expanded = train.expand_categorical();
    let subset = names
        .iter()
        .map(|n| expanded.column_index(n).ok_or_else(|| Error::MissingColumn(n.clone())))
        .collect::<Result<Vec<usize>>>()?;
    cox::fit(&expanded, &subset, opts).map_err(|e| Error::RefitFailed {
        subset: names.clone(),
        source: Box::new(e),
    })
}
