//! Cox proportional-hazards partial likelihood (Breslow ties), Newton
//! maximization and AIC-driven stepwise selection.

use rayon::prelude::*;

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg;

/// A fitted Cox model over a subset of the dataset's covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    /// Column indices into the dataset the model was fitted on.
    pub selected: Vec<usize>,
    /// Names of the selected columns, aligned with `beta`.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub log_pl: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set by stepwise search when a later round had no convergent candidate.
    pub partial_search: bool,
}

impl CoxModel {
    pub(crate) fn new(
        selected: Vec<usize>,
        names: Vec<String>,
        beta: Vec<f64>,
        log_pl: f64,
        iterations: usize,
    ) -> Self {
        let aic = aic(log_pl, selected.len());
        CoxModel {
            selected,
            names,
            beta,
            log_pl,
            aic,
            converged: true,
            iterations,
            partial_search: false,
        }
    }

    /// `β'z` for a full-width covariate vector of the fitting dataset.
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.selected.iter().zip(&self.beta).map(|(&j, b)| b * z[j]).sum()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.beta.iter().copied())
    }
}

pub fn aic(log_pl: f64, k: usize) -> f64 {
    -2.0 * log_pl + 2.0 * k as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Gradient max-norm at which Newton stops.
    pub tol: f64,
    pub max_iter: usize,
    /// `|β|∞` beyond which the likelihood is declared monotone.
    pub max_abs_beta: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            max_abs_beta: 50.0,
            max_halvings: 25,
        }
    }
}

/// Distinct uncensored times and the subjects at risk at each.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetIndex {
    pub event_times: Vec<f64>,
    /// Events at each distinct time.
    pub deaths: Vec<usize>,
    /// Indices `j` with `X_j ≥ t` for each event time `t`.
    pub risk_sets: Vec<Vec<usize>>,
}

impl RiskSetIndex {
    pub fn build(ds: &SurvivalDataset) -> Result<Self> {
        let mut event_times: Vec<f64> = ds.records().iter().filter(|r| r.event).map(|r| r.time).collect();
        if event_times.is_empty() {
            return Err(Error::NoEvents);
        }
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        let deaths = event_times
            .iter()
            .map(|&t| ds.records().iter().filter(|r| r.event && r.time == t).count())
            .collect();
        let risk_sets = event_times
            .iter()
            .map(|&t| (0..ds.n()).filter(|&j| ds.records()[j].time >= t).collect())
            .collect();
        Ok(RiskSetIndex {
            event_times,
            deaths,
            risk_sets,
        })
    }

    /// Log partial likelihood at `β = 0`: `−Σ d_i log|R_i|`.
    pub fn null_log_pl(&self) -> f64 {
        -self
            .deaths
            .iter()
            .zip(&self.risk_sets)
            .map(|(&d, r)| d as f64 * (r.len() as f64).ln())
            .sum::<f64>()
    }
}

/// Value, gradient and Hessian of the log partial likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLikelihood {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `k × k`.
    pub hessian: Vec<f64>,
}

/// Design restricted to a covariate subset, with rows grouped by tied time
/// in decreasing order so risk sets accumulate in one pass.
pub(crate) struct CoxProblem {
    k: usize,
    /// Row-major `n × k`.
    x: Vec<f64>,
    events: Vec<bool>,
    /// Row indices in decreasing time order.
    order: Vec<usize>,
    /// Column standard deviations, the natural step scale per coordinate.
    scales: Vec<f64>,
    /// `order[groups[g]..groups[g + 1]]` share one time.
    groups: Vec<usize>,
}

impl CoxProblem {
    pub(crate) fn new(ds: &SurvivalDataset, subset: &[usize]) -> Result<Self> {
        if ds.has_categorical() {
            return Err(Error::invalid(
                "Cox fits need expanded covariates (see expand_categorical)",
            ));
        }
        if let Some(&j) = subset.iter().find(|&&j| j >= ds.p()) {
            return Err(Error::invalid(format!("covariate index {j} out of range")));
        }
        if ds.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        let k = subset.len();
        let mut x = Vec::with_capacity(ds.n() * k);
        for r in ds.records() {
            x.extend(subset.iter().map(|&j| r.covariates[j]));
        }
        let times = ds.times();
        let mut order: Vec<usize> = (0..ds.n()).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
        let mut groups = vec![0];
        for i in 1..order.len() {
            if times[order[i]] != times[order[i - 1]] {
                groups.push(i);
            }
        }
        groups.push(order.len());
        let n = ds.n() as f64;
        let scales = (0..k)
            .map(|a| {
                let m = (0..ds.n()).map(|i| x[i * k + a]).sum::<f64>() / n;
                ((0..ds.n()).map(|i| (x[i * k + a] - m).powi(2)).sum::<f64>() / n).sqrt()
            })
            .collect();
        Ok(CoxProblem {
            k,
            x,
            events: ds.events(),
            order,
            scales,
            groups,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.k
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub(crate) fn value(&self, beta: &[f64]) -> f64 {
        self.evaluate(beta, false).value
    }

    pub(crate) fn evaluate(&self, beta: &[f64], with_hessian: bool) -> PartialLikelihood {
        let k = self.k;
        let n = self.events.len();
        let eta: Vec<f64> = (0..n)
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

        // Weighted running mean and centered second moment of the risk set
        // (West's update), which stays accurate when one subject dominates.
        let mut s0 = 0.0;
        let mut mean = vec![0.0; k];
        let mut m2 = vec![0.0; if with_hessian { k * k } else { 0 }];
        let mut delta = vec![0.0; k];
        let mut value = 0.0;
        let mut gradient = vec![0.0; k];
        let mut hessian = vec![0.0; if with_hessian { k * k } else { 0 }];

        for g in 0..self.groups.len() - 1 {
            let members = &self.order[self.groups[g]..self.groups[g + 1]];
            for &i in members {
                let xi = self.row(i);
                let prev = s0;
                s0 += w[i];
                let f = w[i] / s0;
                for a in 0..k {
                    delta[a] = xi[a] - mean[a];
                    mean[a] += f * delta[a];
                }
                if with_hessian {
                    let c = w[i] * (prev / s0);
                    for a in 0..k {
                        for b in 0..=a {
                            m2[a * k + b] += c * delta[a] * delta[b];
                        }
                    }
                }
            }
            let d = members.iter().filter(|&&i| self.events[i]).count();
            if d == 0 {
                continue;
            }
            let log_s0 = shift + s0.ln();
            for &i in members.iter().filter(|&&i| self.events[i]) {
                value += eta[i] - log_s0;
                let xi = self.row(i);
                for a in 0..k {
                    gradient[a] += xi[a] - mean[a];
                }
            }
            if with_hessian {
                let df = d as f64;
                for a in 0..k {
                    for b in 0..=a {
                        hessian[a * k + b] -= df * m2[a * k + b] / s0;
                    }
                }
            }
        }
        if with_hessian {
            for a in 0..k {
                for b in 0..a {
                    hessian[b * k + a] = hessian[a * k + b];
                }
            }
        }
        PartialLikelihood {
            value,
            gradient,
            hessian,
        }
    }

    /// Once the gradient has underflowed along a separating direction the
    /// iterates stall short of the divergence bound. A finite maximum loses
    /// roughly `½·I_jj·s²` when coordinate `j` is pushed outward by one
    /// column standard deviation `s`; a monotone direction loses nothing.
    fn unbounded_coordinate(&self, beta: &[f64], value: f64) -> Option<usize> {
        let floor = 1e-8 * value.abs().max(1.0);
        (0..self.k).find(|&j| {
            if beta[j] == 0.0 || self.scales[j] == 0.0 {
                return false;
            }
            let mut probe = beta.to_vec();
            probe[j] += beta[j].signum() * beta[j].abs().max(1.0 / self.scales[j]);
            self.value(&probe) >= value - floor
        })
    }

    /// Newton's method with step-halving from `start`.
    pub(crate) fn maximize(&self, start: Vec<f64>, opts: &FitOptions) -> Result<(Vec<f64>, f64, usize)> {
        let k = self.k;
        let mut beta = start;
        let mut ev = self.evaluate(&beta, true);
        if k == 0 {
            return Ok((beta, ev.value, 0));
        }
        for iter in 0..opts.max_iter {
            let gmax = linalg::max_abs(&ev.gradient);
            let info: Vec<f64> = ev.hessian.iter().map(|h| -h).collect();
            let step = linalg::solve_spd(&info, &ev.gradient)
                .ok_or(Error::SingularHessian { iterations: iter })?;
            // A small gradient alone is not enough: along a monotone
            // direction both gradient and curvature vanish while the
            // Newton step stays of order one.
            let small_step = step
                .iter()
                .zip(&beta)
                .all(|(s, b)| s.abs() <= 1e-6 * (1.0 + b.abs()));
            if gmax <= opts.tol && small_step {
                if let Some(j) = self.unbounded_coordinate(&beta, ev.value) {
                    return Err(Error::Diverged {
                        max_abs: beta[j].abs(),
                        beta,
                        iterations: iter,
                    });
                }
                return Ok((beta, ev.value, iter));
            }
            let mut scale = 1.0;
            let mut candidate;
            let mut halvings = 0;
            loop {
                candidate = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect::<Vec<_>>();
                let v = self.value(&candidate);
                if v.is_finite() && v >= ev.value - 1e-12 * ev.value.abs() {
                    break;
                }
                if halvings == opts.max_halvings {
                    break;
                }
                halvings += 1;
                scale *= 0.5;
            }
            beta = candidate;
            let max_abs = linalg::max_abs(&beta);
            if max_abs > opts.max_abs_beta {
                return Err(Error::Diverged {
                    beta,
                    iterations: iter + 1,
                    max_abs,
                });
            }
            ev = self.evaluate(&beta, true);
        }
        let gradient_norm = linalg::max_abs(&ev.gradient);
        if gradient_norm <= opts.tol {
            return Ok((beta, ev.value, opts.max_iter));
        }
        Err(Error::NotConverged {
            beta,
            iterations: opts.max_iter,
            gradient_norm,
        })
    }
}

pub fn log_partial_likelihood(ds: &SurvivalDataset, subset: &[usize], beta: &[f64]) -> Result<f64> {
    Ok(derivatives_checked(ds, subset, beta, false)?.value)
}

pub fn partial_likelihood_derivatives(
    ds: &SurvivalDataset,
    subset: &[usize],
    beta: &[f64],
) -> Result<PartialLikelihood> {
    derivatives_checked(ds, subset, beta, true)
}

fn derivatives_checked(
    ds: &SurvivalDataset,
    subset: &[usize],
    beta: &[f64],
    with_hessian: bool,
) -> Result<PartialLikelihood> {
    if beta.len() != subset.len() {
        return Err(Error::invalid(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            subset.len()
        )));
    }
    Ok(CoxProblem::new(ds, subset)?.evaluate(beta, with_hessian))
}

/// Unpenalized maximum partial likelihood fit on `subset`. An empty subset
/// gives the null model.
pub fn fit(ds: &SurvivalDataset, subset: &[usize], opts: &FitOptions) -> Result<CoxModel> {
    let problem = CoxProblem::new(ds, subset)?;
    let (beta, log_pl, iterations) = problem.maximize(vec![0.0; problem.dim()], opts)?;
    let names = subset.iter().map(|&j| ds.specs()[j].name.clone()).collect();
    Ok(CoxModel::new(subset.to_vec(), names, beta, log_pl, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add(usize),
    Drop(usize),
}

impl Move {
    fn covariate(self) -> usize {
        match self {
            Move::Add(j) | Move::Drop(j) => j,
        }
    }
}

/// Bidirectional stepwise search from the null model. Each round fits every
/// single addition and deletion and applies the one with the lowest AIC
/// (ties to the lowest covariate index) while AIC keeps decreasing.
pub fn stepwise_aic(ds: &SurvivalDataset, opts: &FitOptions) -> Result<CoxModel> {
    if ds.p() == 0 {
        return Err(Error::invalid("stepwise selection needs at least one covariate"));
    }
    let mut current = fit(ds, &[], opts)?;
    let mut first_round = true;
    loop {
        let moves: Vec<Move> = (0..ds.p())
            .map(|j| {
                if current.selected.contains(&j) {
                    Move::Drop(j)
                } else {
                    Move::Add(j)
                }
            })
            .collect();
        let fits: Vec<(Move, Result<CoxModel>)> = moves
            .par_iter()
            .map(|&mv| {
                let mut subset = current.selected.clone();
                match mv {
                    Move::Add(j) => {
                        subset.push(j);
                        subset.sort_unstable();
                    }
                    Move::Drop(j) => subset.retain(|&s| s != j),
                }
                (mv, fit(ds, &subset, opts))
            })
            .collect();

        let mut best: Option<(Move, CoxModel)> = None;
        let mut last_err = None;
        for (mv, res) in fits {
            match res {
                Ok(m) => {
                    let better = match &best {
                        None => true,
                        Some((bmv, b)) => {
                            m.aic < b.aic || (m.aic == b.aic && mv.covariate() < bmv.covariate())
                        }
                    };
                    if better {
                        best = Some((mv, m));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let Some((_, best)) = best else {
            if first_round {
                return Err(last_err.unwrap_or(Error::NoEvents));
            }
            current.partial_search = true;
            return Ok(current);
        };
        first_round = false;
        if best.aic < current.aic - 1e-10 {
            current = best;
        } else {
            return Ok(current);
        }
    }
}
