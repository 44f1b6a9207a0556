//! L1-penalized Cox regression.
//!
//! Maximizes `log PL(β) − λ Σ_j |β_j| / W_j` by proximal Newton steps: at
//! each outer iteration the partial likelihood is replaced by its quadratic
//! expansion, which is minimized by cyclic coordinate descent with
//! soft-thresholding, followed by a backtracking line search on the true
//! penalized objective.
//!
//! `λ` is the Lagrangian penalty strength: increasing it removes
//! covariates. Inputs must have unit-norm columns (see
//! [`crate::data::normalize_columns`]).

use rand::Rng as _;

use crate::cox::{CoxModel, CoxProblem};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

const MAX_OUTER: usize = 500;
const MAX_SWEEPS: usize = 10_000;
const MAX_ABS_BETA: f64 = 50.0;
/// Coordinate-descent sweeps stop once no coefficient moves more than this.
const SWEEP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub lambda: f64,
    /// Per-covariate weights `W_j`; covariate `j` is penalized by `λ / W_j`.
    pub weights: Vec<f64>,
}

impl PenaltySpec {
    pub fn unit(lambda: f64, p: usize) -> Self {
        PenaltySpec {
            lambda,
            weights: vec![1.0; p],
        }
    }

    pub fn with_weights(lambda: f64, weights: Vec<f64>) -> Self {
        PenaltySpec { lambda, weights }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if self.weights.len() != p {
            return Err(Error::invalid(format!(
                "{} penalty weights for {p} covariates",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("penalty weights must be positive"));
        }
        Ok(())
    }

    /// Effective per-covariate penalty `λ / W_j`.
    pub fn penalties(&self) -> Vec<f64> {
        self.weights.iter().map(|w| self.lambda / w).collect()
    }
}

/// Draws `W_j = alpha` with probability `p_w`, otherwise `W_j = 1`.
pub fn draw_random_weights(p: usize, alpha: f64, p_w: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::rng_from_seed(seed);
    random_weights(p, alpha, p_w, &mut rng)
}

pub(crate) fn random_weights(p: usize, alpha: f64, p_w: f64, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 1)")));
    }
    if !(p_w > 0.0 && p_w < 1.0) {
        return Err(Error::invalid(format!("p_w {p_w} not in (0, 1)")));
    }
    Ok((0..p)
        .map(|_| if rng.random_bool(p_w) { alpha } else { 1.0 })
        .collect())
}

fn check_normalized(ds: &SurvivalDataset) -> Result<()> {
    if ds.has_categorical() {
        return Err(Error::invalid("penalized fits need expanded, normalized covariates"));
    }
    for (spec, norm) in ds.specs().iter().zip(ds.column_norms()) {
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized {
                covariate: spec.name.clone(),
                norm,
            });
        }
    }
    Ok(())
}

/// Smallest `λ` (with the given weights) at which `β = 0` is optimal:
/// `max_j W_j |∂ log PL / ∂β_j (0)|`.
pub fn lambda_max(ds: &SurvivalDataset, weights: &[f64]) -> Result<f64> {
    let all: Vec<usize> = (0..ds.p()).collect();
    let problem = CoxProblem::new(ds, &all)?;
    let g = problem.evaluate(&vec![0.0; ds.p()], false).gradient;
    Ok(g.iter().zip(weights).fold(0.0, |m, (g, w)| m.max(g.abs() * w)))
}

/// Largest violation of the optimality conditions of the penalized problem.
pub fn kkt_residual(gradient: &[f64], beta: &[f64], penalties: &[f64]) -> f64 {
    gradient
        .iter()
        .zip(beta)
        .zip(penalties)
        .map(|((&g, &b), &pen)| {
            if b == 0.0 {
                (g.abs() - pen).max(0.0)
            } else {
                (g - pen * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Maximizer of `c·(b − b0) − a/2·(b − b0)² − γ|b|` over `b`, for the
/// one-coordinate quadratic model with slope `c` and curvature `a > 0` at
/// `b0`.
pub(crate) fn coordinate_update(b0: f64, c: f64, a: f64, gamma: f64) -> f64 {
    soft_threshold(a * b0 + c, gamma) / a
}

fn objective(problem: &CoxProblem, beta: &[f64], penalties: &[f64]) -> f64 {
    problem.value(beta) - beta.iter().zip(penalties).map(|(b, p)| b.abs() * p).sum::<f64>()
}

pub(crate) struct PenalizedFit {
    pub beta: Vec<f64>,
    pub log_pl: f64,
    pub iterations: usize,
}

pub(crate) fn solve(
    problem: &CoxProblem,
    penalties: &[f64],
    start: Vec<f64>,
    tol: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<PenalizedFit> {
    let k = problem.dim();
    let mut beta = start;
    let mut obj = objective(problem, &beta, penalties);
    if let Some(t) = trace.as_deref_mut() {
        t.push(obj);
    }
    for outer in 0..MAX_OUTER {
        let ev = problem.evaluate(&beta, true);
        if kkt_residual(&ev.gradient, &beta, penalties) <= tol {
            return Ok(PenalizedFit {
                beta,
                log_pl: ev.value,
                iterations: outer,
            });
        }
        let h = &ev.hessian;
        let mut next = beta.clone();
        // Gradient of the quadratic model at `next`.
        let mut r = ev.gradient.clone();
        let inner_tol = SWEEP_TOL.min(tol);
        for _ in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for j in 0..k {
                let a = -h[j * k + j];
                if a <= 1e-14 {
                    continue;
                }
                let nb = coordinate_update(next[j], r[j], a, penalties[j]);
                let d = nb - next[j];
                if d != 0.0 {
                    for m in 0..k {
                        r[m] += h[m * k + j] * d;
                    }
                    next[j] = nb;
                    max_change = max_change.max(d.abs());
                }
            }
            if max_change <= inner_tol {
                break;
            }
        }
        let dir: Vec<f64> = next.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + scale * d).collect();
            let cand_obj = objective(problem, &cand, penalties);
            if cand_obj.is_finite() && cand_obj >= obj - 1e-13 * obj.abs() {
                accepted = Some((cand, cand_obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_obj)) = accepted else {
            return Err(Error::NotConverged {
                gradient_norm: kkt_residual(&ev.gradient, &beta, penalties),
                beta,
                iterations: outer,
            });
        };
        beta = cand;
        obj = cand_obj;
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        let max_abs = linalg::max_abs(&beta);
        if max_abs > MAX_ABS_BETA {
            return Err(Error::Diverged {
                beta,
                iterations: outer + 1,
                max_abs,
            });
        }
    }
    let ev = problem.evaluate(&beta, false);
    Err(Error::NotConverged {
        gradient_norm: kkt_residual(&ev.gradient, &beta, penalties),
        beta,
        iterations: MAX_OUTER,
    })
}

fn to_model(ds: &SurvivalDataset, fit: PenalizedFit) -> CoxModel {
    let selected: Vec<usize> = (0..fit.beta.len()).filter(|&j| fit.beta[j] != 0.0).collect();
    let names = selected.iter().map(|&j| ds.specs()[j].name.clone()).collect();
    let beta = selected.iter().map(|&j| fit.beta[j]).collect();
    CoxModel::new(selected, names, beta, fit.log_pl, fit.iterations)
}

pub(crate) fn fit_penalized_from(
    ds: &SurvivalDataset,
    penalties: &[f64],
    start: Vec<f64>,
    tol: f64,
) -> Result<(CoxModel, Vec<f64>)> {
    let all: Vec<usize> = (0..ds.p()).collect();
    let problem = CoxProblem::new(ds, &all)?;
    let fit = solve(&problem, penalties, start, tol, None)?;
    let full = fit.beta.clone();
    Ok((to_model(ds, fit), full))
}

/// Penalized fit with an explicit penalty strength per covariate.
pub fn fit_l1_with_penalties(ds: &SurvivalDataset, penalties: &[f64], tol: f64) -> Result<CoxModel> {
    check_normalized(ds)?;
    if penalties.len() != ds.p() || penalties.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid("one finite nonnegative penalty per covariate required"));
    }
    Ok(fit_penalized_from(ds, penalties, vec![0.0; ds.p()], tol)?.0)
}

/// Weighted Lasso fit; `selected` holds the nonzero coefficients.
pub fn fit_l1(ds: &SurvivalDataset, pen: &PenaltySpec, tol: f64) -> Result<CoxModel> {
    pen.validate(ds.p())?;
    fit_l1_with_penalties(ds, &pen.penalties(), tol)
}

/// Fits along a strictly descending `λ` grid, warm-starting each point
/// from the previous solution. The template supplies the weights.
pub fn regularization_path(
    ds: &SurvivalDataset,
    lambdas: &[f64],
    template: &PenaltySpec,
    tol: f64,
) -> Result<Vec<CoxModel>> {
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly descending"));
    }
    check_normalized(ds)?;
    let all: Vec<usize> = (0..ds.p()).collect();
    let problem = CoxProblem::new(ds, &all)?;
    let mut start = vec![0.0; ds.p()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let pen = PenaltySpec::with_weights(lambda, template.weights.clone());
        pen.validate(ds.p())?;
        let fit = solve(&problem, &pen.penalties(), start, tol, None)?;
        start = fit.beta.clone();
        out.push(to_model(ds, fit));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::{self, FitOptions};
    use crate::data::normalize_columns;
    use crate::simulate::{simulate_cox, SimulationSpec};

    fn normalized(seed: u64) -> SurvivalDataset {
        let spec = SimulationSpec {
            n: 120,
            coefficients: vec![1.0, -0.7, 0.0, 0.3, 0.0],
            censoring: 0.3,
            baseline_rate: 0.1,
        };
        normalize_columns(&simulate_cox(&spec, seed)).unwrap().0
    }

    fn full_beta(m: &CoxModel, p: usize) -> Vec<f64> {
        let mut b = vec![0.0; p];
        for (&j, v) in m.selected.iter().zip(&m.beta) {
            b[j] = *v;
        }
        b
    }

    fn kkt_of(ds: &SurvivalDataset, m: &CoxModel, pens: &[f64]) -> f64 {
        let all: Vec<usize> = (0..ds.p()).collect();
        let b = full_beta(m, ds.p());
        let g = cox::partial_likelihood_derivatives(ds, &all, &b).unwrap().gradient;
        kkt_residual(&g, &b, pens)
    }

    #[test]
    fn soft_threshold_matches_hand_formula() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        // One coordinate, fixed quadratic model: slope c=2, curvature a=4 at
        // b0=0.5, penalty 1. Maximize 2(b-0.5) - 2(b-0.5)^2 - |b|:
        // for b>0 stationarity gives 2 - 4(b-0.5) - 1 = 0, b = 0.75.
        assert!((coordinate_update(0.5, 2.0, 4.0, 1.0) - 0.75).abs() < 1e-15);
        // Slope too weak to leave zero: |a*0 + c| <= gamma.
        assert_eq!(coordinate_update(0.0, 0.9, 4.0, 1.0), 0.0);
    }

    #[test]
    fn lambda_above_max_gives_exact_zero() {
        let ds = normalized(1);
        let lmax = lambda_max(&ds, &vec![1.0; ds.p()]).unwrap();
        let m = fit_l1(&ds, &PenaltySpec::unit(lmax, ds.p()), 1e-8).unwrap();
        assert!(m.selected.is_empty());
        let m = fit_l1(&ds, &PenaltySpec::unit(lmax * 1.5, ds.p()), 1e-8).unwrap();
        assert!(m.selected.is_empty() && m.beta.is_empty());
        let m = fit_l1(&ds, &PenaltySpec::unit(lmax * 0.9, ds.p()), 1e-8).unwrap();
        assert!(!m.selected.is_empty());
    }

    #[test]
    fn zero_penalty_matches_newton() {
        let ds = normalized(2);
        let m = fit_l1(&ds, &PenaltySpec::unit(0.0, ds.p()), 1e-9).unwrap();
        let all: Vec<usize> = (0..ds.p()).collect();
        let newton = cox::fit(&ds, &all, &FitOptions::default()).unwrap();
        for (a, b) in full_beta(&m, ds.p()).iter().zip(&newton.beta) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn kkt_holds_across_lambdas() {
        let ds = normalized(3);
        let lmax = lambda_max(&ds, &vec![1.0; ds.p()]).unwrap();
        for frac in [0.05, 0.2, 0.5, 0.8] {
            let pen = PenaltySpec::unit(lmax * frac, ds.p());
            let m = fit_l1(&ds, &pen, 1e-8).unwrap();
            assert!(kkt_of(&ds, &m, &pen.penalties()) <= 1e-6);
        }
    }

    #[test]
    fn weight_alpha_equals_inflated_penalty() {
        let ds = normalized(4);
        let lmax = lambda_max(&ds, &vec![1.0; ds.p()]).unwrap();
        let lambda = 0.3 * lmax;
        let alpha = 0.4;
        let mut weights = vec![1.0; ds.p()];
        weights[0] = alpha;
        let weighted = fit_l1(&ds, &PenaltySpec::with_weights(lambda, weights.clone()), 1e-10).unwrap();
        let mut pens = vec![lambda; ds.p()];
        pens[0] = lambda / alpha;
        let explicit = fit_l1_with_penalties(&ds, &pens, 1e-10).unwrap();
        let (a, b) = (full_beta(&weighted, ds.p()), full_beta(&explicit, ds.p()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }

        // Second route: a weight is a rescaling of its column. With covariate
        // j multiplied by W_j and unit penalties, γ_j = β_j / W_j.
        let scaled_cols: Vec<Vec<f64>> = (0..ds.p())
            .map(|j| ds.column(j).iter().map(|v| v * weights[j]).collect())
            .collect();
        let names = ds.names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let scaled = SurvivalDataset::from_columns(&ds.times(), &ds.events(), &scaled_cols, &refs).unwrap();
        let (_, gamma) = fit_penalized_from(&scaled, &vec![lambda; ds.p()], vec![0.0; ds.p()], 1e-10).unwrap();
        for j in 0..ds.p() {
            assert!((gamma[j] * weights[j] - a[j]).abs() < 1e-6, "coef {j}");
        }
    }

    #[test]
    fn objective_never_decreases() {
        let ds = normalized(5);
        let all: Vec<usize> = (0..ds.p()).collect();
        let problem = CoxProblem::new(&ds, &all).unwrap();
        let lmax = lambda_max(&ds, &vec![1.0; ds.p()]).unwrap();
        let pens = vec![0.1 * lmax; ds.p()];
        let mut trace = Vec::new();
        solve(&problem, &pens, vec![0.0; ds.p()], 1e-9, Some(&mut trace)).unwrap();
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn rejects_unnormalized_input() {
        let ds = simulate_cox(&SimulationSpec::small(), 1);
        assert!(matches!(
            fit_l1(&ds, &PenaltySpec::unit(1.0, ds.p()), 1e-8),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn random_weights_fraction() {
        let w = draw_random_weights(100_000, 0.3, 0.5, 8).unwrap();
        let frac = w.iter().filter(|&&x| x == 0.3).count() as f64 / w.len() as f64;
        // Binomial sd at p=0.5, n=1e5 is 0.0016; 0.005 is about 3 sd.
        assert!((frac - 0.5).abs() < 0.005, "{frac}");
        assert!(w.iter().all(|&x| x == 0.3 || x == 1.0));
        assert_eq!(w, draw_random_weights(100_000, 0.3, 0.5, 8).unwrap());
        assert!(draw_random_weights(3, 1.0, 0.5, 1).is_err());
        assert!(draw_random_weights(3, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn warm_path_matches_cold_fits() {
        let ds = normalized(6);
        let lmax = lambda_max(&ds, &vec![1.0; ds.p()]).unwrap();
        let grid: Vec<f64> = (0..8).map(|k| lmax * 1.2 * 0.6f64.powi(k)).collect();
        let template = PenaltySpec::unit(0.0, ds.p());
        let path = regularization_path(&ds, &grid, &template, 1e-9).unwrap();
        assert!(path[0].selected.is_empty());
        for (m, &l) in path.iter().zip(&grid) {
            let cold = fit_l1(&ds, &PenaltySpec::unit(l, ds.p()), 1e-9).unwrap();
            for (a, b) in full_beta(m, ds.p()).iter().zip(full_beta(&cold, ds.p())) {
                assert!((a - b).abs() < 1e-5);
            }
        }
        let single = regularization_path(&ds, &grid[3..4], &template, 1e-9).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0], fit_l1(&ds, &PenaltySpec::unit(grid[3], ds.p()), 1e-9).unwrap());
        assert!(regularization_path(&ds, &[0.1, 0.2], &template, 1e-9).is_err());
    }
}
