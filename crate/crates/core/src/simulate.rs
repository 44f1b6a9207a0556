//! Synthetic right-censored data from a Cox model with exponential
//! baseline hazard. Used by the test suites and handy for trying the CLI
//! without real data.

use rand_distr::{Distribution, Exp, StandardNormal};

use crate::data::SurvivalDataset;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub n: usize,
    /// One coefficient per covariate; zeros are noise columns.
    pub coefficients: Vec<f64>,
    /// Target expected censoring fraction in `[0, 1)`.
    pub censoring: f64,
    pub baseline_rate: f64,
}

impl SimulationSpec {
    pub fn small() -> Self {
        SimulationSpec {
            n: 60,
            coefficients: vec![0.8, -0.5, 0.0],
            censoring: 0.25,
            baseline_rate: 0.1,
        }
    }

    /// `p` covariates with `±1` effects at `support` and zeros elsewhere.
    pub fn sparse(n: usize, p: usize, support: &[usize], censoring: f64) -> Self {
        let mut coefficients = vec![0.0; p];
        for (k, &j) in support.iter().enumerate() {
            coefficients[j] = if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        SimulationSpec {
            n,
            coefficients,
            censoring,
            baseline_rate: 0.1,
        }
    }
}

/// Independent standard normal covariates named `z1, z2, ...`; event times
/// `T ~ Exp(λ₀ e^{β'Z})` and censoring `C ~ Exp(c)` where `c` is solved so
/// the expected censored fraction matches the spec.
pub fn simulate_cox(spec: &SimulationSpec, seed: u64) -> SurvivalDataset {
    let mut rng = rng::rng_from_seed(seed);
    let p = spec.coefficients.len();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..spec.n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let hazards: Vec<f64> = (0..spec.n)
        .map(|i| {
            let eta: f64 = (0..p).map(|j| spec.coefficients[j] * columns[j][i]).sum();
            spec.baseline_rate * eta.exp()
        })
        .collect();
    let unit = Exp::new(1.0).expect("unit rate");
    let censor_rate = censoring_rate(&hazards, spec.censoring);
    let mut times = Vec::with_capacity(spec.n);
    let mut events = Vec::with_capacity(spec.n);
    for h in &hazards {
        let t: f64 = unit.sample(&mut rng) / h;
        let c: f64 = if censor_rate > 0.0 {
            unit.sample(&mut rng) / censor_rate
        } else {
            f64::INFINITY
        };
        times.push(t.min(c));
        events.push(t <= c);
    }
    let names: Vec<String> = (1..=p).map(|j| format!("z{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    SurvivalDataset::from_columns(&times, &events, &columns, &refs).expect("simulated data is valid")
}

/// Solves `mean_i c / (c + h_i) = target` for `c` by bisection in log space.
fn censoring_rate(hazards: &[f64], target: f64) -> f64 {
    if target <= 0.0 || hazards.is_empty() {
        return 0.0;
    }
    let frac = |c: f64| hazards.iter().map(|h| c / (c + h)).sum::<f64>() / hazards.len() as f64;
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}
