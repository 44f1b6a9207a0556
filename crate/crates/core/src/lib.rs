//! Stable variable selection and prediction for right-censored survival
//! data.
//!
//! Two families of methods share one data model ([`data`]):
//!
//! * Cox-model selection wrapped in the bootstrap: stepwise AIC (BSS), the
//!   Lasso (BLS) and the randomized Lasso (BRLS), see [`selection`].
//! * Survival trees grown with the logrank criterion ([`tree`]), stabilized
//!   at node level by bootstrap voting ([`bnls`]) or aggregated into random
//!   survival forests ([`forest`]).
//!
//! Models are compared with Harrell's concordance index over repeated
//! train/test splits ([`evaluation`]).
//!
//! Penalties use the Lagrangian form `log PL(β) − λ Σ|β_j|/W_j`: a larger
//! `λ` admits *fewer* covariates, the reverse of the constraint-radius
//! form `Σ|β_j| ≤ λ`.

pub mod bnls;
pub mod cox;
pub mod curve;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod lasso;
mod linalg;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod tree;

pub use cox::{CoxModel, FitOptions};
pub use curve::NelsonAalenCurve;
pub use data::{CovariateKind, CovariateSpec, SurvivalDataset, SurvivalRecord};
pub use error::{Error, Result};
pub use forest::Forest;
pub use tree::SurvivalTree;
