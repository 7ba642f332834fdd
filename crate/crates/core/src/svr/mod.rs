//! Epsilon-SVR with an RBF kernel, trained by sequential minimal
//! optimization.

mod grid;
mod model;
mod scaler;
mod smo;

pub use grid::{assign_folds, grid_search, GridConfig, GridResult, GridScore};
pub use model::{load_model, save_model, SvrModel, MODEL_VERSION};
pub use scaler::FeatureScaler;
pub use smo::{dual_objective, rbf, solve, DualSolution, SmoParams};

use crate::{Error, Result};

/// Hyperparameters of one training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SvrParams {
    pub const DEFAULT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_ITER: usize = 10_000_000;

    pub fn new(c: f64, gamma: f64, epsilon: f64) -> Self {
        SvrParams {
            c,
            gamma,
            epsilon,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::arg(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("tolerance must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Default tube width: a tenth of the target standard deviation.
pub fn default_epsilon(y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    0.1 * (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn check_training_set(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows vs {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::arg(format!("need at least 2 training rows, got {}", x.len())));
    }
    let dim = x[0].len();
    for (k, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch(format!("row {k} has {} features, expected {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature in training row {k}")));
        }
    }
    if let Some(k) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("target {k}")));
    }
    Ok(dim)
}

/// Fits a scaler on `x`, solves the dual and packages the model.
pub fn train_svr(x: &[Vec<f64>], y: &[f64], params: SvrParams) -> Result<SvrModel> {
    train_svr_detailed(x, y, params).map(|(m, _)| m)
}

/// Like [`train_svr`], also returning the full dual solution.
pub fn train_svr_detailed(x: &[Vec<f64>], y: &[f64], params: SvrParams) -> Result<(SvrModel, DualSolution)> {
    check_training_set(x, y)?;
    params.validate()?;
    let scaler = FeatureScaler::fit(x)?;
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
    let sol = solve(
        &scaled,
        y,
        &SmoParams {
            c: params.c,
            gamma: params.gamma,
            epsilon: params.epsilon,
            tol: params.tol,
            max_iter: params.max_iter,
        },
    )?;
    let model = SvrModel::from_solution(&scaled, &sol, params, scaler);
    Ok((model, sol))
}
