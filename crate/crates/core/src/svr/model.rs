use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scaler::FeatureScaler;
use super::smo::{rbf, DualSolution};
use super::SvrParams;
use crate::{Error, Result};

pub const MODEL_VERSION: &str = "gvqp-svr-1";

/// Trained epsilon-SVR. Support vectors live in scaled space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub version: String,
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha_i*` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub scaler: FeatureScaler,
}

impl SvrModel {
    pub fn from_solution(scaled: &[Vec<f64>], sol: &DualSolution, params: SvrParams, scaler: FeatureScaler) -> Self {
        let (support_vectors, dual_coefs) = scaled
            .iter()
            .zip(sol.coefficients())
            .filter(|(_, c)| *c != 0.0)
            .map(|(x, c)| (x.clone(), c))
            .unzip();
        SvrModel {
            version: MODEL_VERSION.to_string(),
            c: params.c,
            gamma: params.gamma,
            epsilon: params.epsilon,
            bias: sol.bias,
            support_vectors,
            dual_coefs,
            scaler,
        }
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn support_vector_count(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        let z = self.scaler.transform(x);
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * rbf(sv, &z, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

pub fn save_model(path: &Path, model: &SvrModel) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SvrModel> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("version").and_then(|v| v.as_str()).unwrap_or("<missing>");
    if found != MODEL_VERSION {
        return Err(Error::ModelVersion {
            expected: MODEL_VERSION.to_string(),
            found: found.to_string(),
        });
    }
    let model: SvrModel = serde_json::from_value(value)?;
    if model.support_vectors.len() != model.dual_coefs.len()
        || model.scaler.min.len() != model.scaler.max.len()
        || model.support_vectors.iter().any(|sv| sv.len() != model.scaler.dim())
    {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "inconsistent model dimensions".into(),
        });
    }
    Ok(model)
}
