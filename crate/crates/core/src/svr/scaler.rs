use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-dimension min-max scaling to `[-1, 1]`, fit on training data.
/// Inputs outside the training range are not clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let first = x.first().ok_or_else(|| Error::arg("cannot fit a scaler on zero rows"))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in &x[1..] {
            if row.len() != min.len() {
                return Err(Error::DimensionMismatch("ragged feature matrix".into()));
            }
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(FeatureScaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Constant training dimensions map to 0.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    -1.0 + 2.0 * (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
