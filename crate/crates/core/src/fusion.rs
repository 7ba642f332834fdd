//! Score fusion and the named strategies built on it.
//!
//! A [`FusionStrategy`] declares which regressors to train, on which
//! feature sources, and how their outputs combine into one score.
//! Strategies are looked up by name in a [`StrategyRegistry`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    #[default]
    Mean,
    Product,
    Single,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [FusionMode::Mean, FusionMode::Product, FusionMode::Single];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Mean => "mean",
            FusionMode::Product => "product",
            FusionMode::Single => "single",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "fusion mode",
                name: s.to_string(),
                available: FusionMode::ALL.iter().map(|m| m.to_string()).collect(),
            })
    }
}

/// Combines two regressor outputs. `Single` passes `m1` through.
pub fn fuse(m1: f64, m2: f64, mode: FusionMode) -> Result<f64> {
    if !m1.is_finite() || (mode != FusionMode::Single && !m2.is_finite()) {
        return Err(Error::NonFinite(format!("fusion inputs {m1}, {m2}")));
    }
    Ok(match mode {
        FusionMode::Mean => (m1 + m2) / 2.0,
        FusionMode::Product => m1 * m2,
        FusionMode::Single => m1,
    })
}

/// Feature vector a regressor is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Nss,
    Deep,
    /// NSS followed by deep features in one vector.
    Concat,
}

impl FeatureSource {
    pub fn needs_deep(self) -> bool {
        self != FeatureSource::Nss
    }

    /// Assembles the vector for one video.
    pub fn assemble(self, nss: &[f64], deep: Option<&[f64]>) -> Result<Vec<f64>> {
        let need = || Error::arg("deep features are required for this regressor");
        Ok(match self {
            FeatureSource::Nss => nss.to_vec(),
            FeatureSource::Deep => deep.ok_or_else(need)?.to_vec(),
            FeatureSource::Concat => {
                let d = deep.ok_or_else(need)?;
                nss.iter().chain(d).copied().collect()
            }
        })
    }
}

/// One regressor slot of a strategy. `file` names its model file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegressorSpec {
    pub name: &'static str,
    pub source: FeatureSource,
    pub file: &'static str,
}

pub const NSS_REGRESSOR: RegressorSpec = RegressorSpec {
    name: "nss",
    source: FeatureSource::Nss,
    file: "svr1.json",
};
pub const DEEP_REGRESSOR: RegressorSpec = RegressorSpec {
    name: "deep",
    source: FeatureSource::Deep,
    file: "svr2.json",
};
pub const JOINT_REGRESSOR: RegressorSpec = RegressorSpec {
    name: "joint",
    source: FeatureSource::Concat,
    file: "svr1.json",
};

pub trait FusionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn regressors(&self) -> &'static [RegressorSpec];

    /// Combines outputs given in [`FusionStrategy::regressors`] order.
    fn fuse(&self, outputs: &[f64]) -> Result<f64>;

    fn needs_deep(&self) -> bool {
        self.regressors().iter().any(|r| r.source.needs_deep())
    }
}

fn check_arity(name: &str, outputs: &[f64], n: usize) -> Result<()> {
    if outputs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "strategy {name} combines {n} outputs, got {}",
            outputs.len()
        )));
    }
    Ok(())
}

/// NSS and deep regressors combined by [`fuse`].
struct TwoRegressor(FusionMode);

impl FusionStrategy for TwoRegressor {
    fn name(&self) -> &'static str {
        self.0.as_str()
    }

    fn regressors(&self) -> &'static [RegressorSpec] {
        &[NSS_REGRESSOR, DEEP_REGRESSOR]
    }

    fn fuse(&self, outputs: &[f64]) -> Result<f64> {
        check_arity(self.name(), outputs, 2)?;
        fuse(outputs[0], outputs[1], self.0)
    }
}

/// One regressor whose output is the score.
struct SingleRegressor {
    name: &'static str,
    spec: &'static [RegressorSpec],
}

impl FusionStrategy for SingleRegressor {
    fn name(&self) -> &'static str {
        self.name
    }

    fn regressors(&self) -> &'static [RegressorSpec] {
        self.spec
    }

    fn fuse(&self, outputs: &[f64]) -> Result<f64> {
        check_arity(self.name, outputs, 1)?;
        fuse(outputs[0], f64::NAN, FusionMode::Single)
    }
}

pub struct StrategyRegistry {
    entries: Vec<Box<dyn FusionStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry { entries: Vec::new() }
    }

    /// Replaces any strategy already registered under the same name.
    pub fn register(&mut self, strategy: Box<dyn FusionStrategy>) {
        self.entries.retain(|s| s.name() != strategy.name());
        self.entries.push(strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn FusionStrategy> {
        self.entries
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "fusion strategy",
                name: name.to_string(),
                available: self.names().iter().map(|s| s.to_string()).collect(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|s| s.name()).collect()
    }
}

impl Default for StrategyRegistry {
    /// `mean`, `product`, `single`, `nss-only` and `deep-only`.
    fn default() -> Self {
        let mut r = StrategyRegistry::empty();
        r.register(Box::new(TwoRegressor(FusionMode::Mean)));
        r.register(Box::new(TwoRegressor(FusionMode::Product)));
        r.register(Box::new(SingleRegressor {
            name: "single",
            spec: &[JOINT_REGRESSOR],
        }));
        r.register(Box::new(SingleRegressor {
            name: "nss-only",
            spec: &[NSS_REGRESSOR],
        }));
        r.register(Box::new(SingleRegressor {
            name: "deep-only",
            spec: &[DEEP_REGRESSOR],
        }));
        r
    }
}
