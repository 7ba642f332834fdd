use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::lcc_rmse;
use super::metrics::{median, pearson, rmse, srocc};
use crate::deepfeat::JoinedRow;
use crate::fusion::{FeatureSource, FusionStrategy, RegressorSpec};
use crate::svr::{assign_folds, grid_search, train_svr, GridConfig, GridResult, SvrModel};
use crate::{Error, Result};

pub const MIN_DATASET: usize = 10;

/// Labelled features in a fixed video order.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalDataset {
    pub ids: Vec<String>,
    pub mos: Vec<f64>,
    pub nss: Vec<Vec<f64>>,
    pub deep: Option<Vec<Vec<f64>>>,
}

impl EvalDataset {
    /// Deep features are kept only when every row carries them.
    pub fn from_joined(rows: &[JoinedRow]) -> Self {
        let deep = rows.iter().map(|r| r.deep.clone()).collect::<Option<Vec<_>>>();
        EvalDataset {
            ids: rows.iter().map(|r| r.video_id.clone()).collect(),
            mos: rows.iter().map(|r| r.mos).collect(),
            nss: rows.iter().map(|r| r.nss.clone()).collect(),
            deep: if rows.is_empty() { None } else { deep },
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn features(&self, source: FeatureSource, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        idx.iter()
            .map(|&i| source.assemble(&self.nss[i], self.deep.as_ref().map(|d| d[i].as_slice())))
            .collect()
    }

    pub fn targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.mos[i]).collect()
    }

    fn check_strategy(&self, strategy: &dyn FusionStrategy) -> Result<()> {
        if strategy.needs_deep() && self.deep.is_none() {
            return Err(Error::arg(format!(
                "strategy {} needs deep features for every video",
                strategy.name()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedRegressor {
    pub spec: RegressorSpec,
    pub model: SvrModel,
    pub search: GridResult,
}

/// All regressors of one strategy, trained on the same videos.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPipeline {
    pub regressors: Vec<TrainedRegressor>,
}

impl TrainedPipeline {
    /// Per-video regressor outputs and the fused score.
    pub fn predict(
        &self,
        data: &EvalDataset,
        strategy: &dyn FusionStrategy,
        idx: &[usize],
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        let per_model = self
            .regressors
            .iter()
            .map(|r| r.model.predict_many(&data.features(r.spec.source, idx)?))
            .collect::<Result<Vec<_>>>()?;
        (0..idx.len())
            .map(|k| {
                let outputs: Vec<f64> = per_model.iter().map(|p| p[k]).collect();
                let fused = strategy.fuse(&outputs)?;
                Ok((outputs, fused))
            })
            .collect()
    }
}

/// Grid search then a final fit, on the `train` rows only, for every
/// regressor of `strategy`.
pub fn train_pipeline(
    data: &EvalDataset,
    strategy: &dyn FusionStrategy,
    train: &[usize],
    grid: &GridConfig,
) -> Result<TrainedPipeline> {
    data.check_strategy(strategy)?;
    let y = data.targets(train);
    let regressors = strategy
        .regressors()
        .par_iter()
        .map(|spec| {
            let x = data.features(spec.source, train)?;
            let search = grid_search(&x, &y, grid)?;
            let model = train_svr(&x, &y, grid.params(search.c, search.gamma, search.epsilon))?;
            Ok(TrainedRegressor {
                spec: *spec,
                model,
                search,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedPipeline { regressors })
}

/// SROCC, LCC and RMSE of one set of predictions. Sets too small for a
/// metric yield flagged zeros; below five pairs the logistic step is
/// skipped and raw values are reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub srocc: f64,
    pub lcc: f64,
    pub rmse: f64,
    pub srocc_degenerate: bool,
    pub lcc_degenerate: bool,
    pub logistic_converged: bool,
    pub logistic_fallback: bool,
}

pub fn split_metrics(pred: &[f64], mos: &[f64]) -> Result<SplitMetrics> {
    let s = if pred.len() >= 3 {
        srocc(pred, mos)?
    } else {
        super::Correlation {
            value: 0.0,
            degenerate: true,
        }
    };
    if pred.len() >= 5 {
        let fit = lcc_rmse(pred, mos)?;
        Ok(SplitMetrics {
            srocc: s.value,
            lcc: fit.lcc.value,
            rmse: fit.rmse,
            srocc_degenerate: s.degenerate,
            lcc_degenerate: fit.lcc.degenerate,
            logistic_converged: fit.converged,
            logistic_fallback: fit.fallback,
        })
    } else {
        let l = if pred.len() >= 2 {
            pearson(pred, mos)?
        } else {
            super::Correlation {
                value: 0.0,
                degenerate: true,
            }
        };
        Ok(SplitMetrics {
            srocc: s.value,
            lcc: l.value,
            rmse: rmse(pred, mos),
            srocc_degenerate: s.degenerate,
            lcc_degenerate: l.degenerate,
            logistic_converged: false,
            logistic_fallback: true,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Search space; its seed is replaced per split.
    pub grid: GridConfig,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_frac: 0.8,
            iterations: 100,
            seed: 0,
            grid: GridConfig::default(),
        }
    }
}

impl SplitConfig {
    pub fn train_size(&self, n: usize) -> usize {
        (self.train_frac * n as f64).round() as usize
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < MIN_DATASET {
            return Err(Error::arg(format!("need at least {MIN_DATASET} videos, got {n}")));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::arg(format!("train fraction must be in (0, 1), got {}", self.train_frac)));
        }
        if self.iterations == 0 {
            return Err(Error::arg("iterations must be >= 1"));
        }
        let t = self.train_size(n);
        if t < 2 || t >= n {
            return Err(Error::arg(format!("split of {n} videos leaves {t} for training")));
        }
        self.grid.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChosenParams {
    pub regressor: String,
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub cv_srocc: f64,
}

impl ChosenParams {
    fn from(r: &TrainedRegressor) -> Self {
        ChosenParams {
            regressor: r.spec.name.to_string(),
            c: r.search.c,
            gamma: r.search.gamma,
            epsilon: r.search.epsilon,
            cv_srocc: r.search.mean_srocc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub iteration: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(flatten)]
    pub metrics: SplitMetrics,
    pub params: Vec<ChosenParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy: String,
    pub seed: u64,
    pub train_frac: f64,
    pub dataset_size: usize,
    pub median_srocc: f64,
    pub median_lcc: f64,
    pub median_rmse: f64,
    pub splits: Vec<SplitRow>,
}

impl EvalReport {
    pub fn srocc_values(&self) -> Vec<f64> {
        self.splits.iter().map(|r| r.metrics.srocc).collect()
    }

    pub fn lcc_values(&self) -> Vec<f64> {
        self.splits.iter().map(|r| r.metrics.lcc).collect()
    }

    /// Median summary followed by one line per split.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>9}", "Model", "SROCC", "LCC", "RMSE");
        let _ = writeln!(
            s,
            "{:<12} {:>8.4} {:>8.4} {:>9.4}",
            self.strategy, self.median_srocc, self.median_lcc, self.median_rmse
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>5} {:>20} {:>6} {:>5} {:>8} {:>8} {:>9}  params",
            "split", "seed", "train", "test", "SROCC", "LCC", "RMSE"
        );
        for r in &self.splits {
            let params: Vec<String> = r
                .params
                .iter()
                .map(|p| format!("{}:C={},g={}", p.regressor, p.c, p.gamma))
                .collect();
            let _ = writeln!(
                s,
                "{:>5} {:>20} {:>6} {:>5} {:>8.4} {:>8.4} {:>9.4}  {}",
                r.iteration,
                r.seed,
                r.train_size,
                r.test_size,
                r.metrics.srocc,
                r.metrics.lcc,
                r.metrics.rmse,
                params.join(" ")
            );
        }
        s
    }
}

/// Train/test index sets for one split seed; the third value seeds the
/// inner grid search.
fn split_indices(n: usize, train_size: usize, seed: u64) -> (Vec<usize>, Vec<usize>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let test = perm.split_off(train_size);
    (perm, test, rng.next_u64())
}

/// Repeated random splits. Split seeds are drawn in order from a ChaCha8
/// generator seeded with `cfg.seed`; rows are reported by iteration.
pub fn run_splits(data: &EvalDataset, strategy: &dyn FusionStrategy, cfg: &SplitConfig) -> Result<EvalReport> {
    cfg.validate(data.len())?;
    data.check_strategy(strategy)?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.iterations).map(|_| master.next_u64()).collect();
    let train_size = cfg.train_size(data.len());

    let splits = seeds
        .par_iter()
        .enumerate()
        .map(|(iteration, &seed)| {
            let (train, test, grid_seed) = split_indices(data.len(), train_size, seed);
            let grid = GridConfig {
                seed: grid_seed,
                ..cfg.grid.clone()
            };
            let pipeline = train_pipeline(data, strategy, &train, &grid)?;
            let pred: Vec<f64> = pipeline
                .predict(data, strategy, &test)?
                .into_iter()
                .map(|(_, fused)| fused)
                .collect();
            Ok(SplitRow {
                iteration,
                seed,
                train_size: train.len(),
                test_size: test.len(),
                metrics: split_metrics(&pred, &data.targets(&test))?,
                params: pipeline.regressors.iter().map(ChosenParams::from).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pick = |f: fn(&SplitRow) -> f64| median(&splits.iter().map(f).collect::<Vec<_>>());
    Ok(EvalReport {
        strategy: strategy.name().to_string(),
        seed: cfg.seed,
        train_frac: cfg.train_frac,
        dataset_size: data.len(),
        median_srocc: pick(|r| r.metrics.srocc),
        median_lcc: pick(|r| r.metrics.lcc),
        median_rmse: pick(|r| r.metrics.rmse),
        splits,
    })
}

/// Runs every strategy on the same seeded splits.
pub fn run_ablation(
    data: &EvalDataset,
    strategies: &[&dyn FusionStrategy],
    cfg: &SplitConfig,
) -> Result<Vec<EvalReport>> {
    strategies.iter().map(|s| run_splits(data, *s, cfg)).collect()
}

/// Median metrics with one column per strategy.
pub fn ablation_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<6}", "");
    for r in reports {
        let _ = write!(s, " {:>10}", r.strategy);
    }
    let _ = writeln!(s);
    type Column = (&'static str, fn(&EvalReport) -> f64);
    let rows: [Column; 3] = [
        ("SROCC", |r| r.median_srocc),
        ("LCC", |r| r.median_lcc),
        ("RMSE", |r| r.median_rmse),
    ];
    for (name, get) in rows {
        let _ = write!(s, "{name:<6}");
        for r in reports {
            let _ = write!(s, " {:>10.4}", get(r));
        }
        let _ = writeln!(s);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub video_id: String,
    pub pred: f64,
    pub mos: f64,
    pub fold: usize,
}

/// Every video predicted once by a model trained on the other folds.
/// Rows follow dataset order.
pub fn kfold_scatter(
    data: &EvalDataset,
    strategy: &dyn FusionStrategy,
    k: usize,
    seed: u64,
    grid: &GridConfig,
) -> Result<Vec<ScatterRow>> {
    data.check_strategy(strategy)?;
    let folds = assign_folds(data.len(), k, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid_seeds: Vec<u64> = (0..k).map(|_| rng.next_u64()).collect();
    let per_fold = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == fold);
            let grid = GridConfig {
                seed: grid_seeds[fold],
                ..grid.clone()
            };
            let pipeline = train_pipeline(data, strategy, &train, &grid)?;
            let pred = pipeline.predict(data, strategy, &test)?;
            Ok(test.into_iter().zip(pred.into_iter().map(|(_, f)| f)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut preds = vec![f64::NAN; data.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        preds[i] = p;
    }
    Ok((0..data.len())
        .map(|i| ScatterRow {
            video_id: data.ids[i].clone(),
            pred: preds[i],
            mos: data.mos[i],
            fold: folds[i],
        })
        .collect())
}

/// Writes `video_id,pred,mos`.
pub fn write_scatter_csv(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let io = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["video_id", "pred", "mos"]).map_err(io)?;
    for r in rows {
        w.write_record([r.video_id.clone(), r.pred.to_string(), r.mos.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::StrategyRegistry;

    fn toy(n: usize) -> EvalDataset {
        EvalDataset {
            ids: (0..n).map(|i| format!("v{i:02}")).collect(),
            mos: (0..n).map(|i| i as f64 * 3.0).collect(),
            nss: (0..n).map(|i| vec![(i as f64).sqrt(), ((i * 7) % 5) as f64]).collect(),
            deep: Some((0..n).map(|i| vec![i as f64 * 0.5 + ((i * 3) % 4) as f64]).collect()),
        }
    }

    fn small_grid() -> GridConfig {
        GridConfig {
            c_grid: vec![2.0, 32.0],
            gamma_grid: vec![0.5],
            ..GridConfig::default()
        }
    }

    #[test]
    fn split_sizes() {
        let cfg = SplitConfig::default();
        assert_eq!(cfg.train_size(600), 480);
        let (train, test, _) = split_indices(600, 480, 5);
        assert_eq!((train.len(), test.len()), (480, 120));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..600).collect::<Vec<_>>());
    }

    #[test]
    fn single_iteration_median_is_that_split() {
        let reg = StrategyRegistry::default();
        let cfg = SplitConfig {
            iterations: 1,
            seed: 3,
            grid: small_grid(),
            ..SplitConfig::default()
        };
        let r = run_splits(&toy(20), reg.get("mean").unwrap(), &cfg).unwrap();
        assert_eq!(r.splits.len(), 1);
        assert_eq!(r.median_srocc, r.splits[0].metrics.srocc);
        assert_eq!(r.median_rmse, r.splits[0].metrics.rmse);
        assert_eq!(r.splits[0].params.len(), 2);
        assert_eq!((r.splits[0].train_size, r.splits[0].test_size), (16, 4));
    }

    #[test]
    fn ablation_shares_splits() {
        let reg = StrategyRegistry::default();
        let cfg = SplitConfig {
            iterations: 2,
            seed: 9,
            grid: small_grid(),
            ..SplitConfig::default()
        };
        let strategies: Vec<&dyn FusionStrategy> =
            ["mean", "product", "single"].iter().map(|n| reg.get(n).unwrap()).collect();
        let reports = run_ablation(&toy(20), &strategies, &cfg).unwrap();
        assert_eq!(reports.len(), 3);
        let seeds: Vec<Vec<u64>> = reports.iter().map(|r| r.splits.iter().map(|s| s.seed).collect()).collect();
        assert!(seeds.windows(2).all(|w| w[0] == w[1]));
        let table = ablation_table(&reports);
        assert!(table.lines().next().unwrap().contains("mean"));
        assert_eq!(table.lines().count(), 4);
    }

    #[test]
    fn kfold_partitions() {
        let reg = StrategyRegistry::default();
        let rows = kfold_scatter(&toy(10), reg.get("nss-only").unwrap(), 5, 1, &small_grid()).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.pred.is_finite()));
        for f in 0..5 {
            assert_eq!(rows.iter().filter(|r| r.fold == f).count(), 2);
        }
        assert!(kfold_scatter(&toy(10), reg.get("nss-only").unwrap(), 11, 1, &small_grid()).is_err());
    }

    #[test]
    fn rejects_small_or_featureless_sets() {
        let reg = StrategyRegistry::default();
        let cfg = SplitConfig::default();
        assert!(run_splits(&toy(9), reg.get("mean").unwrap(), &cfg).is_err());
        let mut d = toy(12);
        d.deep = None;
        assert!(run_splits(&d, reg.get("mean").unwrap(), &cfg).is_err());
    }

    #[test]
    fn small_metric_sets_are_flagged() {
        let m = split_metrics(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!(m.srocc_degenerate && m.logistic_fallback);
        assert_eq!(m.lcc, -1.0);
    }
}
