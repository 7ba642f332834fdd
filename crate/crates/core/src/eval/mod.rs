//! Evaluation protocol: correlation metrics, logistic mapping, repeated
//! random train/test splits, k-fold scatter export and rank-sum tests.

mod logistic;
mod metrics;
mod protocol;
mod wilcoxon;

pub use logistic::{lcc_rmse, LogisticFit, LogisticParams};
pub use metrics::{mean, median, pearson, ranks, rmse, srocc, std_dev, Correlation};
pub use protocol::{
    ablation_table, kfold_scatter, run_ablation, run_splits, split_metrics, train_pipeline, write_scatter_csv, ChosenParams, EvalDataset, EvalReport,
    ScatterRow, SplitConfig, SplitMetrics, SplitRow, TrainedPipeline, TrainedRegressor,
};
pub use wilcoxon::{wilcoxon_ranksum, RankSumMethod, RankSumTest};
