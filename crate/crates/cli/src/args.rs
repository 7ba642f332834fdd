use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gvqp_core::frameio::YuvMatrix;
use gvqp_core::svr::GridConfig;

/// No-reference video quality prediction from gaming video statistics
/// and deep features.
///
/// Every flag may also be given in a `--config` file as `key = value`
/// lines (keys are long flag names without dashes). Flags on the command
/// line override the file.
#[derive(Debug, Parser)]
#[command(name = "gvqp", version, args_override_self = true)]
pub struct Cli {
    /// Key=value file whose entries act as flags of the chosen subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "GVQP_THREADS", value_parser = positive)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the per-video NSS feature vector (168 values at 2 scales).
    ExtractNss(ExtractArgs),
    /// Train the regressors of a fusion strategy on a labelled dataset.
    Train(TrainArgs),
    /// Score videos with trained models.
    Predict(PredictArgs),
    /// Repeated random-split evaluation, k-fold scatter export and
    /// significance tests.
    Evaluate(EvaluateArgs),
    /// Write the processed maps of one frame as raw f32 planes.
    DumpMaps(DumpMapsArgs),
    /// Histogram of identity-L MSCN coefficients over a video.
    DumpMscnHist(DumpHistArgs),
}

pub(crate) fn existing_path(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.exists() {
        Ok(p)
    } else {
        Err(format!("`{s}` does not exist"))
    }
}

fn parse_matrix(s: &str) -> Result<YuvMatrix, String> {
    s.parse().map_err(|e: gvqp_core::Error| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

/// Comma-separated list of positive reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let values = s
        .split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| format!("`{t}` is not a number"))?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(format!("grid value `{t}` must be finite and > 0"))
            }
        })
        .collect::<Result<Vec<f64>, String>>()?;
    Ok(Grid(values))
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// A .y4m file, a PNG frame directory, a directory of videos, or a
    /// manifest CSV (video_id,path,mos).
    #[arg(long, value_parser = existing_path)]
    pub input: PathBuf,
    /// Output feature CSV.
    #[arg(long, visible_alias = "output")]
    pub out: PathBuf,
    /// Analyse every n-th frame.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub stride: usize,
    /// Number of dyadic scales.
    #[arg(long, default_value = "2", value_parser = positive)]
    pub scales: usize,
    /// YUV to RGB matrix for Y4M input (bt601 or bt709).
    #[arg(long, default_value = "bt601", value_parser = parse_matrix)]
    pub matrix: YuvMatrix,
}

/// Labelled inputs and the fusion strategy.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Manifest CSV with header video_id,path,mos.
    #[arg(long, value_parser = existing_path)]
    pub manifest: PathBuf,
    /// NSS feature CSV from extract-nss.
    #[arg(long, value_parser = existing_path)]
    pub nss: PathBuf,
    /// Deep feature CSV (video_id,d0000..d1919).
    #[arg(long, value_parser = existing_path)]
    pub deep: Option<PathBuf>,
    /// Fusion strategy: mean, product, single, nss-only or deep-only.
    #[arg(long)]
    pub fusion: Option<String>,
    /// Train only the NSS regressor; no deep features needed.
    #[arg(long)]
    pub nss_only: bool,
    /// Width of the deep feature vectors.
    #[arg(long, default_value = "1920", value_parser = positive)]
    pub deep_dim: usize,
}

#[derive(Debug, Args)]
pub struct SvrArgs {
    /// Candidate C values.
    #[arg(long, default_value = "0.5,2,8,32,128,512", value_parser = parse_grid)]
    pub c_grid: Grid,
    /// Candidate RBF gamma values.
    #[arg(long, default_value = "0.001953125,0.0078125,0.03125,0.125,0.5,2", value_parser = parse_grid)]
    pub gamma_grid: Grid,
    /// Cross-validation folds for the grid search.
    #[arg(long, default_value = "5")]
    pub folds: usize,
    /// Tube width; defaults to a tenth of the training MOS standard deviation.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// KKT stopping tolerance.
    #[arg(long, default_value = "0.001")]
    pub tol: f64,
}

impl SvrArgs {
    pub fn grid(&self, seed: u64) -> GridConfig {
        GridConfig {
            c_grid: self.c_grid.0.clone(),
            gamma_grid: self.gamma_grid.0.clone(),
            folds: self.folds,
            seed,
            epsilon: self.epsilon,
            tol: self.tol,
            ..GridConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub svr: SvrArgs,
    /// Seed of the grid-search fold assignment.
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Output directory for model files and train_log.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory written by `train`.
    #[arg(long, value_parser = existing_path)]
    pub models: PathBuf,
    /// NSS feature CSV; every row is scored.
    #[arg(long, value_parser = existing_path)]
    pub nss: PathBuf,
    /// Deep feature CSV, required by strategies with a deep regressor.
    #[arg(long, value_parser = existing_path)]
    pub deep: Option<PathBuf>,
    /// Width of the deep feature vectors.
    #[arg(long, default_value = "1920", value_parser = positive)]
    pub deep_dim: usize,
    /// Output CSV: video_id,score_nss,score_deep,score_fused.
    #[arg(long, visible_alias = "output")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub svr: SvrArgs,
    /// Master seed of the split sequence.
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Number of random train/test splits.
    #[arg(long, default_value = "100", value_parser = positive)]
    pub iterations: usize,
    /// Fraction of videos in each training split.
    #[arg(long, default_value = "0.8")]
    pub train_frac: f64,
    /// Also export a k-fold cross-validated scatter CSV.
    #[arg(long)]
    pub kfold: Option<usize>,
    /// Per-split scores of other models (name,srocc,lcc) to test against.
    #[arg(long, value_parser = existing_path)]
    pub compare: Option<PathBuf>,
    /// Run mean, product and single fusion on the same splits.
    #[arg(long)]
    pub ablation: bool,
    /// Output directory for the reports.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpMapsArgs {
    /// A .y4m file or PNG frame directory.
    #[arg(long, value_parser = existing_path)]
    pub input: PathBuf,
    /// Zero-based frame index.
    #[arg(long, default_value = "0")]
    pub frame: usize,
    #[arg(long, default_value = "bt601", value_parser = parse_matrix)]
    pub matrix: YuvMatrix,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpHistArgs {
    /// A .y4m file or PNG frame directory.
    #[arg(long, value_parser = existing_path)]
    pub input: PathBuf,
    #[arg(long, default_value = "1", value_parser = positive)]
    pub stride: usize,
    #[arg(long, default_value = "201", value_parser = positive)]
    pub bins: usize,
    /// Histogram covers [-range, range].
    #[arg(long, default_value = "5")]
    pub range: f64,
    #[arg(long, default_value = "bt601", value_parser = parse_matrix)]
    pub matrix: YuvMatrix,
    /// Output CSV: center,count,density.
    #[arg(long, visible_alias = "output")]
    pub out: PathBuf,
}
