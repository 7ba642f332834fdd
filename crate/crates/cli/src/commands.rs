use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gvqp_core::colorspace::srgb_to_colorframe;
use gvqp_core::deepfeat::{join_features, read_deep_features, DeepFeatureVector};
use gvqp_core::eval::{
    ablation_table, kfold_scatter, run_ablation, run_splits, train_pipeline, wilcoxon_ranksum,
    write_scatter_csv, EvalDataset, EvalReport, RankSumTest, SplitConfig,
};
use gvqp_core::features::{read_features_any, write_features, NssExtractor, ScaleConfig};
use gvqp_core::frameio::{has_png_frames, read_manifest, read_video};
use gvqp_core::fusion::{FeatureSource, FusionStrategy, StrategyRegistry};
use gvqp_core::maps::{build_mapset, dog_kernel, DOG_SIGMA};
use gvqp_core::mscn::{histogram, mscn};
use gvqp_core::svr::{load_model, save_model, GridConfig, GridScore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{
    Command, DataArgs, DumpHistArgs, DumpMapsArgs, EvaluateArgs, ExtractArgs, PredictArgs, TrainArgs,
};
use crate::{CliError, CliResult};

pub(crate) fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::ExtractNss(a) => extract_nss(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::DumpMaps(a) => dump_maps(&a),
        Command::DumpMscnHist(a) => dump_mscn_hist(&a),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Videos named by `--input`, in a stable order.
fn resolve_inputs(input: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    if input.is_file() {
        let is_csv = input
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            let m = read_manifest(input)?;
            return Ok(m.rows.into_iter().map(|r| (r.video_id, r.path)).collect());
        }
        return Ok(vec![(file_stem(input), input.to_path_buf())]);
    }
    if has_png_frames(input) {
        return Ok(vec![(file_stem(input), input.to_path_buf())]);
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(input)? {
        let p = entry?.path();
        let is_y4m = p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("y4m"));
        if is_y4m || (p.is_dir() && has_png_frames(&p)) {
            found.push((file_stem(&p), p));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no .y4m files or PNG frame directories found",
            input.display()
        )));
    }
    Ok(found)
}

fn extract_nss(a: &ExtractArgs) -> CliResult<()> {
    let scales = ScaleConfig::with_scales(a.scales).map_err(|e| CliError::Usage(e.to_string()))?;
    let extractor = NssExtractor::new(scales)?;
    let videos = resolve_inputs(&a.input)?;
    let total = videos.len();
    eprintln!("extract-nss: {total} video(s), stride {}, {} scale(s)", a.stride, a.scales);
    let results: Vec<Result<(String, Vec<f64>), String>> = videos
        .par_iter()
        .map(|(id, path)| {
            let frames = read_video(path, a.matrix).map_err(|e| format!("{id}: {e}"))?;
            let processed = frames.len().div_ceil(a.stride);
            let v = extractor
                .extract_video(&frames, a.stride)
                .map_err(|e| format!("{id}: {e}"))?;
            eprintln!("  {id}: {} frames, {processed} processed", frames.len());
            Ok((id.clone(), v))
        })
        .collect();
    let mut rows = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    write_features(&a.out, &rows)?;
    eprintln!("extract-nss: wrote {} row(s) to {}", rows.len(), a.out.display());
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("  failed: {f}");
        }
        Err(CliError::Failed(format!("{} of {total} video(s) failed", failures.len())))
    }
}

/// Strategy named by `--fusion` / `--nss-only`, checked against the inputs.
fn select_strategy<'r>(reg: &'r StrategyRegistry, d: &DataArgs) -> CliResult<&'r dyn FusionStrategy> {
    let name = match (&d.fusion, d.nss_only) {
        (Some(f), true) => {
            return Err(CliError::Usage(format!(
                "--nss-only trains a single NSS model and cannot be combined with --fusion {f}"
            )))
        }
        (None, true) => "nss-only",
        (Some(f), false) => f.as_str(),
        (None, false) => "mean",
    };
    let strategy = reg.get(name).map_err(|e| CliError::Usage(e.to_string()))?;
    if strategy.needs_deep() && d.deep.is_none() {
        return Err(CliError::Usage(format!(
            "fusion `{name}` needs deep features (--deep); pass --nss-only to train the NSS model alone"
        )));
    }
    Ok(strategy)
}

fn load_dataset(d: &DataArgs, strategy: &dyn FusionStrategy) -> CliResult<EvalDataset> {
    let manifest = read_manifest(&d.manifest)?;
    let nss = read_features_any(&d.nss)?;
    let deep = match (&d.deep, strategy.needs_deep()) {
        (Some(p), true) => Some(read_deep_features(p, d.deep_dim)?),
        _ => None,
    };
    let joined = join_features(&manifest, &nss, deep.as_deref())?;
    Ok(EvalDataset::from_joined(&joined))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegressorLog {
    pub name: String,
    pub source: FeatureSource,
    pub file: String,
    pub dim: usize,
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub cv_srocc: f64,
    pub support_vectors: usize,
    pub grid_scores: Vec<GridScore>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainLog {
    pub strategy: String,
    pub seed: u64,
    pub videos: usize,
    pub grid: GridConfig,
    pub regressors: Vec<RegressorLog>,
}

pub const TRAIN_LOG: &str = "train_log.json";

fn train(a: &TrainArgs) -> CliResult<()> {
    let reg = StrategyRegistry::default();
    let strategy = select_strategy(&reg, &a.data)?;
    let grid = a.svr.grid(a.seed);
    grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = load_dataset(&a.data, strategy)?;
    eprintln!("train: {} videos, strategy {}", data.len(), strategy.name());
    let all: Vec<usize> = (0..data.len()).collect();
    let pipeline = train_pipeline(&data, strategy, &all, &grid)?;
    fs::create_dir_all(&a.out)?;
    let mut regressors = Vec::new();
    for r in &pipeline.regressors {
        save_model(&a.out.join(r.spec.file), &r.model)?;
        eprintln!(
            "  {} -> {}: C={} gamma={} epsilon={} cv SROCC={:.4}",
            r.spec.name, r.spec.file, r.search.c, r.search.gamma, r.search.epsilon, r.search.mean_srocc
        );
        regressors.push(RegressorLog {
            name: r.spec.name.to_string(),
            source: r.spec.source,
            file: r.spec.file.to_string(),
            dim: r.model.dim(),
            c: r.search.c,
            gamma: r.search.gamma,
            epsilon: r.search.epsilon,
            cv_srocc: r.search.mean_srocc,
            support_vectors: r.model.support_vector_count(),
            grid_scores: r.search.scores.clone(),
        });
    }
    let log = TrainLog {
        strategy: strategy.name().to_string(),
        seed: a.seed,
        videos: data.len(),
        grid,
        regressors,
    };
    write_json(&a.out.join(TRAIN_LOG), &log)
}

fn fmt_score(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn predict(a: &PredictArgs) -> CliResult<()> {
    let log_path = a.models.join(TRAIN_LOG);
    let log: TrainLog = serde_json::from_str(&fs::read_to_string(&log_path).map_err(|e| {
        CliError::Usage(format!("{}: {e}", log_path.display()))
    })?)?;
    let reg = StrategyRegistry::default();
    let strategy = reg.get(&log.strategy)?;
    if strategy.needs_deep() && a.deep.is_none() {
        return Err(CliError::Usage(format!(
            "models use fusion `{}`, which needs deep features (--deep)",
            log.strategy
        )));
    }
    let nss = read_features_any(&a.nss)?;
    let deep = match (&a.deep, strategy.needs_deep()) {
        (Some(p), true) => Some(align_deep(&nss, read_deep_features(p, a.deep_dim)?)?),
        _ => None,
    };
    let data = EvalDataset {
        ids: nss.iter().map(|r| r.0.clone()).collect(),
        mos: vec![f64::NAN; nss.len()],
        nss: nss.into_iter().map(|r| r.1).collect(),
        deep,
    };
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut per_model = Vec::new();
    for spec in strategy.regressors() {
        let model = load_model(&a.models.join(spec.file))?;
        per_model.push(model.predict_many(&data.features(spec.source, &idx)?)?);
    }
    let slot = |name: &str| strategy.regressors().iter().position(|s| s.name == name);
    let (nss_slot, deep_slot) = (slot("nss"), slot("deep"));

    let mut w = csv::Writer::from_path(&a.out).map_err(csv_err(&a.out))?;
    w.write_record(["video_id", "score_nss", "score_deep", "score_fused"])
        .map_err(csv_err(&a.out))?;
    for (k, id) in data.ids.iter().enumerate() {
        let outputs: Vec<f64> = per_model.iter().map(|p| p[k]).collect();
        let fused = strategy.fuse(&outputs)?;
        w.write_record([
            id.clone(),
            fmt_score(nss_slot.map(|s| outputs[s])),
            fmt_score(deep_slot.map(|s| outputs[s])),
            fused.to_string(),
        ])
        .map_err(csv_err(&a.out))?;
    }
    w.flush()?;
    eprintln!("predict: scored {} video(s) with {}", data.len(), strategy.name());
    Ok(())
}

/// Deep vectors in the order of the NSS rows.
fn align_deep(nss: &[(String, Vec<f64>)], deep: Vec<DeepFeatureVector>) -> CliResult<Vec<Vec<f64>>> {
    let mut by_id: HashMap<String, Vec<f64>> = deep.into_iter().map(|d| (d.video_id, d.values)).collect();
    let mut missing = Vec::new();
    let rows: Vec<Vec<f64>> = nss
        .iter()
        .filter_map(|(id, _)| {
            let v = by_id.remove(id);
            if v.is_none() {
                missing.push(format!("{id} (deep)"));
            }
            v
        })
        .collect();
    if missing.is_empty() {
        Ok(rows)
    } else {
        Err(gvqp_core::Error::MissingIds(missing).into())
    }
}

/// Strategies compared by `--ablation`.
const ABLATION: [&str; 3] = ["mean", "product", "single"];

fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let reg = StrategyRegistry::default();
    let strategy = select_strategy(&reg, &a.data)?;
    if a.ablation && a.data.deep.is_none() {
        return Err(CliError::Usage("--ablation compares fusion modes and needs --deep".into()));
    }
    let cfg = SplitConfig {
        train_frac: a.train_frac,
        iterations: a.iterations,
        seed: a.seed,
        grid: a.svr.grid(a.seed),
    };
    cfg.grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) {
        return Err(CliError::Usage(format!("--train-frac must be in (0, 1), got {}", a.train_frac)));
    }
    if let Some(k) = a.kfold {
        if k < 2 {
            return Err(CliError::Usage(format!("--kfold needs at least 2 folds, got {k}")));
        }
    }
    let data = if a.ablation {
        load_dataset(&a.data, reg.get("mean")?)?
    } else {
        load_dataset(&a.data, strategy)?
    };
    fs::create_dir_all(&a.out)?;
    eprintln!(
        "evaluate: {} videos, strategy {}, {} split(s), seed {}",
        data.len(),
        strategy.name(),
        a.iterations,
        a.seed
    );

    let report = if a.ablation {
        let strategies: Vec<&dyn FusionStrategy> =
            ABLATION.iter().map(|n| reg.get(n)).collect::<Result<_, _>>()?;
        let reports = run_ablation(&data, &strategies, &cfg)?;
        let table = ablation_table(&reports);
        fs::write(a.out.join("ablation.txt"), &table)?;
        write_json(&a.out.join("ablation.json"), &reports)?;
        eprint!("{table}");
        match reports.iter().find(|r| r.strategy == strategy.name()) {
            Some(r) => r.clone(),
            None => run_splits(&data, strategy, &cfg)?,
        }
    } else {
        run_splits(&data, strategy, &cfg)?
    };
    write_json(&a.out.join("report.json"), &report)?;
    fs::write(a.out.join("report.txt"), report.to_text())?;
    eprintln!(
        "  median SROCC {:.4}  LCC {:.4}  RMSE {:.4}",
        report.median_srocc, report.median_lcc, report.median_rmse
    );

    if let Some(k) = a.kfold {
        let rows = kfold_scatter(&data, strategy, k, a.seed, &cfg.grid)?;
        write_scatter_csv(&a.out.join("scatter.csv"), &rows)?;
    }
    if let Some(path) = &a.compare {
        compare(&report, path, &a.out.join("compare.csv"))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct OtherScore {
    name: String,
    srocc: f64,
    lcc: f64,
}

/// Rank-sum tests of this run's per-split SROCC and LCC against every model
/// in a `name,srocc,lcc` file. Verdict 1 means this model is significantly
/// better, -1 significantly worse.
fn compare(report: &EvalReport, input: &Path, out: &Path) -> CliResult<()> {
    let mut rdr = csv::Reader::from_path(input).map_err(csv_err(input))?;
    let mut names: Vec<String> = Vec::new();
    let mut scores: HashMap<String, (Vec<f64>, Vec<f64>)> = HashMap::new();
    for rec in rdr.deserialize::<OtherScore>() {
        let r = rec.map_err(csv_err(input))?;
        if !scores.contains_key(&r.name) {
            names.push(r.name.clone());
        }
        let e = scores.entry(r.name).or_default();
        e.0.push(r.srocc);
        e.1.push(r.lcc);
    }
    let mut w = csv::Writer::from_path(out).map_err(csv_err(out))?;
    w.write_record([
        "model", "other", "metric", "n_model", "n_other", "rank_sum", "p_greater", "p_less", "method", "verdict",
    ])
    .map_err(csv_err(out))?;
    let ours = [("srocc", report.srocc_values()), ("lcc", report.lcc_values())];
    for name in &names {
        let (s, l) = &scores[name];
        for ((metric, mine), theirs) in ours.iter().zip([s, l]) {
            let t: RankSumTest = wilcoxon_ranksum(mine, theirs)?;
            eprintln!("  {} vs {name} ({metric}): verdict {}", report.strategy, t.verdict);
            w.write_record([
                report.strategy.clone(),
                name.clone(),
                metric.to_string(),
                mine.len().to_string(),
                theirs.len().to_string(),
                t.rank_sum.to_string(),
                t.p_greater.to_string(),
                t.p_less.to_string(),
                serde_json::to_value(t.method)?.as_str().unwrap_or_default().to_string(),
                t.verdict.to_string(),
            ])
            .map_err(csv_err(out))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn dump_maps(a: &DumpMapsArgs) -> CliResult<()> {
    let frames = read_video(&a.input, a.matrix)?;
    if a.frame >= frames.len() {
        return Err(CliError::Usage(format!(
            "--frame {} is out of range for {} frame(s)",
            a.frame,
            frames.len()
        )));
    }
    let cur = srgb_to_colorframe(&frames[a.frame]);
    let next = frames.get(a.frame + 1).map(srgb_to_colorframe);
    let maps = build_mapset(&cur, next.as_ref(), &dog_kernel(DOG_SIGMA)?)?;
    maps.dump(&a.out)?;
    eprintln!("dump-maps: wrote {} map(s) to {}", maps.len(), a.out.display());
    Ok(())
}

fn dump_mscn_hist(a: &DumpHistArgs) -> CliResult<()> {
    if !(a.range > 0.0 && a.range.is_finite()) {
        return Err(CliError::Usage(format!("--range must be > 0, got {}", a.range)));
    }
    let frames = read_video(&a.input, a.matrix)?;
    let picked: Vec<usize> = (0..frames.len()).step_by(a.stride).collect();
    let per_frame: Vec<Vec<u64>> = picked
        .par_iter()
        .map(|&t| {
            let l = srgb_to_colorframe(&frames[t]).l_star;
            histogram(mscn(&l).as_slice(), -a.range, a.range, a.bins)
        })
        .collect();
    let mut counts = vec![0u64; a.bins];
    for h in &per_frame {
        for (c, v) in counts.iter_mut().zip(h) {
            *c += v;
        }
    }
    let total: u64 = counts.iter().sum();
    let width = 2.0 * a.range / a.bins as f64;
    let mut out = fs::File::create(&a.out)?;
    writeln!(out, "center,count,density")?;
    for (k, &c) in counts.iter().enumerate() {
        let center = -a.range + (k as f64 + 0.5) * width;
        let density = if total == 0 { 0.0 } else { c as f64 / (total as f64 * width) };
        writeln!(out, "{center},{c},{density}")?;
    }
    eprintln!("dump-mscn-hist: {} frame(s), {total} coefficient(s) in range", picked.len());
    Ok(())
}
