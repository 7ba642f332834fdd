//! Synthetic gaming-like videos with graded distortion, shared by the CLI
//! tests and the acceptance suite.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gvqp_core::colorspace::srgb_to_colorframe;
use gvqp_core::deepfeat::{write_deep_features, DeepFeatureVector, DEEP_DIM};
use gvqp_core::frameio::{write_y4m, RgbFrame, YuvMatrix};
use gvqp_core::maps::{convolve, Kernel};
use gvqp_core::Plane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Octave-summed value noise with amplitude proportional to wavelength,
/// giving a roughly 1/f spectrum. Mean 0.5, standard deviation 0.15.
pub fn pink_noise(width: usize, height: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Plane::new(width, height);
    for octave in 0..6 {
        let cell = 1usize << octave;
        let (gw, gh) = (width / cell + 2, height / cell + 2);
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let amp = cell as f64;
        for i in 0..height {
            for j in 0..width {
                let (y, x) = (i as f64 / cell as f64, j as f64 / cell as f64);
                let (y0, x0) = (y.floor() as usize, x.floor() as usize);
                let (fy, fx) = (y - y0 as f64, x - x0 as f64);
                let g = |r: usize, c: usize| grid[r * gw + c];
                let v = (1.0 - fy) * ((1.0 - fx) * g(y0, x0) + fx * g(y0, x0 + 1))
                    + fy * ((1.0 - fx) * g(y0 + 1, x0) + fx * g(y0 + 1, x0 + 1));
                let k = i * width + j;
                acc.as_mut_slice()[k] += amp * v;
            }
        }
    }
    let (m, s) = (acc.mean(), acc.std_dev());
    acc.map(|v| (0.5 + 0.15 * (v - m) / s).clamp(0.0, 1.0))
}

/// Distortion level `d` blurs with sigma `0.35 d` and adds noise of
/// standard deviation `0.012 d`.
pub const LEVELS: usize = 10;

pub fn mos_for_level(level: usize) -> f64 {
    100.0 - 9.0 * level as f64
}

/// `frames` frames of `size x size` panning one pixel per frame across a
/// two-texture colour base, distorted at `level`.
pub fn synthetic_video(base_seed: u64, level: usize, size: usize, frames: usize) -> Vec<RgbFrame> {
    let wide = size + frames;
    let n1 = pink_noise(wide, size, base_seed * 2 + 1);
    let n2 = pink_noise(wide, size, base_seed * 2 + 2);
    let blur = (level > 0).then(|| {
        let sigma = 0.35 * level as f64;
        Kernel::gaussian(sigma, (3.0 * sigma).ceil() as usize).unwrap()
    });
    let noise = Normal::new(0.0, 0.012 * level.max(1) as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_mul(1000) + level as u64);
    (0..frames)
        .map(|t| {
            let crop = |p: &Plane| Plane::from_fn(size, size, |i, j| p.get(i, j + t));
            let r = crop(&n1);
            let b = crop(&n2);
            let g = Plane::from_fn(size, size, |i, j| 0.6 * r.get(i, j) + 0.4 * b.get(i, j));
            let mut distort = |p: Plane| {
                let p = match &blur {
                    Some(k) => convolve(&p, k),
                    None => p,
                };
                if level == 0 {
                    return p;
                }
                let data = p.as_slice().iter().map(|&x| (x + noise.sample(&mut rng)).clamp(0.0, 1.0)).collect();
                Plane::from_vec(size, size, data).unwrap()
            };
            RgbFrame::new(distort(r), distort(g), distort(b), t).unwrap()
        })
        .collect()
}

/// Block statistics of `L*` and `C*` standing in for pooled CNN activations:
/// mean, standard deviation and mean horizontal gradient per block on a
/// 16x16 and an 8x8 block grid, averaged over frames (1920 values).
pub fn synthetic_deep_features(frames: &[RgbFrame]) -> Vec<f64> {
    let mut acc = vec![0.0; DEEP_DIM];
    for f in frames {
        let cf = srgb_to_colorframe(f);
        let mut v = Vec::with_capacity(DEEP_DIM);
        for grid in [16usize, 8] {
            let (bh, bw) = (cf.height() / grid, cf.width() / grid);
            for p in [&cf.l_star, &cf.c_star] {
                for gi in 0..grid {
                    for gj in 0..grid {
                        let cells: Vec<(usize, usize)> = (0..bh)
                            .flat_map(|a| (0..bw).map(move |b| (gi * bh + a, gj * bw + b)))
                            .collect();
                        let n = cells.len() as f64;
                        let mean = cells.iter().map(|&(i, j)| p.get(i, j)).sum::<f64>() / n;
                        let var = cells.iter().map(|&(i, j)| (p.get(i, j) - mean).powi(2)).sum::<f64>() / n;
                        let grad = cells
                            .iter()
                            .map(|&(i, j)| (p.get(i, (j + 1).min(cf.width() - 1)) - p.get(i, j)).abs())
                            .sum::<f64>()
                            / n;
                        v.extend([mean, var.sqrt(), grad]);
                    }
                }
            }
        }
        assert_eq!(v.len(), DEEP_DIM, "frame side must be a multiple of 16");
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / frames.len() as f64).collect()
}

/// On-disk study: Y4M videos, `manifest.csv` and `deep.csv`.
pub struct Study {
    pub manifest: PathBuf,
    pub deep: PathBuf,
    pub ids: Vec<String>,
    pub levels: Vec<usize>,
}

/// `bases x levels` videos, ids `b{base}_d{level}`.
pub fn write_study(dir: &Path, bases: usize, levels: usize, size: usize, frames: usize) -> Study {
    std::fs::create_dir_all(dir.join("videos")).unwrap();
    let mut manifest = String::from("video_id,path,mos\n");
    let mut deep = Vec::new();
    let mut ids = Vec::new();
    let mut lv = Vec::new();
    for base in 0..bases {
        for level in 0..levels {
            let id = format!("b{base}_d{level}");
            let video = synthetic_video(base as u64, level, size, frames);
            write_y4m(&dir.join("videos").join(format!("{id}.y4m")), &video, YuvMatrix::Bt601).unwrap();
            writeln!(manifest, "{id},videos/{id}.y4m,{}", mos_for_level(level)).unwrap();
            deep.push(DeepFeatureVector {
                video_id: id.clone(),
                values: synthetic_deep_features(&video),
            });
            ids.push(id);
            lv.push(level);
        }
    }
    let study = Study {
        manifest: dir.join("manifest.csv"),
        deep: dir.join("deep.csv"),
        ids,
        levels: lv,
    };
    std::fs::write(&study.manifest, manifest).unwrap();
    write_deep_features(&study.deep, DEEP_DIM, &deep).unwrap();
    study
}

/// Runs the `gvqp` binary with `GVQP_THREADS` cleared.
pub fn gvqp<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_gvqp"))
        .args(args)
        .env_remove("GVQP_THREADS")
        .output()
        .expect("gvqp binary runs")
}

/// Panics with the captured stderr unless the run succeeded.
pub fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "gvqp failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Rows of a CSV file without the header, split on commas.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
