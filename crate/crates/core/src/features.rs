//! Per-video NSS feature vectors: two scales of 42 GGD fits each, pooled by
//! temporal averaging.
//!
//! Layout within one 84-value scale block (each group ordered
//! `L*-alpha, L*-sigma, C*-alpha, C*-sigma`; multi-map groups iterate
//! shift/direction outermost):
//!
//! | range   | group                          |
//! |---------|--------------------------------|
//! | 0..4    | identity                       |
//! | 4..8    | DoG                            |
//! | 8..12   | sigma-DoG                      |
//! | 12..48  | displaced frame differences    |
//! | 48..64  | identity spatial differences   |
//! | 64..68  | gradient magnitude             |
//! | 68..84  | GM spatial differences         |

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::colorspace::{srgb_to_colorframe, ColorFrame};
use crate::frameio::RgbFrame;
use crate::ggd::{fit_ggd, GgdParams};
use crate::maps::{build_mapset, dog_kernel, Kernel, MapKind, DOG_SIGMA};
use crate::mscn::{build_coefficients, CoefLabel};
use crate::{Error, Plane, Result};

pub const FEATURES_PER_SCALE: usize = 84;
pub const DEFAULT_SCALES: usize = 2;
pub const NSS_DIM: usize = FEATURES_PER_SCALE * DEFAULT_SCALES;

pub const IDENTITY_OFFSET: usize = 0;
pub const DOG_OFFSET: usize = 4;
pub const SIGMA_DOG_OFFSET: usize = 8;
pub const DFD_OFFSET: usize = 12;
pub const IDENTITY_DIFF_OFFSET: usize = 48;
pub const GM_OFFSET: usize = 64;
pub const GM_DIFF_OFFSET: usize = 68;

/// Smallest frame side that survives one 2x downscale with room for the
/// 7x7 window.
const MIN_DOWNSCALE_SIDE: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleConfig {
    pub n_scales: usize,
    pub downscale_factor: usize,
    pub antialias_sigma: f64,
    pub antialias_support: usize,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            n_scales: DEFAULT_SCALES,
            downscale_factor: 2,
            antialias_sigma: 1.0,
            antialias_support: 5,
        }
    }
}

impl ScaleConfig {
    pub fn with_scales(n_scales: usize) -> Result<Self> {
        if n_scales == 0 {
            return Err(Error::arg("at least one scale is required"));
        }
        Ok(ScaleConfig {
            n_scales,
            ..Default::default()
        })
    }

    pub fn feature_len(&self) -> usize {
        self.n_scales * FEATURES_PER_SCALE
    }
}

/// Position of `(label, param)` inside one scale block; `param` is 0 for
/// alpha and 1 for sigma.
pub fn feature_offset(label: CoefLabel, param: usize) -> usize {
    let ch = label.source.channel.index();
    let base = match (label.source.kind, label.diff) {
        (MapKind::Identity, None) => IDENTITY_OFFSET,
        (MapKind::Dog, None) => DOG_OFFSET,
        (MapKind::SigmaDog, None) => SIGMA_DOG_OFFSET,
        (MapKind::Dfd(s), None) => DFD_OFFSET + 4 * s,
        (MapKind::Identity, Some(d)) => IDENTITY_DIFF_OFFSET + 4 * d.index(),
        (MapKind::Gm, None) => GM_OFFSET,
        (MapKind::Gm, Some(d)) => GM_DIFF_OFFSET + 4 * d.index(),
        (kind, Some(_)) => unreachable!("no spatial differences on {kind:?}"),
    };
    base + 2 * ch + param
}

/// Human-readable names of every feature index, e.g.
/// `s1.mscn[dfd(0,1)-C].sigma`.
pub fn feature_names(scales: &ScaleConfig) -> Vec<String> {
    use crate::maps::canonical_map_labels;
    use crate::mscn::{Direction, DIFF_SOURCES};

    let mut labels: Vec<CoefLabel> = canonical_map_labels(true)
        .into_iter()
        .map(|source| CoefLabel { source, diff: None })
        .collect();
    for source in DIFF_SOURCES {
        for d in Direction::ALL {
            labels.push(CoefLabel {
                source,
                diff: Some(d),
            });
        }
    }
    let mut names = vec![String::new(); scales.feature_len()];
    for s in 0..scales.n_scales {
        for label in &labels {
            for (p, pname) in ["alpha", "sigma"].iter().enumerate() {
                names[s * FEATURES_PER_SCALE + feature_offset(*label, p)] =
                    format!("s{}.{label}.{pname}", s + 1);
            }
        }
    }
    names
}

/// Separable 2x decimation after a unit-sum Gaussian blur.
pub fn downscale2x(frame: &ColorFrame, cfg: &ScaleConfig) -> Result<ColorFrame> {
    let (w, h) = (frame.width(), frame.height());
    if w < MIN_DOWNSCALE_SIDE || h < MIN_DOWNSCALE_SIDE {
        return Err(Error::arg(format!(
            "frame {w}x{h} is too small to downscale (min {MIN_DOWNSCALE_SIDE}x{MIN_DOWNSCALE_SIDE})"
        )));
    }
    let kernel = Kernel::gaussian(cfg.antialias_sigma, cfg.antialias_support / 2)?;
    let f = cfg.downscale_factor;
    let down = |p: &Plane| {
        let blurred = crate::maps::convolve(p, &kernel);
        Plane::from_fn(w.div_ceil(f), h.div_ceil(f), |i, j| blurred.get(i * f, j * f))
    };
    Ok(ColorFrame {
        l_star: down(&frame.l_star),
        c_star: down(&frame.c_star),
        index: frame.index,
    })
}

/// Per-frame feature values with a presence mask; DFD entries are absent
/// on the last frame of a video.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub values: Vec<f64>,
    pub present: Vec<bool>,
}

impl FrameFeatures {
    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// Shared state for feature extraction.
#[derive(Clone, Debug)]
pub struct NssExtractor {
    scales: ScaleConfig,
    dog: Kernel,
}

impl Default for NssExtractor {
    fn default() -> Self {
        Self::new(ScaleConfig::default()).expect("default config is valid")
    }
}

impl NssExtractor {
    pub fn new(scales: ScaleConfig) -> Result<Self> {
        if scales.n_scales == 0 {
            return Err(Error::arg("at least one scale is required"));
        }
        Ok(NssExtractor {
            scales,
            dog: dog_kernel(DOG_SIGMA)?,
        })
    }

    pub fn scales(&self) -> &ScaleConfig {
        &self.scales
    }

    pub fn extract_frame(&self, cur: &ColorFrame, next: Option<&ColorFrame>) -> Result<FrameFeatures> {
        let len = self.scales.feature_len();
        let mut values = vec![0.0; len];
        let mut present = vec![false; len];
        let mut cur = cur.clone();
        let mut next = next.cloned();
        for s in 0..self.scales.n_scales {
            if s > 0 {
                cur = downscale2x(&cur, &self.scales)?;
                next = next.map(|n| downscale2x(&n, &self.scales)).transpose()?;
            }
            let coefs = build_coefficients(&build_mapset(&cur, next.as_ref(), &self.dog)?)?;
            let fits: Vec<Result<GgdParams>> = coefs
                .maps
                .par_iter()
                .map(|(_, p)| fit_ggd(p.as_slice()).map(|f| f.params))
                .collect();
            let block = s * FEATURES_PER_SCALE;
            for ((label, _), fit) in coefs.maps.iter().zip(fits) {
                let fit = fit?;
                for (p, v) in [fit.alpha, fit.sigma].into_iter().enumerate() {
                    let k = block + feature_offset(*label, p);
                    values[k] = v;
                    present[k] = true;
                }
            }
        }
        Ok(FrameFeatures { values, present })
    }

    /// Extracts every `stride`-th frame and pools. DFD maps pair each
    /// processed frame with its immediate successor in the source.
    pub fn extract_video(&self, frames: &[RgbFrame], stride: usize) -> Result<Vec<f64>> {
        if frames.is_empty() {
            return Err(Error::arg("video has no frames"));
        }
        if stride == 0 {
            return Err(Error::arg("stride must be at least 1"));
        }
        let color: Vec<ColorFrame> = frames.par_iter().map(srgb_to_colorframe).collect();
        let picked: Vec<usize> = (0..color.len()).step_by(stride).collect();
        let per_frame: Vec<Result<FrameFeatures>> = picked
            .par_iter()
            .map(|&t| self.extract_frame(&color[t], color.get(t + 1)))
            .collect();
        let per_frame: Vec<FrameFeatures> = per_frame.into_iter().collect::<Result<_>>()?;
        pool_video(&per_frame)
    }
}

/// Per-index mean over the frames where that index is present. Frames are
/// accumulated in order so the result does not depend on scheduling.
/// Indices absent from every frame take the degenerate fit encoding.
pub fn pool_video(per_frame: &[FrameFeatures]) -> Result<Vec<f64>> {
    let first = per_frame
        .first()
        .ok_or_else(|| Error::arg("cannot pool an empty frame sequence"))?;
    let len = first.values.len();
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for f in per_frame {
        if f.values.len() != len || f.present.len() != len {
            return Err(Error::DimensionMismatch("per-frame feature lengths differ".into()));
        }
        for k in 0..len {
            if f.present[k] {
                sums[k] += f.values[k];
                counts[k] += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(k, (s, c))| {
            if c > 0 {
                s / c as f64
            } else if k % 2 == 0 {
                GgdParams::DEGENERATE.alpha
            } else {
                GgdParams::DEGENERATE.sigma
            }
        })
        .collect())
}

/// Column naming of a feature CSV: prefix and minimum zero-padded width.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Columns {
    pub prefix: &'static str,
    pub min_width: usize,
}

pub(crate) const NSS_COLUMNS: Columns = Columns {
    prefix: "f",
    min_width: 3,
};

/// Header for a feature CSV: `video_id,f000,...` or `video_id,d0000,...`.
fn header(cols: Columns, dim: usize) -> Vec<String> {
    let width = dim.saturating_sub(1).to_string().len().max(cols.min_width);
    let prefix = cols.prefix;
    std::iter::once("video_id".to_string())
        .chain((0..dim).map(|k| format!("{prefix}{k:0width$}")))
        .collect()
}

pub(crate) fn write_feature_csv(path: &Path, cols: Columns, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header(cols, dim).join(","))?;
    for (id, v) in rows {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{id}: {} values, expected {dim}",
                v.len()
            )));
        }
        if id.contains([',', '"', '\n']) {
            return Err(Error::arg(format!("video id `{id}` contains CSV metacharacters")));
        }
        write!(out, "{id}")?;
        for x in v {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("feature of {id}")));
            }
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn read_feature_csv(path: &Path, cols: Columns, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| fmt_err(e.to_string()))?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| fmt_err(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if found != header(cols, dim) {
        return Err(fmt_err(format!(
            "expected video_id plus {dim} `{}` columns, found {} columns",
            cols.prefix,
            found.len()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row,
            message,
        };
        if rec.len() != dim + 1 {
            return Err(row_err(format!("{} values, expected {dim}", rec.len().saturating_sub(1))));
        }
        let mut v = Vec::with_capacity(dim);
        for field in rec.iter().skip(1) {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| row_err(format!("`{field}` is not a number")))?;
            if !x.is_finite() {
                return Err(row_err(format!("non-finite value `{field}`")));
            }
            v.push(x);
        }
        rows.push((rec[0].trim().to_string(), v));
    }
    Ok(rows)
}

/// Writes `video_id,f000..` rows with shortest round-trip decimals.
pub fn write_features(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let dim = rows.first().map(|r| r.1.len()).unwrap_or(NSS_DIM);
    write_feature_csv(path, NSS_COLUMNS, dim, rows)
}

/// Reads an NSS feature CSV of the default 168 dimensions.
pub fn read_features(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    read_features_dim(path, NSS_DIM)
}

pub fn read_features_dim(path: &Path, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    read_feature_csv(path, NSS_COLUMNS, dim)
}

/// Reads an NSS feature CSV extracted at any number of scales, taking the
/// width from the header.
pub fn read_features_any(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let columns = rdr
        .headers()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .len();
    let dim = columns.saturating_sub(1);
    if dim == 0 || dim % FEATURES_PER_SCALE != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("{dim} feature columns is not a whole number of {FEATURES_PER_SCALE}-value scales"),
        });
    }
    read_features_dim(path, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::DFD_SHIFTS;

    fn frame(w: usize, h: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> ColorFrame {
        ColorFrame {
            l_star: Plane::from_fn(w, h, |i, j| f(i, j).0),
            c_star: Plane::from_fn(w, h, |i, j| f(i, j).1),
            index: 0,
        }
    }

    fn textured(seed: usize, w: usize) -> ColorFrame {
        frame(w, w, move |i, j| {
            let x = ((i * 31 + j * 17 + seed * 7) % 23) as f64;
            (40.0 + x + (j as f64 * 0.3).sin() * 5.0, 10.0 + ((i * j + seed) % 7) as f64)
        })
    }

    #[test]
    fn offsets_cover_every_index_once() {
        let names = feature_names(&ScaleConfig::default());
        assert_eq!(names.len(), NSS_DIM);
        assert!(names.iter().all(|n| !n.is_empty()));
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), NSS_DIM);
        assert_eq!(names[0], "s1.mscn[identity-L].alpha");
        assert_eq!(names[3], "s1.mscn[identity-C].sigma");
        assert_eq!(names[12], "s1.mscn[dfd(0,0)-L].alpha");
        assert_eq!(names[14], "s1.mscn[dfd(0,0)-C].alpha");
        assert_eq!(names[16], "s1.mscn[dfd(0,1)-L].alpha");
        assert_eq!(names[48], "s1.mscn[identity-L].d1.alpha");
        assert_eq!(names[52], "s1.mscn[identity-L].d2.alpha");
        assert_eq!(names[64], "s1.mscn[gm-L].alpha");
        assert_eq!(names[83], "s1.mscn[gm-C].d4.sigma");
        assert_eq!(names[84], "s2.mscn[identity-L].alpha");
    }

    #[test]
    fn downscale_shapes_and_constants() {
        let cfg = ScaleConfig::default();
        let f = frame(64, 64, |_, _| (33.0, 4.0));
        let d = downscale2x(&f, &cfg).unwrap();
        assert_eq!(d.l_star.dims(), (32, 32));
        assert!(d.l_star.as_slice().iter().all(|&v| v == 33.0));
        assert!(d.c_star.as_slice().iter().all(|&v| v == 4.0));
        let odd = downscale2x(&frame(15, 21, |_, _| (1.0, 1.0)), &cfg).unwrap();
        assert_eq!(odd.l_star.dims(), (8, 11));
        assert!(downscale2x(&frame(13, 40, |_, _| (1.0, 1.0)), &cfg).is_err());
    }

    #[test]
    fn downscale_suppresses_column_aliasing() {
        let cfg = ScaleConfig::default();
        let f = frame(32, 32, |_, j| ((j % 2) as f64, 0.0));
        let d = downscale2x(&f, &cfg).unwrap();
        // direct blur oracle: 1D taps [e^-2, e^-1/2, 1, e^-1/2, e^-2] / sum
        let t = [(-2.0f64).exp(), (-0.5f64).exp(), 1.0, (-0.5f64).exp(), (-2.0f64).exp()];
        let s: f64 = t.iter().sum();
        let even_col = (t[1] + t[3]) / s;
        for i in 2..14 {
            for j in 2..14 {
                let v = d.l_star.get(i, j);
                assert!((v - 0.5).abs() < 0.2);
                assert!((v - even_col).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_features_full_and_last() {
        let ex = NssExtractor::default();
        let (a, b) = (textured(1, 32), textured(2, 32));
        let full = ex.extract_frame(&a, Some(&b)).unwrap();
        assert_eq!(full.values.len(), NSS_DIM);
        assert_eq!(full.present_count(), NSS_DIM);
        assert!(full.values.iter().all(|v| v.is_finite()));

        let last = ex.extract_frame(&a, None).unwrap();
        assert_eq!(last.present_count(), NSS_DIM - 72);
        for s in 0..2 {
            for k in 0..FEATURES_PER_SCALE {
                let absent = (DFD_OFFSET..DFD_OFFSET + 4 * DFD_SHIFTS.len()).contains(&k);
                assert_eq!(last.present[s * FEATURES_PER_SCALE + k], !absent);
            }
        }
        // non-DFD features do not depend on the successor
        for k in 0..NSS_DIM {
            if last.present[k] {
                assert_eq!(last.values[k], full.values[k]);
            }
        }
    }

    #[test]
    fn constant_video_is_degenerate() {
        let ex = NssExtractor::default();
        let f = frame(32, 32, |_, _| (50.0, 0.0));
        let feats = ex.extract_frame(&f, Some(&f)).unwrap();
        for k in 0..NSS_DIM {
            let want = if k % 2 == 0 { 10.0 } else { 0.0 };
            assert_eq!(feats.values[k], want, "index {k}");
        }
    }

    #[test]
    fn pooling() {
        let one = FrameFeatures {
            values: vec![1.0, 2.0, 3.0, 4.0],
            present: vec![true; 4],
        };
        assert_eq!(pool_video(std::slice::from_ref(&one)).unwrap(), one.values);
        let three = FrameFeatures {
            values: vec![3.0, 6.0, 9.0, 12.0],
            present: vec![true, true, false, false],
        };
        assert_eq!(
            pool_video(&[one.clone(), three]).unwrap(),
            vec![2.0, 4.0, 3.0, 4.0]
        );
        assert!(pool_video(&[]).is_err());
        let none = FrameFeatures {
            values: vec![0.0; 4],
            present: vec![false; 4],
        };
        assert_eq!(pool_video(&[none]).unwrap(), vec![10.0, 0.0, 10.0, 0.0]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let rows = vec![
            ("a".to_string(), (0..NSS_DIM).map(|k| (k as f64).sqrt() / 3.0).collect::<Vec<_>>()),
            ("b".to_string(), (0..NSS_DIM).map(|k| -1e-300 * k as f64 + 0.1).collect()),
        ];
        write_features(&p, &rows).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (x, y) in rows.iter().zip(&back) {
            assert_eq!(x.0, y.0);
            assert!(x.1.iter().zip(&y.1).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("video_id,f000,f001,"));
        assert!(text.lines().next().unwrap().ends_with(",f167"));

        let short = dir.path().join("short.csv");
        let hdr: Vec<String> = std::iter::once("video_id".into())
            .chain((0..167).map(|k| format!("f{k:03}")))
            .collect();
        std::fs::write(&short, format!("{}\nx{}\n", hdr.join(","), ",0".repeat(167))).unwrap();
        assert!(read_features(&short).is_err());
        assert!(read_features_any(&short).is_err());
        assert_eq!(read_features_any(&p).unwrap(), back);
        let wide = dir.path().join("wide.csv");
        let three: Vec<(String, Vec<f64>)> = vec![("c".into(), vec![0.5; 3 * FEATURES_PER_SCALE])];
        write_features(&wide, &three).unwrap();
        assert_eq!(read_features_any(&wide).unwrap(), three);

        let empty = dir.path().join("empty.csv");
        write_features(&empty, &[]).unwrap();
        assert!(read_features(&empty).unwrap().is_empty());
    }

    #[test]
    fn ragged_row_is_row_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let hdr = header(NSS_COLUMNS, 3).join(",");
        std::fs::write(&p, format!("{hdr}\na,1,2,3\nb,1,2\n")).unwrap();
        match read_features_dim(&p, 3).unwrap_err() {
            Error::Row { row, .. } => assert_eq!(row, 3),
            e => panic!("{e}"),
        }
    }
}
