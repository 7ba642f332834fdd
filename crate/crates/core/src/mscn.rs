//! Mean-subtracted contrast-normalized (MSCN) coefficients and directional
//! spatial differences.

use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::maps::{pad, Channel, MapKind, MapLabel, MapSet};
use crate::{Error, Plane, Result};

/// Half-width of the 7x7 local statistics window.
pub const WINDOW_RADIUS: usize = 3;
/// Standard deviation of the window Gaussian, in samples.
pub const WINDOW_SIGMA: f64 = 7.0 / 6.0;
/// Stabilizing constant added to the local deviation.
pub const MSCN_C: f64 = 1.0;

pub const FULL_COEFFICIENT_COUNT: usize = 42;
pub const PARTIAL_COEFFICIENT_COUNT: usize = 24;

/// Circularly symmetric, unit-sum Gaussian weighting window.
#[derive(Clone, Debug)]
pub struct GaussianWindow {
    radius: usize,
    taps: Vec<f64>,
}

impl GaussianWindow {
    pub fn new(radius: usize, sigma: f64) -> Self {
        let r = radius as isize;
        let mut taps = Vec::with_capacity((2 * radius + 1).pow(2));
        for k in -r..=r {
            for l in -r..=r {
                taps.push((-((k * k + l * l) as f64) / (2.0 * sigma * sigma)).exp());
            }
        }
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= s);
        GaussianWindow { radius, taps }
    }

    /// The 7x7, sigma = 7/6 window used throughout the pipeline.
    pub fn shared() -> &'static GaussianWindow {
        static WINDOW: OnceLock<GaussianWindow> = OnceLock::new();
        WINDOW.get_or_init(|| GaussianWindow::new(WINDOW_RADIUS, WINDOW_SIGMA))
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn at(&self, k: isize, l: isize) -> f64 {
        let side = 2 * self.radius + 1;
        let r = self.radius as isize;
        self.taps[(k + r) as usize * side + (l + r) as usize]
    }
}

/// Weighted local mean and standard deviation with mirror boundaries.
///
/// Both moments are accumulated on deviations from the centre sample, so
/// flat neighbourhoods give exactly `mu = P` and `sigma = 0`.
pub fn local_stats(plane: &Plane, window: &GaussianWindow) -> (Plane, Plane) {
    let (w, h) = plane.dims();
    let r = window.radius;
    let side = 2 * r + 1;
    let (padded, pw) = pad(plane, r, r);
    let mut mu = vec![0.0; w * h];
    let mut sigma = vec![0.0; w * h];
    // Each output row accumulates tap by tap across the whole row; every
    // pixel still sums its taps in window order. Tap (a, b) reads
    // P(i + r - a, j + r - b).
    mu.par_chunks_mut(w.max(1))
        .zip(sigma.par_chunks_mut(w.max(1)))
        .enumerate()
        .for_each(|(i, (mu_row, sigma_row))| {
            let centre = &padded[(i + r) * pw + r..(i + r) * pw + r + w];
            let source = |a: usize, b: usize| {
                let start = (i + 2 * r - a) * pw + 2 * r - b;
                &padded[start..start + w]
            };
            let mut shift = vec![0.0; w];
            for (a, taps) in window.taps.chunks_exact(side).enumerate() {
                for (b, &wt) in taps.iter().enumerate() {
                    for ((s, &v), &c) in shift.iter_mut().zip(source(a, b)).zip(centre) {
                        *s += wt * (v - c);
                    }
                }
            }
            let mut var = vec![0.0; w];
            for (a, taps) in window.taps.chunks_exact(side).enumerate() {
                for (b, &wt) in taps.iter().enumerate() {
                    for (((acc, &v), &c), &s) in var.iter_mut().zip(source(a, b)).zip(centre).zip(&shift) {
                        let d = v - c - s;
                        *acc += wt * d * d;
                    }
                }
            }
            for (((m, sd), (&c, &s)), v) in mu_row.iter_mut().zip(sigma_row).zip(centre.iter().zip(&shift)).zip(&var) {
                *m = c + s;
                *sd = v.sqrt();
            }
        });
    (
        Plane::from_vec(w, h, mu).expect("dims preserved"),
        Plane::from_vec(w, h, sigma).expect("dims preserved"),
    )
}

/// `(P - mu) / (sigma + C)` with `C = 1`.
pub fn mscn(plane: &Plane) -> Plane {
    mscn_with(plane, GaussianWindow::shared(), MSCN_C)
}

pub fn mscn_with(plane: &Plane, window: &GaussianWindow, c: f64) -> Plane {
    let (mu, sigma) = local_stats(plane, window);
    let data = plane
        .as_slice()
        .iter()
        .zip(mu.as_slice())
        .zip(sigma.as_slice())
        .map(|((p, m), s)| (p - m) / (s + c))
        .collect();
    Plane::from_vec(plane.width(), plane.height(), data).expect("dims preserved")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    /// `P(i, j+1) - P(i, j)`
    Horizontal,
    /// `P(i+1, j) - P(i, j)`
    Vertical,
    /// `P(i+1, j+1) - P(i, j)`
    MainDiagonal,
    /// `P(i+1, j-1) - P(i, j)`
    AntiDiagonal,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Horizontal,
        Direction::Vertical,
        Direction::MainDiagonal,
        Direction::AntiDiagonal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Four directional differences over the valid region only: the horizontal
/// map loses a column, the vertical a row, the diagonals one of each.
pub fn spatial_diffs(map: &Plane) -> Result<[Plane; 4]> {
    let (w, h) = map.dims();
    if w < 2 || h < 2 {
        return Err(Error::arg(format!("spatial differences need at least 2x2, got {w}x{h}")));
    }
    Ok([
        Plane::from_fn(w - 1, h, |i, j| map.get(i, j + 1) - map.get(i, j)),
        Plane::from_fn(w, h - 1, |i, j| map.get(i + 1, j) - map.get(i, j)),
        Plane::from_fn(w - 1, h - 1, |i, j| map.get(i + 1, j + 1) - map.get(i, j)),
        Plane::from_fn(w - 1, h - 1, |i, j| map.get(i + 1, j) - map.get(i, j + 1)),
    ])
}

/// Identifies one coefficient map: the MSCN of a pre-processed map, possibly
/// followed by a spatial difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CoefLabel {
    pub source: MapLabel,
    pub diff: Option<Direction>,
}

impl fmt::Display for CoefLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mscn[{}]", self.source)?;
        if let Some(d) = self.diff {
            write!(f, ".d{}", d.index() + 1)?;
        }
        Ok(())
    }
}

/// Maps whose MSCN coefficients also get spatial differences.
pub const DIFF_SOURCES: [MapLabel; 4] = [
    MapLabel {
        kind: MapKind::Identity,
        channel: Channel::L,
    },
    MapLabel {
        kind: MapKind::Identity,
        channel: Channel::C,
    },
    MapLabel {
        kind: MapKind::Gm,
        channel: Channel::L,
    },
    MapLabel {
        kind: MapKind::Gm,
        channel: Channel::C,
    },
];

#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub maps: Vec<(CoefLabel, Plane)>,
    pub partial: bool,
}

impl CoefficientSet {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn labels(&self) -> Vec<CoefLabel> {
        self.maps.iter().map(|(l, _)| *l).collect()
    }

    pub fn get(&self, label: CoefLabel) -> Option<&Plane> {
        self.maps.iter().find(|(l, _)| *l == label).map(|(_, p)| p)
    }
}

/// MSCN of every map, then the four spatial differences of the identity and
/// GM MSCN maps.
pub fn build_coefficients(mapset: &MapSet) -> Result<CoefficientSet> {
    let normalized: Vec<Plane> = mapset.maps.par_iter().map(|(_, p)| mscn(p)).collect();
    let mut maps: Vec<(CoefLabel, Plane)> = mapset
        .maps
        .iter()
        .zip(normalized)
        .map(|((label, _), p)| {
            (
                CoefLabel {
                    source: *label,
                    diff: None,
                },
                p,
            )
        })
        .collect();
    for source in DIFF_SOURCES {
        let base = maps
            .iter()
            .find(|(l, _)| l.source == source)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::arg(format!("map set is missing {source}")))?;
        let diffs = spatial_diffs(base)?;
        for (d, p) in Direction::ALL.into_iter().zip(diffs) {
            maps.push((
                CoefLabel {
                    source,
                    diff: Some(d),
                },
                p,
            ));
        }
    }
    Ok(CoefficientSet {
        maps,
        partial: mapset.partial,
    })
}

/// Histogram of `values` over `[lo, hi]` with `bins` equal bins; samples
/// outside the range are dropped.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}
