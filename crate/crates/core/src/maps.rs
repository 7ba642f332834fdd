//! Pre-processed frame maps: identity, difference of Gaussians, sigma-DoG,
//! Sobel gradient magnitude and nine displaced frame differences, each on
//! both `L*` and `C*`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::colorspace::ColorFrame;
use crate::mscn::{local_stats, GaussianWindow};
use crate::{Error, Plane, Result};

/// Centre scale of the DoG filter.
pub const DOG_SIGMA: f64 = 1.16;
/// Ratio of the surround to the centre Gaussian.
pub const DOG_SURROUND_RATIO: f64 = 1.5;
/// DoG support radius in units of the surround sigma.
const DOG_TRUNCATION: f64 = 4.0;

/// DFD shift order `(k, l)`: row offset `k`, column offset `l`.
pub const DFD_SHIFTS: [(isize, isize); 9] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (0, -1),
    (-1, 0),
    (-1, 1),
    (1, -1),
    (-1, -1),
    (1, 1),
];

pub const FULL_MAP_COUNT: usize = 26;
pub const PARTIAL_MAP_COUNT: usize = 8;

/// Odd-sized 2D convolution kernel anchored at its centre.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
    /// Response to a constant input of 1. Stored separately from the taps so
    /// that zero-DC kernels map constant regions to exactly zero.
    dc_gain: f64,
}

impl Kernel {
    /// General kernel; the DC gain is the plain sum of taps.
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        let dc_gain = taps.iter().sum();
        Self::with_dc_gain(rows, cols, taps, dc_gain)
    }

    fn with_dc_gain(rows: usize, cols: usize, taps: Vec<f64>, dc_gain: f64) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::arg(format!("kernel sides must be odd, got {rows}x{cols}")));
        }
        if taps.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} taps for a {rows}x{cols} kernel",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("kernel tap".into()));
        }
        Ok(Kernel {
            rows,
            cols,
            taps,
            dc_gain,
        })
    }

    /// Kernel whose taps sum to zero by construction.
    pub fn zero_dc(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        Self::with_dc_gain(rows, cols, taps, 0.0)
    }

    /// Kernel rescaled to unit sum.
    pub fn normalized(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        let s: f64 = taps.iter().sum();
        if s == 0.0 {
            return Err(Error::arg("cannot normalize a zero-sum kernel"));
        }
        Self::with_dc_gain(rows, cols, taps.into_iter().map(|t| t / s).collect(), 1.0)
    }

    /// Unit-sum isotropic Gaussian of the given radius.
    pub fn gaussian(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::arg(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        let side = 2 * radius + 1;
        let r = radius as isize;
        let mut taps = Vec::with_capacity(side * side);
        for y in -r..=r {
            for x in -r..=r {
                taps.push((-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
            }
        }
        Self::normalized(side, side, taps)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn dc_gain(&self) -> f64 {
        self.dc_gain
    }

    /// Tap at offset `(dy, dx)` from the anchor.
    pub fn at(&self, dy: isize, dx: isize) -> f64 {
        let r = (dy + (self.rows / 2) as isize) as usize;
        let c = (dx + (self.cols / 2) as isize) as usize;
        self.taps[r * self.cols + c]
    }
}

/// Discrete difference of Gaussians with surround sigma `1.5 * sigma1`.
/// Both Gaussians are normalized to unit sum before subtraction.
pub fn dog_kernel(sigma1: f64) -> Result<Kernel> {
    if !(sigma1 > 0.0 && sigma1.is_finite()) {
        return Err(Error::arg(format!("DoG sigma must be > 0, got {sigma1}")));
    }
    let sigma2 = DOG_SURROUND_RATIO * sigma1;
    let radius = (DOG_TRUNCATION * sigma2).ceil() as usize;
    let centre = Kernel::gaussian(sigma1, radius)?;
    let surround = Kernel::gaussian(sigma2, radius)?;
    let side = 2 * radius + 1;
    let taps = centre
        .taps
        .iter()
        .zip(&surround.taps)
        .map(|(a, b)| a - b)
        .collect();
    Kernel::zero_dc(side, side, taps)
}

pub fn sobel_x() -> Kernel {
    Kernel::zero_dc(3, 3, vec![1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 1.0, 0.0, -1.0]).unwrap()
}

pub fn sobel_y() -> Kernel {
    Kernel::zero_dc(3, 3, vec![1.0, 2.0, 1.0, 0.0, 0.0, 0.0, -1.0, -2.0, -1.0]).unwrap()
}

/// Mirror-extended copy of `plane` with `ry` rows and `rx` columns of
/// padding on each side.
pub(crate) fn pad(plane: &Plane, ry: usize, rx: usize) -> (Vec<f64>, usize) {
    let pw = plane.width() + 2 * rx;
    let ph = plane.height() + 2 * ry;
    let mut out = Vec::with_capacity(pw * ph);
    for i in 0..ph {
        for j in 0..pw {
            out.push(plane.get_mirrored(i as isize - ry as isize, j as isize - rx as isize));
        }
    }
    (out, pw)
}

/// 2D convolution with symmetric boundary extension; output has the input's
/// dimensions.
///
/// Evaluated as `dc * P(i,j) + sum k(m,n) (P(i-m,j-n) - P(i,j))`, which is
/// algebraically the plain convolution but maps constant regions exactly to
/// `dc * P`.
pub fn convolve(plane: &Plane, kernel: &Kernel) -> Plane {
    let (w, h) = plane.dims();
    if w == 0 || h == 0 {
        return plane.clone();
    }
    let (ry, rx) = (kernel.rows / 2, kernel.cols / 2);
    let (padded, pw) = pad(plane, ry, rx);
    // flipped so the inner loop walks the padded window forwards
    let flipped: Vec<f64> = kernel.taps.iter().rev().copied().collect();
    let (kr, kc, dc) = (kernel.rows, kernel.cols, kernel.dc_gain);

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
        let centre = &padded[(i + ry) * pw + rx..(i + ry) * pw + rx + w];
        let mut acc = vec![0.0; w];
        for a in 0..kr {
            let krow = &flipped[a * kc..(a + 1) * kc];
            for (b, &t) in krow.iter().enumerate() {
                let start = (i + a) * pw + b;
                for ((s, &v), &c) in acc.iter_mut().zip(&padded[start..start + w]).zip(centre) {
                    *s += t * (v - c);
                }
            }
        }
        for ((o, s), &c) in row.iter_mut().zip(acc).zip(centre) {
            *o = s + dc * c;
        }
    });
    Plane::from_vec(w, h, out).expect("dims preserved")
}

pub fn apply_dog(plane: &Plane, kernel: &Kernel) -> Plane {
    convolve(plane, kernel)
}

/// Sobel gradient magnitude `sqrt((I*hx)^2 + (I*hy)^2)`.
pub fn gradient_magnitude(plane: &Plane) -> Result<Plane> {
    if plane.width() < 3 || plane.height() < 3 {
        return Err(Error::arg(format!(
            "gradient magnitude needs at least 3x3, got {}x{}",
            plane.width(),
            plane.height()
        )));
    }
    let gx = convolve(plane, &sobel_x());
    let gy = convolve(plane, &sobel_y());
    let data = gx
        .as_slice()
        .iter()
        .zip(gy.as_slice())
        .map(|(x, y)| x.hypot(*y))
        .collect();
    Plane::from_vec(plane.width(), plane.height(), data)
}

/// Local weighted standard deviation under the MSCN Gaussian window.
pub fn sigma_field(plane: &Plane) -> Plane {
    local_stats(plane, GaussianWindow::shared()).1
}

/// DoG applied to the sigma field.
pub fn sigma_dog(plane: &Plane, dog: &Kernel) -> Plane {
    apply_dog(&sigma_field(plane), dog)
}

/// `D(i,j) = cur(i,j) - next(i-k, j-l)` for every shift in [`DFD_SHIFTS`].
pub fn displaced_frame_diffs(cur: &Plane, next: &Plane) -> Result<Vec<Plane>> {
    cur.ensure_same_dims(next)?;
    Ok(DFD_SHIFTS.iter().map(|&shift| dfd_map(cur, next, shift)).collect())
}

fn dfd_map(cur: &Plane, next: &Plane, (k, l): (isize, isize)) -> Plane {
    Plane::from_fn(cur.width(), cur.height(), |i, j| {
        cur.get(i, j) - next.get_mirrored(i as isize - k, j as isize - l)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Channel {
    L,
    C,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::L, Channel::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MapKind {
    Identity,
    Dog,
    SigmaDog,
    Gm,
    /// Index into [`DFD_SHIFTS`].
    Dfd(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MapLabel {
    pub kind: MapKind,
    pub channel: Channel,
}

impl fmt::Display for MapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = match self.channel {
            Channel::L => "L",
            Channel::C => "C",
        };
        match self.kind {
            MapKind::Identity => write!(f, "identity-{ch}"),
            MapKind::Dog => write!(f, "dog-{ch}"),
            MapKind::SigmaDog => write!(f, "sigmadog-{ch}"),
            MapKind::Gm => write!(f, "gm-{ch}"),
            MapKind::Dfd(s) => {
                let (k, l) = DFD_SHIFTS[s];
                write!(f, "dfd({k},{l})-{ch}")
            }
        }
    }
}

/// Canonical label order of a full map set.
pub fn canonical_map_labels(full: bool) -> Vec<MapLabel> {
    let mut labels = Vec::with_capacity(FULL_MAP_COUNT);
    for kind in [MapKind::Identity, MapKind::Dog, MapKind::SigmaDog, MapKind::Gm] {
        for channel in Channel::BOTH {
            labels.push(MapLabel { kind, channel });
        }
    }
    if full {
        for channel in Channel::BOTH {
            for s in 0..DFD_SHIFTS.len() {
                labels.push(MapLabel {
                    kind: MapKind::Dfd(s),
                    channel,
                });
            }
        }
    }
    labels
}

/// The pre-processed maps of one frame. Partial sets (final frame of a
/// video) carry no DFD maps.
#[derive(Clone, Debug)]
pub struct MapSet {
    pub maps: Vec<(MapLabel, Plane)>,
    pub partial: bool,
}

impl MapSet {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn get(&self, label: MapLabel) -> Option<&Plane> {
        self.maps.iter().find(|(l, _)| *l == label).map(|(_, p)| p)
    }

    pub fn labels(&self) -> Vec<MapLabel> {
        self.maps.iter().map(|(l, _)| *l).collect()
    }

    /// Writes each map as row-major little-endian `f32` plus a JSON sidecar
    /// (`maps.json`) listing labels, file names and dimensions.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Entry {
            label: String,
            file: String,
            width: usize,
            height: usize,
        }
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.maps.len());
        for (k, (label, plane)) in self.maps.iter().enumerate() {
            let file = format!("{k:02}.f32");
            let mut bytes = Vec::with_capacity(plane.len() * 4);
            for &v in plane.as_slice() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            std::fs::write(dir.join(&file), bytes)?;
            entries.push(Entry {
                label: label.to_string(),
                file,
                width: plane.width(),
                height: plane.height(),
            });
        }
        let mut f = std::fs::File::create(dir.join("maps.json"))?;
        serde_json::to_writer_pretty(&mut f, &entries)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Builds the canonical 26 maps for `frame`, or the 8 non-DFD maps when
/// there is no successor frame.
pub fn build_mapset(frame: &ColorFrame, next: Option<&ColorFrame>, dog: &Kernel) -> Result<MapSet> {
    let planes = [&frame.l_star, &frame.c_star];
    if let Some(n) = next {
        frame.l_star.ensure_same_dims(&n.l_star)?;
        frame.c_star.ensure_same_dims(&n.c_star)?;
    }
    let labels = canonical_map_labels(next.is_some());
    let built: Vec<Result<Plane>> = labels
        .par_iter()
        .map(|label| {
            let p = planes[label.channel.index()];
            Ok(match label.kind {
                MapKind::Identity => p.clone(),
                MapKind::Dog => apply_dog(p, dog),
                MapKind::SigmaDog => sigma_dog(p, dog),
                MapKind::Gm => gradient_magnitude(p)?,
                MapKind::Dfd(s) => {
                    let n = next.expect("DFD labels only when next is present");
                    let np = [&n.l_star, &n.c_star][label.channel.index()];
                    dfd_map(p, np, DFD_SHIFTS[s])
                }
            })
        })
        .collect();
    let mut maps = Vec::with_capacity(labels.len());
    for (label, plane) in labels.into_iter().zip(built) {
        maps.push((label, plane?));
    }
    Ok(MapSet {
        partial: next.is_none(),
        maps,
    })
}
