//! sRGB to CIELAB lightness (`L*`) and CIELCh chroma (`C*`).
//!
//! D65 white, 2° observer, IEC 61966-2-1 transfer function.

use rayon::prelude::*;

use crate::frameio::RgbFrame;
use crate::Plane;

/// Linear sRGB to XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Reference white taken as the image of linear RGB (1, 1, 1) so that sRGB
/// white lands exactly on `L* = 100, C* = 0`.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const DELTA: f64 = 6.0 / 29.0;

/// Lightness and chroma planes of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorFrame {
    pub l_star: Plane,
    pub c_star: Plane,
    pub index: usize,
}

impl ColorFrame {
    pub fn width(&self) -> usize {
        self.l_star.width()
    }

    pub fn height(&self) -> usize {
        self.l_star.height()
    }
}

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELAB `(L*, a*, b*)` of one sRGB pixel.
pub fn srgb_to_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    let lin = [srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)];
    let mut xyz = [0.0; 3];
    for (k, row) in RGB_TO_XYZ.iter().enumerate() {
        xyz[k] = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / WHITE[k];
    }
    let [fx, fy, fz] = xyz.map(lab_f);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Chroma magnitude in the a*/b* plane.
#[inline]
pub fn chroma(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

pub fn srgb_to_colorframe(frame: &RgbFrame) -> ColorFrame {
    let (w, h) = frame.r.dims();
    let (r, g, b) = (frame.r.as_slice(), frame.g.as_slice(), frame.b.as_slice());
    let lc: Vec<(f64, f64)> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let [l, a, bb] = srgb_to_lab(r[k], g[k], b[k]);
            (l.clamp(0.0, 100.0), chroma(a, bb))
        })
        .collect();
    let (l, c): (Vec<f64>, Vec<f64>) = lc.into_iter().unzip();
    ColorFrame {
        l_star: Plane::from_vec(w, h, l).expect("dims preserved"),
        c_star: Plane::from_vec(w, h, c).expect("dims preserved"),
        index: frame.index,
    }
}
