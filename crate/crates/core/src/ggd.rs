//! Zero-mean generalized Gaussian fitting by moment matching.
//!
//! The shape is found by matching the sample ratio `E[|x|]^2 / E[x^2]`
//! against `rho(a) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))` tabulated on a
//! fixed grid; the spread is the sample RMS.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 0.001;
pub const MIN_SAMPLES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GgdParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl GgdParams {
    /// Encoding used for maps with no energy at all.
    pub const DEGENERATE: GgdParams = GgdParams {
        alpha: ALPHA_MAX,
        sigma: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgdFit {
    pub params: GgdParams,
    pub degenerate: bool,
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// The gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::arg(format!("gamma is defined here for x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

/// `Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))`, computed through log-gammas
/// so large arguments at small shapes do not overflow.
pub fn moment_ratio(alpha: f64) -> f64 {
    let lg = |x: f64| gamma_unchecked(x).ln();
    (2.0 * lg(2.0 / alpha) - lg(1.0 / alpha) - lg(3.0 / alpha)).exp()
}

struct RatioTable {
    alphas: Vec<f64>,
    ratios: Vec<f64>,
}

fn table() -> &'static RatioTable {
    static TABLE: OnceLock<RatioTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize + 1;
        let alphas: Vec<f64> = (0..n).map(|k| ALPHA_MIN + k as f64 * ALPHA_STEP).collect();
        let ratios = alphas.iter().map(|&a| moment_ratio(a)).collect();
        RatioTable { alphas, ratios }
    })
}

/// Grid of candidate shapes and their moment ratios.
pub fn ratio_table() -> (&'static [f64], &'static [f64]) {
    let t = table();
    (&t.alphas, &t.ratios)
}

/// Fits a zero-mean GGD to `samples`. All-zero input yields
/// [`GgdParams::DEGENERATE`] with the `degenerate` flag set.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::arg(format!(
            "GGD fit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for &x in samples {
        if !x.is_finite() {
            return Err(Error::NonFinite("GGD sample".into()));
        }
        abs_sum += x.abs();
        sq_sum += x * x;
    }
    if sq_sum == 0.0 {
        return Ok(GgdFit {
            params: GgdParams::DEGENERATE,
            degenerate: true,
        });
    }
    let mean_abs = abs_sum / n;
    let mean_sq = sq_sum / n;
    let target = mean_abs * mean_abs / mean_sq;

    let t = table();
    // ratios increase with alpha; take the nearest of the two bracketing nodes
    let idx = t.ratios.partition_point(|&r| r < target);
    let best = if idx == 0 {
        0
    } else if idx == t.ratios.len() {
        idx - 1
    } else if (t.ratios[idx] - target).abs() < (target - t.ratios[idx - 1]).abs() {
        idx
    } else {
        idx - 1
    };
    Ok(GgdFit {
        params: GgdParams {
            alpha: t.alphas[best],
            sigma: mean_sq.sqrt(),
        },
        degenerate: false,
    })
}
