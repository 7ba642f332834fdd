use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{check_pair, mean, pearson, rmse, std_dev, Correlation};
use crate::Result;

pub const MAX_ITERATIONS: usize = 2000;
pub const RESTARTS: usize = 3;
const JITTER_SEED: u64 = 0x6c6f_6769_7374_6963;
/// Width multiplier for the near-linear candidate.
const LINEAR_WIDTH: f64 = 1e6;

/// `f(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl LogisticParams {
    /// Evaluated as `mid + amp/2 * tanh(t/2)`, which equals the form above
    /// and keeps precision when `|t|` is tiny.
    pub fn eval(&self, x: f64) -> f64 {
        let mid = (self.beta1 + self.beta2) / 2.0;
        let amp = self.beta1 - self.beta2;
        mid + amp * half_tanh(x, self.beta3, self.beta4)
    }

    fn from_vec(v: &[f64; 4]) -> Self {
        LogisticParams {
            beta1: v[0],
            beta2: v[1],
            beta3: v[2],
            beta4: v[3],
        }
    }
}

fn half_tanh(x: f64, beta3: f64, beta4: f64) -> f64 {
    0.5 * ((x - beta3) / (2.0 * beta4.abs())).tanh()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub lcc: Correlation,
    pub rmse: f64,
    pub sse: f64,
    /// The selected candidate met the simplex tolerance (or was closed form).
    pub converged: bool,
    /// No candidate produced a finite fit; identity mapping used.
    pub fallback: bool,
}

fn sse(p: &LogisticParams, x: &[f64], y: &[f64]) -> f64 {
    if p.beta4 == 0.0 || !p.beta4.is_finite() {
        return f64::INFINITY;
    }
    let s: f64 = x.iter().zip(y).map(|(a, b)| (p.eval(*a) - b).powi(2)).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Exact least-squares `beta1, beta2` for fixed `beta3, beta4`. This can
/// only lower the SSE of whatever shape it is given.
fn polish(beta3: f64, beta4: f64, x: &[f64], y: &[f64]) -> LogisticParams {
    let s: Vec<f64> = x.iter().map(|v| half_tanh(*v, beta3, beta4)).collect();
    let (ms, my) = (mean(&s), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in s.iter().zip(y) {
        sxy += (a - ms) * (b - my);
        sxx += (a - ms) * (a - ms);
    }
    let amp = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mid = my - amp * ms;
    LogisticParams {
        beta1: mid + amp / 2.0,
        beta2: mid - amp / 2.0,
        beta3,
        beta4,
    }
}

struct NmResult {
    point: [f64; 4],
    value: f64,
    converged: bool,
}

fn nelder_mead(f: impl Fn(&[f64; 4]) -> f64, start: [f64; 4], steps: [f64; 4]) -> NmResult {
    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((start, f(&start)));
    for k in 0..4 {
        let mut p = start;
        p[k] += steps[k];
        simplex.push((p, f(&p)));
    }
    let combine = |a: &[f64; 4], b: &[f64; 4], t: f64| -> [f64; 4] {
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = a[k] + t * (b[k] - a[k]);
        }
        out
    };
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[4].1;
        let spread = worst - best;
        let size = (1..5)
            .flat_map(|i| (0..4).map(move |k| (i, k)))
            .map(|(i, k)| (simplex[i].0[k] - simplex[0].0[k]).abs() / steps[k].abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if best.is_finite() && spread <= 1e-10 * best.abs().max(1e-300) && size <= 1e-7 {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 4];
        for (p, _) in &simplex[..4] {
            for k in 0..4 {
                centroid[k] += p[k] / 4.0;
            }
        }
        let reflected = combine(&centroid, &simplex[4].0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &simplex[4].0, -2.0);
            let fe = f(&expanded);
            simplex[4] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[4].1 {
                let c = combine(&centroid, &reflected, 0.5);
                (c, f(&c))
            } else {
                let c = combine(&centroid, &simplex[4].0, 0.5);
                (c, f(&c))
            };
            if fc < simplex[4].1.min(fr) {
                simplex[4] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for item in simplex.iter_mut().skip(1) {
                    let p = combine(&anchor, &item.0, 0.5);
                    *item = (p, f(&p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NmResult {
        point: simplex[0].0,
        value: simplex[0].1,
        converged,
    }
}

/// Fits the logistic mapping from `pred` to `mos` and reports LCC and RMSE
/// of the mapped predictions.
pub fn lcc_rmse(pred: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    check_pair(pred, mos, 5)?;
    let (lo, hi) = pred.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if lo == hi {
        let m = mean(mos);
        return Ok(LogisticFit {
            params: LogisticParams {
                beta1: m,
                beta2: m,
                beta3: lo,
                beta4: 1.0,
            },
            lcc: Correlation {
                value: 0.0,
                degenerate: true,
            },
            rmse: std_dev(mos),
            sse: mos.iter().map(|v| (v - m) * (v - m)).sum(),
            converged: true,
            fallback: false,
        });
    }

    let mos_max = mos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mos_min = mos.iter().copied().fold(f64::INFINITY, f64::min);
    let pred_std = std_dev(pred);
    let init = [mos_max, mos_min, mean(pred), pred_std / 4.0];
    let mos_scale = if mos_max > mos_min { (mos_max - mos_min) * 0.1 } else { 1.0 };
    let steps = [mos_scale, mos_scale, pred_std * 0.5, pred_std / 8.0];
    let objective = |v: &[f64; 4]| sse(&LogisticParams::from_vec(v), pred, mos);

    let mut candidates: Vec<(LogisticParams, bool)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(JITTER_SEED);
    for run in 0..=RESTARTS {
        let mut start = init;
        if run > 0 {
            for k in 0..4 {
                start[k] += steps[k] * rng.random_range(-1.0..1.0);
            }
        }
        let r = nelder_mead(objective, start, steps);
        if r.value.is_finite() {
            let p = LogisticParams::from_vec(&r.point);
            candidates.push((polish(p.beta3, p.beta4, pred, mos), r.converged));
        }
    }
    candidates.push((polish(mean(pred), LINEAR_WIDTH * (hi - lo), pred, mos), true));

    let best = candidates
        .into_iter()
        .map(|(p, conv)| (p, conv, sse(&p, pred, mos)))
        .filter(|c| c.2.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2));

    let Some((params, converged, best_sse)) = best else {
        return Ok(LogisticFit {
            params: LogisticParams {
                beta1: f64::NAN,
                beta2: f64::NAN,
                beta3: f64::NAN,
                beta4: f64::NAN,
            },
            lcc: pearson(pred, mos)?,
            rmse: rmse(pred, mos),
            sse: pred.iter().zip(mos).map(|(a, b)| (a - b).powi(2)).sum(),
            converged: false,
            fallback: true,
        });
    };
    let mapped: Vec<f64> = pred.iter().map(|v| params.eval(*v)).collect();
    Ok(LogisticFit {
        params,
        lcc: pearson(&mapped, mos)?,
        rmse: rmse(&mapped, mos),
        sse: best_sse,
        converged,
        fallback: false,
    })
}
