use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A correlation value. Constant inputs give `value = 0` with
/// `degenerate = true` instead of NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

impl Correlation {
    const DEGENERATE: Correlation = Correlation {
        value: 0.0,
        degenerate: true,
    };
}

pub(crate) fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions vs {} scores", a.len(), b.len())));
    }
    if a.len() < min_len {
        return Err(Error::arg(format!("need at least {min_len} pairs, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn pearson_unchecked(a: &[f64], b: &[f64]) -> Correlation {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Correlation::DEGENERATE;
    }
    Correlation {
        value: (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    check_pair(a, b, 2)?;
    Ok(pearson_unchecked(a, b))
}

pub fn srocc(pred: &[f64], mos: &[f64]) -> Result<Correlation> {
    check_pair(pred, mos, 3)?;
    Ok(pearson_unchecked(&ranks(pred), &ranks(mos)))
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}
