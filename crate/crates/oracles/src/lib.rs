//! Slow, direct reference implementations. Nothing here shares code with
//! `gvqp-core`; each function recomputes its quantity from the definition.

use nalgebra::{DMatrix, DVector};

/// Half-sample symmetric reflection by repeated folding.
pub fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Full 2-D convolution `out(i,j) = sum k(a,b) p(i-a, j-b)` with mirror
/// extension. `taps` is row-major `(2r+1) x (2c+1)` centred on the middle.
pub fn naive_convolve(p: &[f64], width: usize, height: usize, taps: &[f64], krows: usize, kcols: usize) -> Vec<f64> {
    let (r, c) = ((krows / 2) as isize, (kcols / 2) as isize);
    let mut out = vec![0.0; width * height];
    for i in 0..height as isize {
        for j in 0..width as isize {
            let mut acc = 0.0;
            for a in -r..=r {
                for b in -c..=c {
                    let k = taps[((a + r) * kcols as isize + (b + c)) as usize];
                    acc += k * p[reflect(i - a, height) * width + reflect(j - b, width)];
                }
            }
            out[i as usize * width + j as usize] = acc;
        }
    }
    out
}

/// Weighted local standard deviation by direct double loops.
pub fn naive_local_std(p: &[f64], width: usize, height: usize, w: &[f64], radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let side = 2 * radius + 1;
    let at = |i: isize, j: isize| p[reflect(i, height) * width + reflect(j, width)];
    let mut out = vec![0.0; width * height];
    for i in 0..height as isize {
        for j in 0..width as isize {
            let mut mu = 0.0;
            for a in -r..=r {
                for b in -r..=r {
                    mu += w[((a + r) as usize) * side + (b + r) as usize] * at(i - a, j - b);
                }
            }
            let mut var = 0.0;
            for a in -r..=r {
                for b in -r..=r {
                    let d = at(i - a, j - b) - mu;
                    var += w[((a + r) as usize) * side + (b + r) as usize] * d * d;
                }
            }
            out[i as usize * width + j as usize] = var.sqrt();
        }
    }
    out
}

/// Ranks by counting: `1 + #{less} + #{equal others}/2`.
pub fn brute_force_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let ties = v.iter().enumerate().filter(|(j, y)| *j != i && *y == x).count() as f64;
            1.0 + less + ties / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn brute_force_srocc(a: &[f64], b: &[f64]) -> f64 {
    pearson(&brute_force_ranks(a), &brute_force_ranks(b))
}

/// Exact one-sided rank-sum p-values `(P(W >= w), P(W <= w))` for the rank
/// sum `W` of `a`, by enumerating every size-`|a|` subset of the pooled
/// midranks.
pub fn exact_ranksum(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = brute_force_ranks(&pooled);
    let n = pooled.len();
    assert!(n <= 24, "enumeration limited to 24 values");
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut ge, mut le, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        total += 1;
        if s >= observed - 1e-9 {
            ge += 1;
        }
        if s <= observed + 1e-9 {
            le += 1;
        }
    }
    (ge as f64 / total as f64, le as f64 / total as f64)
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub objective: f64,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
}

pub fn rbf_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| (-gamma * a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>()).exp())
                .collect()
        })
        .collect()
}

/// Global minimum of the epsilon-SVR dual
/// `1/2 c'Kc + eps*sum(a + a*) - y'c`, `c = a - a*`, `sum c = 0`,
/// `0 <= a, a* <= C`, found by enumerating every active set. With
/// `eps > 0` at most one of `a_i, a*_i` is non-zero, leaving five states per
/// point; each free set is solved from its KKT linear system.
pub fn svr_dual_qp(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, eps: f64) -> QpSolution {
    let l = y.len();
    assert!(l <= 7 && eps > 0.0);
    let k = rbf_matrix(x, gamma);
    // variable t < l is alpha_t (sign +1); t >= l is alpha*_{t-l} (sign -1)
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let q = |t: usize, u: usize| sign(t) * sign(u) * k[t % l][u % l];
    let p = |t: usize| if t < l { eps - y[t] } else { eps + y[t - l] };
    let objective = |beta: &[f64]| {
        let mut v = 0.0;
        for t in 0..2 * l {
            v += p(t) * beta[t];
            for u in 0..2 * l {
                v += 0.5 * beta[t] * q(t, u) * beta[u];
            }
        }
        v
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let cases = 5usize.pow(l as u32);
    for case in 0..cases {
        let mut code = case;
        let mut beta = vec![0.0; 2 * l];
        let mut free = Vec::new();
        for i in 0..l {
            match code % 5 {
                0 => {}
                1 => free.push(i),
                2 => beta[i] = c,
                3 => free.push(i + l),
                _ => beta[i + l] = c,
            }
            code /= 5;
        }
        let fixed_balance: f64 = (0..2 * l).map(|t| sign(t) * beta[t]).sum();
        if free.is_empty() {
            if fixed_balance.abs() > 1e-12 {
                continue;
            }
        } else {
            let m = free.len();
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for (r, &t) in free.iter().enumerate() {
                for (s, &u) in free.iter().enumerate() {
                    a[(r, s)] = q(t, u);
                }
                a[(r, m)] = sign(t);
                a[(m, r)] = sign(t);
                let fixed_grad: f64 = (0..2 * l).map(|u| q(t, u) * beta[u]).sum();
                rhs[r] = -p(t) - fixed_grad;
            }
            rhs[m] = -fixed_balance;
            let Some(sol) = a.lu().solve(&rhs) else {
                continue;
            };
            if free.iter().enumerate().any(|(r, _)| !(sol[r] >= -1e-10 && sol[r] <= c + 1e-10)) {
                continue;
            }
            for (r, &t) in free.iter().enumerate() {
                beta[t] = sol[r].clamp(0.0, c);
            }
        }
        let f = objective(&beta);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, beta));
        }
    }
    let (objective, mut beta) = best.expect("the all-zero point is always feasible");
    let alpha_star = beta.split_off(l);
    QpSolution {
        objective,
        alpha: beta,
        alpha_star,
    }
}
