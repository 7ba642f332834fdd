//! SMO for the epsilon-SVR dual.
//!
//! With `l` samples the dual has `2l` variables `beta = [alpha; alpha*]`
//! with signs `s = [+1; -1]`:
//!
//! ```text
//! min  1/2 beta' Q beta + p' beta
//! s.t. s' beta = 0,  0 <= beta_t <= C
//! Q_tu = s_t s_u K(x_t, x_u),  p = [eps - y; eps + y]
//! ```
//!
//! Each iteration optimizes the maximal violating pair analytically.

use rayon::prelude::*;

use crate::{Error, Result};

const TAU: f64 = 1e-12;

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Converged dual variables and diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// `-rho`; predictions are `sum (alpha - alpha*) K + bias`.
    pub bias: f64,
    pub objective: f64,
    /// Maximal KKT violation `m(beta) - M(beta)` at exit.
    pub violation: f64,
    pub iterations: usize,
}

impl DualSolution {
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.alpha_star).map(|(a, b)| a - b).collect()
    }
}

struct Problem<'a> {
    kernel: &'a [f64],
    l: usize,
}

impl Problem<'_> {
    #[inline]
    fn sign(&self, t: usize) -> f64 {
        if t < self.l {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn q(&self, t: usize, u: usize) -> f64 {
        self.sign(t) * self.sign(u) * self.kernel[(t % self.l) * self.l + u % self.l]
    }
}

fn in_up(s: f64, beta: f64, c: f64) -> bool {
    if s > 0.0 {
        beta < c
    } else {
        beta > 0.0
    }
}

fn in_low(s: f64, beta: f64, c: f64) -> bool {
    if s > 0.0 {
        beta > 0.0
    } else {
        beta < c
    }
}

/// Maximal violating pair `(i, j, m - M)`.
fn select_pair(prob: &Problem, beta: &[f64], grad: &[f64], c: f64) -> (usize, usize, f64) {
    let mut up = (usize::MAX, f64::NEG_INFINITY);
    let mut low = (usize::MAX, f64::INFINITY);
    for t in 0..beta.len() {
        let s = prob.sign(t);
        let v = -s * grad[t];
        if in_up(s, beta[t], c) && v > up.1 {
            up = (t, v);
        }
        if in_low(s, beta[t], c) && v < low.1 {
            low = (t, v);
        }
    }
    (up.0, low.0, up.1 - low.1)
}

fn bias(prob: &Problem, beta: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..beta.len() {
        let s = prob.sign(t);
        let sg = s * grad[t];
        if beta[t] >= c {
            if s < 0.0 {
                ub = ub.min(sg);
            } else {
                lb = lb.max(sg);
            }
        } else if beta[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(sg);
            } else {
                lb = lb.max(sg);
            }
        } else {
            free += 1;
            free_sum += sg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    -rho
}

/// Precomputed RBF Gram matrix, row-major.
pub(crate) fn gram(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let l = x.len();
    let mut k = vec![0.0; l * l];
    k.par_chunks_mut(l).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { rbf(&x[i], &x[j], gamma) };
        }
    });
    k
}

/// Solves the dual on already-scaled inputs.
pub fn solve(x: &[Vec<f64>], y: &[f64], params: &SmoParams) -> Result<DualSolution> {
    let l = x.len();
    let kernel = gram(x, params.gamma);
    let prob = Problem { kernel: &kernel, l };
    let n = 2 * l;
    let c = params.c;
    let p: Vec<f64> = (0..n)
        .map(|t| {
            if t < l {
                params.epsilon - y[t]
            } else {
                params.epsilon + y[t - l]
            }
        })
        .collect();
    let mut beta = vec![0.0; n];
    let mut grad = p.clone();

    let mut iterations = 0;
    let violation = loop {
        let (i, j, gap) = select_pair(&prob, &beta, &grad, c);
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            break gap.max(0.0);
        }
        if iterations >= params.max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (beta[i], beta[j]);
        let (qii, qjj, qij) = (prob.q(i, i), prob.q(j, j), prob.q(i, j));
        if prob.sign(i) != prob.sign(j) {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }

        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += prob.q(t, i) * di + prob.q(t, j) * dj;
        }
    };

    let objective = beta
        .iter()
        .zip(grad.iter().zip(&p))
        .map(|(b, (g, pt))| b * (g + pt))
        .sum::<f64>()
        / 2.0;
    let b = bias(&prob, &beta, &grad, c);
    let alpha_star = beta.split_off(l);
    Ok(DualSolution {
        alpha: beta,
        alpha_star,
        bias: b,
        objective,
        violation,
        iterations,
    })
}

/// Dual objective of an arbitrary `(alpha, alpha*)` pair.
pub fn dual_objective(kernel_rows: &[Vec<f64>], y: &[f64], epsilon: f64, alpha: &[f64], alpha_star: &[f64]) -> f64 {
    let l = y.len();
    let coef: Vec<f64> = alpha.iter().zip(alpha_star).map(|(a, b)| a - b).collect();
    let mut quad = 0.0;
    for i in 0..l {
        for j in 0..l {
            quad += coef[i] * coef[j] * kernel_rows[i][j];
        }
    }
    let lin: f64 = (0..l)
        .map(|i| epsilon * (alpha[i] + alpha_star[i]) - y[i] * coef[i])
        .sum();
    0.5 * quad + lin
}
