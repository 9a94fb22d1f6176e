//! Ridge-penalized linear and logistic regression.
//!
//! The intercept is never penalized. Logistic fits use Newton (IRLS) steps
//! with step halving on the penalized deviance. Rows are put into a
//! canonical order before any summation, so permuting the training rows
//! cannot change a single bit of the result.

use nalgebra::{DMatrix, DVector};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;

/// Fitted coefficients: `intercept + x . coef`, optionally through the logistic link.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub logistic: bool,
}

impl Linear {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let eta = self.intercept + self.coef.iter().enumerate().map(|(j, c)| c * row(j)).sum::<f64>();
        if self.logistic {
            sigmoid(eta)
        } else {
            eta
        }
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Design matrix `[1 | X]` with rows sorted by `(y, x)`.
fn canonical_design(x: &DMatrix<f64>, y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b]).then_with(|| {
            (0..p)
                .map(|j| x[(a, j)].total_cmp(&x[(b, j)]))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let d = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(order[i], j - 1)] });
    let t = DVector::from_iterator(n, order.iter().map(|&i| y[i]));
    (d, t)
}

fn penalty(p: usize, lambda: f64) -> DMatrix<f64> {
    let mut pen = DMatrix::from_diagonal_element(p + 1, p + 1, lambda);
    pen[(0, 0)] = 0.0;
    pen
}

/// Solves the symmetric system `a z = b`, falling back to a pseudo-inverse
/// when `a` is not positive definite.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => a
            .svd(true, true)
            .solve(b, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(b.len())),
    }
}

/// Ridge least squares.
pub fn fit_gaussian(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Linear {
    let (d, t) = canonical_design(x, y);
    let a = d.tr_mul(&d) + penalty(x.ncols(), lambda);
    let beta = solve_spd(a, &d.tr_mul(&t));
    Linear {
        intercept: beta[0],
        coef: beta.iter().skip(1).copied().collect(),
        logistic: false,
    }
}

fn penalized_deviance(d: &DMatrix<f64>, t: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let eta = d * beta;
    let mut dev = 0.0;
    for (e, y) in eta.iter().zip(t.iter()) {
        // -2 log-likelihood in a numerically stable form.
        let log1pexp = if *e > 0.0 {
            e + (-e).exp().ln_1p()
        } else {
            e.exp().ln_1p()
        };
        dev += 2.0 * (log1pexp - y * e);
    }
    dev + lambda * beta.iter().skip(1).map(|b| b * b).sum::<f64>()
}

/// Ridge-penalized logistic regression on 0/1 targets. The caller must
/// ensure both classes are present.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Linear {
    let (d, t) = canonical_design(x, y);
    let (n, q) = d.shape();
    let pen = penalty(x.ncols(), lambda);
    let mean = t.sum() / n as f64;
    let mut beta = DVector::zeros(q);
    beta[0] = (mean / (1.0 - mean)).ln();
    let mut dev = penalized_deviance(&d, &t, &beta, lambda);

    for _ in 0..MAX_ITER {
        let eta = &d * &beta;
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-10));
        // Newton step on half the penalized deviance:
        // (D'WD + P) delta = D'(y - mu) - P beta
        let mut dw = d.clone();
        for (i, mut row) in dw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let hess = d.tr_mul(&dw) + &pen;
        let grad = d.tr_mul(&(&t - &mu)) - &pen * &beta;
        let delta = solve_spd(hess, &grad);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &beta + &delta * step;
            let cand_dev = penalized_deviance(&d, &t, &cand, lambda);
            if cand_dev.is_finite() && cand_dev <= dev + 1e-12 * dev.abs() {
                accepted = Some((cand, cand_dev));
                break;
            }
            step /= 2.0;
        }
        let Some((next, next_dev)) = accepted else { break };
        let moved = (&next - &beta).amax();
        let improved = dev - next_dev;
        beta = next;
        dev = next_dev;
        if moved < TOL || improved.abs() < TOL * (dev.abs() + TOL) {
            break;
        }
    }
    Linear {
        intercept: beta[0],
        coef: beta.iter().skip(1).copied().collect(),
        logistic: true,
    }
}
