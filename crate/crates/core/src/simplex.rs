//! Least squares over the probability simplex.
//!
//! Minimizes `||Z a - y||^2` subject to `a >= 0` and `sum(a) = 1` with a
//! Lawson-Hanson style active-set method: the passive set starts at the best
//! single column, grows by the column with the most negative reduced
//! gradient, and shrinks by interpolating back to feasibility whenever the
//! equality-constrained subproblem leaves the non-negative orthant. Every
//! accepted step lowers the objective, so the result is never worse than any
//! single column.

use nalgebra::{DMatrix, DVector};

/// Mean squared residual of the combination `weights` of the columns of `z`.
pub fn simplex_risk(z: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> f64 {
    let n = z.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut sse = 0.0;
    for i in 0..n {
        let pred: f64 = weights.iter().enumerate().map(|(l, w)| w * z[(i, l)]).sum();
        sse += (pred - y[i]) * (pred - y[i]);
    }
    sse / n as f64
}

fn vertex(l: usize, j: usize) -> Vec<f64> {
    let mut a = vec![0.0; l];
    a[j] = 1.0;
    a
}

/// Minimizer over the affine hull `sum(s) = 1` of the columns in `passive`.
/// Returns weights aligned with `passive`; degenerate directions get the
/// minimum-norm solution.
fn affine_least_squares(z: &DMatrix<f64>, y: &DVector<f64>, passive: &[usize]) -> Vec<f64> {
    let base = passive[0];
    if passive.len() == 1 {
        return vec![1.0];
    }
    let n = z.nrows();
    let k = passive.len() - 1;
    let a = DMatrix::from_fn(n, k, |i, j| z[(i, passive[j + 1])] - z[(i, base)]);
    let b = DVector::from_fn(n, |i, _| y[i] - z[(i, base)]);
    let eps = 1e-12 * a.amax().max(1.0);
    let u = a
        .svd(true, true)
        .solve(&b, eps)
        .unwrap_or_else(|_| DVector::zeros(k));
    let mut s = Vec::with_capacity(passive.len());
    s.push(1.0 - u.sum());
    s.extend(u.iter().copied());
    s
}

/// Simplex weights minimizing the squared error of `z a` against `y`.
///
/// All-zero `z` makes every weighting equivalent; the uniform one is
/// returned.
pub fn solve_simplex_weights(z: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (n, l) = z.shape();
    assert_eq!(n, y.len(), "level-one rows and targets differ");
    if l == 0 {
        return Vec::new();
    }
    if z.iter().all(|&v| v == 0.0) || n == 0 {
        return vec![1.0 / l as f64; l];
    }
    let yv = DVector::from_column_slice(y);
    let vertex_risk: Vec<f64> = (0..l).map(|j| simplex_risk(z, y, &vertex(l, j))).collect();
    let best_vertex = (0..l)
        .min_by(|&a, &b| vertex_risk[a].total_cmp(&vertex_risk[b]).then(a.cmp(&b)))
        .unwrap();

    let h = z.tr_mul(z);
    let c = z.tr_mul(&yv);
    let tol = 1e-11 * (1.0 + c.amax() + h.amax());

    let mut alpha = vertex(l, best_vertex);
    let mut passive = vec![best_vertex];
    for _ in 0..(10 * l + 50) {
        // Reduced gradient relative to the passive set's average.
        let a = DVector::from_column_slice(&alpha);
        let g = &h * &a - &c;
        let g_p = passive.iter().map(|&j| g[j]).sum::<f64>() / passive.len() as f64;
        let entering = (0..l)
            .filter(|j| !passive.contains(j))
            .map(|j| (j, g[j] - g_p))
            .filter(|&(_, r)| r < -tol)
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let Some((j, _)) = entering else { break };
        passive.push(j);

        // Inner loop: restore feasibility by dropping columns that go negative.
        loop {
            let s = affine_least_squares(z, &yv, &passive);
            if s.iter().all(|&v| v > 0.0) {
                for (k, &p) in passive.iter().enumerate() {
                    alpha[p] = s[k];
                }
                break;
            }
            let mut t = 1.0f64;
            for (k, &p) in passive.iter().enumerate() {
                if s[k] <= 0.0 {
                    let denom = alpha[p] - s[k];
                    if denom > 0.0 {
                        t = t.min(alpha[p] / denom);
                    }
                }
            }
            for (k, &p) in passive.iter().enumerate() {
                alpha[p] += t * (s[k] - alpha[p]);
            }
            let before = passive.len();
            passive.retain(|&p| alpha[p] > 1e-14);
            for (p, a) in alpha.iter_mut().enumerate() {
                if !passive.contains(&p) {
                    *a = 0.0;
                }
            }
            if passive.is_empty() {
                alpha = vertex(l, best_vertex);
                passive = vec![best_vertex];
                break;
            }
            if passive.len() == before {
                // No column left the set; drop the smallest to guarantee progress.
                let (k, _) = passive
                    .iter()
                    .enumerate()
                    .min_by(|a, b| alpha[*a.1].total_cmp(&alpha[*b.1]))
                    .unwrap();
                let p = passive.remove(k);
                alpha[p] = 0.0;
            }
        }
        // Renormalize away rounding drift.
        let total: f64 = alpha.iter().sum();
        alpha.iter_mut().for_each(|a| *a /= total);
    }

    for a in alpha.iter_mut() {
        if *a < 0.0 {
            *a = 0.0;
        }
    }
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    if simplex_risk(z, y, &alpha) > vertex_risk[best_vertex] {
        return vertex(l, best_vertex);
    }
    alpha
}
