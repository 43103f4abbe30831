use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    None,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus `lambda/2 · |w|²` over the non-intercept weights, and
/// its gradient. `params` is `[w.., b]`.
pub fn loss_and_gradient(params: &[f64], x: &Matrix, y: &[u8], lambda: f64) -> (f64, Vec<f64>) {
    let p = x.n_cols();
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for r in 0..x.n_rows() {
        let row = x.row(r);
        let z = row.iter().zip(params).map(|(a, b)| a * b).sum::<f64>() + params[p];
        let yi = y[r] as f64;
        loss += softplus(z) - yi * z;
        let e = sigmoid(z) - yi;
        for (g, a) in grad.iter_mut().zip(row) {
            *g += e * a;
        }
        grad[p] += e;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for j in 0..p {
        loss += 0.5 * lambda * params[j] * params[j];
        grad[j] += lambda * params[j];
    }
    (loss, grad)
}

impl Logistic {
    /// Damped Newton on the penalized mean log-loss; `lambda = 1/(C·n)` for
    /// L2 so that `C` matches the usual summed-loss convention.
    pub fn fit(x: &Matrix, y: &[u8], penalty: Penalty, c: f64, max_iter: usize, tol: f64) -> Result<Logistic> {
        let n = x.n_rows();
        if n == 0 || y.len() != n {
            return Err(Error::Training("logistic regression needs matching, non-empty data".into()));
        }
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::Training("training labels contain a single class".into()));
        }
        let lambda = match penalty {
            Penalty::None => 0.0,
            Penalty::L2 if c > 0.0 => 1.0 / (c * n as f64),
            Penalty::L2 => return Err(Error::Training(format!("inverse strength C must be positive, got {c}"))),
        };
        let p = x.n_cols();
        let mut params = vec![0.0; p + 1];
        let (mut loss, mut grad) = loss_and_gradient(&params, x, y, lambda);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            if norm(&grad) < tol {
                converged = true;
                break;
            }
            iterations += 1;
            let h = hessian(&params, x, lambda);
            let g = DVector::from_column_slice(&grad);
            let step = solve_damped(h, &g);
            // Backtracking line search along the Newton direction.
            let slope: f64 = -g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
                let (l, gr) = loss_and_gradient(&trial, x, y, lambda);
                if l <= loss + 1e-4 * t * slope {
                    params = trial;
                    loss = l;
                    grad = gr;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !converged && norm(&grad) < tol {
            converged = true;
        }
        Ok(Logistic {
            intercept: params[p],
            weights: params[..p].to_vec(),
            iterations,
            converged,
        })
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn hessian(params: &[f64], x: &Matrix, lambda: f64) -> DMatrix<f64> {
    let p = x.n_cols();
    let n = x.n_rows() as f64;
    let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut aug = vec![1.0; p + 1];
    for r in 0..x.n_rows() {
        let row = x.row(r);
        aug[..p].copy_from_slice(row);
        let z = row.iter().zip(params).map(|(a, b)| a * b).sum::<f64>() + params[p];
        let s = sigmoid(z);
        let w = s * (1.0 - s) / n;
        if w == 0.0 {
            continue;
        }
        for i in 0..=p {
            let wi = w * aug[i];
            if wi == 0.0 {
                continue;
            }
            for j in i..=p {
                h[(i, j)] += wi * aug[j];
            }
        }
    }
    for i in 0..=p {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
        if i < p {
            h[(i, i)] += lambda;
        }
    }
    h
}

/// Solves `h·s = g`, adding ridge damping until the factorization succeeds;
/// one-hot blocks make the unpenalized Hessian singular.
fn solve_damped(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let mut damping = 1e-10;
    loop {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += damping;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(g);
        }
        damping *= 100.0;
        if damping > 1e6 {
            return g.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separable_points_are_fit_exactly() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![3.0, 3.0], vec![4.0, 2.5]]);
        let y = [0, 0, 1, 1];
        let m = Logistic::fit(&x, &y, Penalty::None, 1.0, 100, 1e-8).unwrap();
        for r in 0..4 {
            assert_eq!((m.score(x.row(r)) >= 0.5) as u8, y[r]);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = crate::rng::seeded(3);
        for _ in 0..20 {
            let n = r.random_range(3..12);
            let p = r.random_range(1..5);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
            let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
            let x = Matrix::from_rows(&rows);
            let params: Vec<f64> = (0..=p).map(|_| r.random_range(-1.0..1.0)).collect();
            let lambda = r.random_range(0.0..0.5);
            let (_, g) = loss_and_gradient(&params, &x, &y, lambda);
            for j in 0..=p {
                let h = 1e-6;
                let mut a = params.clone();
                let mut b = params.clone();
                a[j] += h;
                b[j] -= h;
                let fd = (loss_and_gradient(&a, &x, &y, lambda).0 - loss_and_gradient(&b, &x, &y, lambda).0) / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-3);
                assert!(rel < 1e-5, "component {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn ridge_shrinks_weights() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![-0.5], vec![0.5], vec![1.0], vec![0.2], vec![-0.2]]);
        let y = [0, 0, 1, 1, 0, 1];
        let strong = Logistic::fit(&x, &y, Penalty::L2, 0.01, 100, 1e-10).unwrap();
        let weak = Logistic::fit(&x, &y, Penalty::L2, 10.0, 100, 1e-10).unwrap();
        assert!(strong.weights[0].abs() < weak.weights[0].abs());
        assert!(strong.converged && weak.converged);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(Logistic::fit(&x, &[1, 1], Penalty::None, 1.0, 10, 1e-6), Err(Error::Training(_))));
    }
}
