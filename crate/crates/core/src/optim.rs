//! BFGS maximization with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sup_norm;

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when `|grad|_inf <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Stall when a step moves no coordinate by more than this (relative).
    pub step_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-8, step_tol: 1e-12, armijo: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Maximizes `objective`, which returns the value and gradient or an error
/// for points outside the domain (treated as rejected steps).
///
/// `inv_hessian` seeds the approximation to the inverse of the negative
/// Hessian; the identity is used when absent.
pub fn maximize<F>(
    mut objective: F,
    x0: DVector<f64>,
    inv_hessian: Option<DMatrix<f64>>,
    opts: &BfgsOptions,
) -> Result<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let p = x0.len();
    let (mut f, mut g) = objective(&x0).map_err(|e| match e {
        Error::Evaluation(m) => Error::Evaluation(format!("at starting values: {m}")),
        other => other,
    })?;
    if !f.is_finite() {
        return Err(Error::Evaluation("non-finite objective at starting values".into()));
    }
    let mut x = x0;
    let fallback = || DMatrix::<f64>::identity(p, p);
    let mut h = inv_hessian.unwrap_or_else(fallback);
    let tol = |f: f64| opts.grad_tol * f.abs().max(1.0);
    let mut iterations = 0;
    let mut fresh = true;

    while iterations < opts.max_iter {
        if sup_norm(&g) <= tol(f) {
            break;
        }
        iterations += 1;
        // ascent direction for the maximization
        let mut d = &h * &g;
        let mut slope = g.dot(&d);
        if !(slope > 0.0) {
            h = fallback();
            fresh = true;
            d = g.clone();
            slope = g.dot(&d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = &x + step * &d;
            if let Ok((ft, gt)) = objective(&trial) {
                if ft.is_finite() {
                    let sufficient = ft >= f + opts.armijo * step * slope;
                    // near the optimum the decrease drowns in rounding; accept
                    // a non-worsening step that shrinks the gradient
                    let flat = (ft - f).abs() <= 4.0 * f64::EPSILON * f.abs().max(1.0) && sup_norm(&gt) < sup_norm(&g);
                    if sufficient || flat {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
            }
            step *= opts.shrink;
        }

        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            h = fallback();
            fresh = true;
            continue;
        };

        let s = &xn - &x;
        let y = &g - &gn; // gradient of the minimized objective -f changes by -(gn - g)
        let moved = s.iter().zip(x.iter()).any(|(si, xi)| si.abs() > opts.step_tol * (1.0 + xi.abs()));
        x = xn;
        f = fn_;
        g = gn;
        if !moved {
            break;
        }
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh && iterations == 1 && h == fallback() {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s y'H + H y s') + (rho^2 y'Hy + rho) s s'
            h -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
            fresh = false;
        }
    }

    let grad_norm = sup_norm(&g);
    Ok(BfgsOutcome { converged: grad_norm <= tol(f), x, value: f, gradient: g, iterations, grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concave_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let out = maximize(
            |x| Ok((-0.5 * x.dot(&(&a * x)) + b.dot(x), &b - &a * x)),
            DVector::zeros(2),
            None,
            &BfgsOptions::default(),
        )
        .unwrap();
        let exact = a.clone().try_inverse().unwrap() * &b;
        assert!(out.converged);
        assert!((out.x - exact).norm() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let out = maximize(
            |v| {
                let (x, y) = (v[0], v[1]);
                let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
                let g = DVector::from_vec(vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]);
                Ok((-f, -g))
            },
            DVector::from_vec(vec![-1.2, 1.0]),
            None,
            &BfgsOptions::default(),
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn domain_errors_are_rejected_steps() {
        // maximize ln x - x on x > 0 from far away
        let out = maximize(
            |v| {
                if v[0] <= 0.0 {
                    return Err(Error::Evaluation("x <= 0".into()));
                }
                Ok((v[0].ln() - v[0], DVector::from_vec(vec![1.0 / v[0] - 1.0])))
            },
            DVector::from_vec(vec![0.01]),
            None,
            &BfgsOptions::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = BfgsOptions { max_iter: 2, ..Default::default() };
        let out = maximize(
            |v| {
                let (x, y) = (v[0], v[1]);
                let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
                let g = DVector::from_vec(vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]);
                Ok((-f, -g))
            },
            DVector::from_vec(vec![-1.2, 1.0]),
            None,
            &opts,
        )
        .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
