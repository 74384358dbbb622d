//! Quasi-Newton maximization with numerical gradients.
//!
//! BFGS on the inverse Hessian with a backtracking Armijo line search and
//! central-difference gradients. Small and dependency-free; used for the
//! four-parameter structural-model likelihoods, where gradient evaluations
//! are cheap filter passes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Maximizes `f` starting from `x0`. Converges when the objective gain
/// drops below `tol`; errors if `max_iter` iterations are exhausted first.
pub(crate) fn maximize<F>(f: F, x0: &[f64], max_iter: usize, tol: f64) -> Result<Maximum>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut value = f(x.as_slice());
    if !value.is_finite() {
        return Err(Error::invalid("objective not finite at the starting point"));
    }
    let mut grad = gradient(&f, &x);
    let mut inv_hessian = DMatrix::identity(n, n);

    for _ in 0..max_iter {
        let mut direction = &inv_hessian * &grad;
        if direction.dot(&grad) <= 0.0 {
            // Curvature went bad; reset to steepest ascent.
            inv_hessian = DMatrix::identity(n, n);
            direction = grad.clone();
        }

        // Backtracking line search on the ascent direction.
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut new_x;
        let mut new_value;
        let mut improved = false;
        for _ in 0..40 {
            new_x = &x + step * &direction;
            new_value = f(new_x.as_slice());
            if new_value.is_finite() && new_value >= value + 1e-4 * step * slope {
                let gain = new_value - value;
                let new_grad = gradient(&f, &new_x);
                bfgs_update(&mut inv_hessian, &(&new_x - &x), &(&new_grad - &grad));
                x = new_x;
                value = new_value;
                grad = new_grad;
                improved = true;
                if gain.abs() < tol {
                    return Ok(Maximum {
                        x: x.as_slice().to_vec(),
                        value,
                    });
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            // No uphill step exists at line-search resolution.
            return Ok(Maximum {
                x: x.as_slice().to_vec(),
                value,
            });
        }
    }
    Err(Error::NoConvergence(max_iter))
}

fn gradient<F>(f: &F, x: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = 1e-5 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = f(probe.as_slice());
        probe[i] = x[i] - h;
        let down = f(probe.as_slice());
        probe[i] = x[i];
        g[i] = if up.is_finite() && down.is_finite() {
            (up - down) / (2.0 * h)
        } else {
            0.0
        };
    }
    g
}

fn bfgs_update(inv_hessian: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    // For maximization the curvature condition is sᵀy < 0; skip updates that
    // would destroy positive definiteness of the ascent metric.
    let sy = s.dot(y);
    if sy >= -1e-12 * s.norm() * y.norm() {
        return;
    }
    let rho = -1.0 / sy;
    let n = s.len();
    let identity = DMatrix::<f64>::identity(n, n);
    let left = &identity + rho * s * y.transpose();
    *inv_hessian = &left * &*inv_hessian * left.transpose() + rho * s * s.transpose();
}
