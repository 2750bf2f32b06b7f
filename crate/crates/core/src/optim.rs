//! Unconstrained minimization on log-parameter vectors: BFGS and plain
//! gradient descent, both with Armijo backtracking line search.

use crate::error::{GpError, Result};
use crate::linalg::Matrix;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    QuasiNewton,
    GradientDescent,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimOptions<T> {
    pub max_iters: usize,
    /// Infinity-norm gradient threshold for convergence.
    pub grad_tol: T,
}

#[derive(Clone, Debug)]
pub struct OptimOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Objective value at the start point and after each accepted step.
    pub trace: Vec<T>,
    pub grad_norm: T,
    pub iters: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP_INF: f64 = 5.0;

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Minimizes `f`, which returns the objective value and its gradient.
///
/// Evaluation errors at trial points during line search are treated as
/// rejected steps; an error at the start point is fatal. A non-finite
/// gradient aborts with the offending parameter snapshot.
pub fn minimize<T, F>(
    method: Method,
    f: &mut F,
    x0: &[T],
    opts: OptimOptions<T>,
) -> Result<OptimOutcome<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut grad) = f(&x)?;
    check_finite(fx, &grad, &x)?;
    let mut trace = vec![fx];
    let mut h_inv = Matrix::<T>::identity(n);
    let mut iters = 0;
    let mut converged = false;

    while iters < opts.max_iters {
        let gnorm = inf_norm(&grad);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }

        let mut dir: Vec<T> = match method {
            Method::GradientDescent => grad.iter().map(|&g| -g).collect(),
            Method::QuasiNewton => {
                let d = h_inv.mul_vec(&grad).iter().map(|&v| -v).collect::<Vec<_>>();
                let descent = d.iter().zip(&grad).fold(T::zero(), |a, (&di, &gi)| a + di * gi);
                if descent < T::zero() {
                    d
                } else {
                    h_inv = Matrix::identity(n);
                    grad.iter().map(|&g| -g).collect()
                }
            }
        };

        // cap the step so log-parameters cannot jump by absurd amounts
        let dir_norm = inf_norm(&dir);
        if dir_norm > T::of(MAX_STEP_INF) {
            let s = T::of(MAX_STEP_INF) / dir_norm;
            for d in &mut dir {
                *d = *d * s;
            }
        }
        let mut accepted = backtrack(f, &x, fx, &dir, &grad);
        if accepted.is_none() && method == Method::QuasiNewton {
            // the quasi-Newton direction can be poorly scaled; retry once
            // along steepest descent with a fresh Hessian estimate
            h_inv = Matrix::identity(n);
            dir = grad.iter().map(|&g| -g).collect();
            accepted = backtrack(f, &x, fx, &dir, &grad);
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            // line search exhausted: current point is as good as we get
            break;
        };
        check_finite(f_new, &g_new, &x_new)?;

        if method == Method::QuasiNewton {
            let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let yv: Vec<T> = g_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
            let sy = s.iter().zip(&yv).fold(T::zero(), |a, (&si, &yi)| a + si * yi);
            let s_norm = inf_norm(&s);
            let y_norm = inf_norm(&yv);
            if sy > T::of(1e-10) * s_norm * y_norm {
                bfgs_update(&mut h_inv, &s, &yv, sy);
            }
        }

        x = x_new;
        fx = f_new;
        grad = g_new;
        trace.push(fx);
        iters += 1;
    }

    Ok(OptimOutcome {
        grad_norm: inf_norm(&grad),
        x,
        value: fx,
        trace,
        iters,
        converged,
    })
}

type Accepted<T> = Option<(Vec<T>, T, Vec<T>)>;

/// Armijo backtracking along `dir` from `x`; returns the first point
/// satisfying the sufficient-decrease condition, if any.
fn backtrack<T, F>(f: &mut F, x: &[T], fx: T, dir: &[T], grad: &[T]) -> Accepted<T>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let slope = dir.iter().zip(grad).fold(T::zero(), |a, (&d, &g)| a + d * g);
    let mut t = T::one();
    while t > T::of(MIN_STEP) {
        let xt: Vec<T> = x.iter().zip(dir).map(|(&xi, &di)| xi + t * di).collect();
        if let Ok((ft, gt)) = f(&xt) {
            if ft.is_finite() && ft <= fx + T::of(ARMIJO_C1) * t * slope {
                return Some((xt, ft, gt));
            }
        }
        t = t * T::of(BACKTRACK);
    }
    None
}

fn check_finite<T: Real>(fx: T, grad: &[T], x: &[T]) -> Result<()> {
    if !fx.is_finite() {
        return Err(GpError::NonFinite {
            what: "objective",
            params: x.iter().map(|v| v.as_f64()).collect(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(GpError::NonFinite {
            what: "gradient",
            params: x.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(())
}

/// H <- (I - rho s y') H (I - rho y s') + rho s s'
fn bfgs_update<T: Real>(h: &mut Matrix<T>, s: &[T], y: &[T], sy: T) {
    let n = s.len();
    let rho = T::one() / sy;
    let hy = h.mul_vec(y);
    let yhy = y.iter().zip(&hy).fold(T::zero(), |a, (&yi, &hyi)| a + yi * hyi);
    let c = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)] - rho * (s[i] * hy[j] + hy[i] * s[j]) + c * s[i] * s[j];
            h[(i, j)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        // f = (x0 - 3)^2 + 10 (x1 + 1)^2
        let f = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
        Ok((f, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)]))
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ];
        Ok((f, g))
    }

    #[test]
    fn bfgs_solves_quadratic() {
        let out = minimize(
            Method::QuasiNewton,
            &mut quadratic,
            &[0.0, 0.0],
            OptimOptions {
                max_iters: 100,
                grad_tol: 1e-10,
            },
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 3.0).abs() < 1e-8);
        assert!((out.x[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let out = minimize(
            Method::QuasiNewton,
            &mut rosenbrock,
            &[-1.2, 1.0],
            OptimOptions {
                max_iters: 500,
                grad_tol: 1e-8,
            },
        )
        .unwrap();
        assert!(out.converged, "grad norm {}", out.grad_norm);
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gradient_descent_decreases_monotonically() {
        let out = minimize(
            Method::GradientDescent,
            &mut quadratic,
            &[5.0, 5.0],
            OptimOptions {
                max_iters: 200,
                grad_tol: 1e-6,
            },
        )
        .unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!((out.x[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn zero_iteration_budget_leaves_point_unchanged() {
        let out = minimize(
            Method::QuasiNewton,
            &mut quadratic,
            &[2.0, 2.0],
            OptimOptions {
                max_iters: 0,
                grad_tol: 1e-12,
            },
        )
        .unwrap();
        assert_eq!(out.x, vec![2.0, 2.0]);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn errors_at_start_are_fatal() {
        let mut bad = |_x: &[f64]| -> Result<(f64, Vec<f64>)> {
            Err(GpError::SingularMatrix)
        };
        assert!(minimize(
            Method::QuasiNewton,
            &mut bad,
            &[0.0],
            OptimOptions {
                max_iters: 10,
                grad_tol: 1e-6
            }
        )
        .is_err());
    }

    #[test]
    fn non_finite_gradient_reports_snapshot() {
        let mut nan_grad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            Ok((x[0] * x[0], vec![f64::NAN]))
        };
        match minimize(
            Method::QuasiNewton,
            &mut nan_grad,
            &[2.0],
            OptimOptions {
                max_iters: 10,
                grad_tol: 1e-6,
            },
        ) {
            Err(GpError::NonFinite { what, params }) => {
                assert_eq!(what, "gradient");
                assert_eq!(params, vec![2.0]);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
