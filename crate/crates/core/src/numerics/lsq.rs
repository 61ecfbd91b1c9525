//! Damped Gauss–Newton (Levenberg–Marquardt) least squares.
//!
//! Every iteration first tries the undamped Gauss–Newton step, so linear
//! problems are solved in a single step. Damping is scaled by the diagonal
//! of `JᵀJ` (Marquardt column scaling).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;

const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e16;

/// A residual vector with an optional analytic Jacobian.
pub trait Residuals {
    fn residuals(&self, x: &[f64]) -> Vec<f64>;

    /// Analytic Jacobian (`m × n`); `None` selects central finite differences.
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// Adapts a closure to [`Residuals`].
pub struct FnResiduals<F>(pub F);

impl<F: Fn(&[f64]) -> Vec<f64>> Residuals for FnResiduals<F> {
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (self.0)(x)
    }
}

/// Closure residuals with a closure Jacobian.
pub struct FnResidualsWithJacobian<F, J>(pub F, pub J);

impl<F, J> Residuals for FnResidualsWithJacobian<F, J>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (self.0)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some((self.1)(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresReport {
    pub x: Vec<f64>,
    /// Euclidean norm of the residual vector at `x`.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Central-difference Jacobian.
pub fn finite_difference_jacobian<P: Residuals + ?Sized>(problem: &P, x: &[f64]) -> DMatrix<f64> {
    let m = problem.residuals(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = f64::EPSILON.cbrt() * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let rp = problem.residuals(&xp);
        xp[i] = x[i] - h;
        let rm = problem.residuals(&xp);
        xp[i] = x[i];
        for r in 0..m {
            jac[(r, i)] = (rp[r] - rm[r]) / (2.0 * h);
        }
    }
    jac
}

fn residual_vector<P: Residuals + ?Sized>(problem: &P, x: &[f64]) -> Result<DVector<f64>> {
    let r = problem.residuals(x);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares residual"));
    }
    Ok(DVector::from_vec(r))
}

/// Minimises `½‖r(x)‖²` starting from `x0`.
///
/// Converges when the accepted step is below `tol` (relative to `‖x‖`), the
/// relative cost decrease drops below `tol`, or the gradient vanishes.
pub fn least_squares<P: Residuals + ?Sized>(problem: &P, x0: &[f64], tol: f64) -> Result<LeastSquaresReport> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut r = residual_vector(problem, x.as_slice())?;
    let mut cost = 0.5 * r.norm_squared();
    let mut damping = 0.0;

    for iteration in 1..=MAX_ITERATIONS {
        let jac = problem
            .jacobian(x.as_slice())
            .unwrap_or_else(|| finite_difference_jacobian(problem, x.as_slice()));
        if jac.nrows() != r.len() || jac.ncols() != n {
            return Err(Error::Precondition(format!(
                "jacobian is {}x{}, expected {}x{}",
                jac.nrows(),
                jac.ncols(),
                r.len(),
                n
            )));
        }
        let grad = jac.transpose() * &r;
        let normal = jac.transpose() * &jac;
        let scale = normal.diagonal();

        if cost == 0.0 || grad.amax() <= f64::MIN_POSITIVE {
            return Ok(report(x, &r, iteration - 1));
        }

        loop {
            let mut lhs = normal.clone();
            for i in 0..n {
                lhs[(i, i)] += damping * scale[i];
            }
            let step = lhs.cholesky().map(|c| -c.solve(&grad));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                if damping >= MAX_DAMPING {
                    return Err(Error::SingularJacobian(
                        "normal equations stay singular under maximal damping".into(),
                    ));
                }
                damping = if damping == 0.0 { INITIAL_DAMPING } else { damping * 10.0 };
                continue;
            };

            let candidate = &x + &step;
            let r_new = residual_vector(problem, candidate.as_slice());
            let cost_new = r_new.as_ref().map(|r| 0.5 * r.norm_squared()).unwrap_or(f64::INFINITY);

            if cost_new < cost {
                let decrease = cost - cost_new;
                let small_step = step.norm() <= tol * (x.norm() + tol);
                x = candidate;
                r = r_new?;
                let old_cost = cost;
                cost = cost_new;
                damping = if damping <= INITIAL_DAMPING { 0.0 } else { damping / 10.0 };
                if small_step || decrease <= tol * old_cost || cost == 0.0 {
                    return Ok(report(x, &r, iteration));
                }
                break;
            }

            if step.norm() <= tol * (x.norm() + tol) {
                // No descent left at the resolution requested.
                return Ok(report(x, &r, iteration));
            }
            if damping >= MAX_DAMPING {
                return Ok(report(x, &r, iteration));
            }
            damping = if damping == 0.0 { INITIAL_DAMPING } else { damping * 10.0 };
        }
    }
    Err(Error::Divergence {
        iterations: MAX_ITERATIONS,
    })
}

fn report(x: DVector<f64>, r: &DVector<f64>, iterations: usize) -> LeastSquaresReport {
    LeastSquaresReport {
        x: x.as_slice().to_vec(),
        residual_norm: r.norm(),
        iterations,
    }
}
