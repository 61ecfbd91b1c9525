//! Numerical kernels: pseudo-inverse, cubic splines, quadrature and
//! nonlinear least squares.

mod lsq;
mod pinv;
mod quadrature;
mod spline;

pub use lsq::{
    finite_difference_jacobian, least_squares, FnResiduals, FnResidualsWithJacobian, LeastSquaresReport,
    Residuals, MAX_ITERATIONS,
};
pub use pinv::{pinv_solve, RowSvd, SV_CUTOFF};
pub use quadrature::{integrate, DEFAULT_STEP};
pub use spline::{spline_fit, EndCondition, Extrapolation, Spline1D};
