//! Moore–Penrose pseudo-inverse for the 2×3 active-area systems.
//!
//! The two rows are orthogonalised with a single one-sided Jacobi rotation,
//! which yields the SVD directly without forming `A·Aᵀ` (squaring the
//! condition number would make the singular-value cutoff meaningless).

use nalgebra::{Matrix2, Matrix2x3, Matrix3x2, Vector2, Vector3};

use crate::error::{Error, Result};

/// Relative singular-value cutoff.
pub const SV_CUTOFF: f64 = 1e-12;

/// Thin SVD of a 2×3 matrix in the form `A = Gᵀ·W`, where `G` is a plane
/// rotation and the rows of `W` are mutually orthogonal (`wᵢ = σᵢ·vᵢᵀ`).
#[derive(Debug, Clone, Copy)]
pub struct RowSvd {
    rotation: Matrix2<f64>,
    rows: [Vector3<f64>; 2],
    sigma: [f64; 2],
}

impl RowSvd {
    pub fn new(a: &Matrix2x3<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pseudo-inverse input matrix"));
        }
        let r0: Vector3<f64> = a.row(0).transpose();
        let r1: Vector3<f64> = a.row(1).transpose();
        let alpha = r0.dot(&r0);
        let beta = r1.dot(&r1);
        let gamma = r0.dot(&r1);

        let (c, s) = if gamma == 0.0 {
            (1.0, 0.0)
        } else {
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            (c, c * t)
        };
        let w0 = r0 * c - r1 * s;
        let w1 = r0 * s + r1 * c;
        Ok(Self {
            rotation: Matrix2::new(c, -s, s, c),
            sigma: [w0.norm(), w1.norm()],
            rows: [w0, w1],
        })
    }

    /// Singular values (unsorted).
    pub fn singular_values(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn rank(&self) -> usize {
        let cutoff = SV_CUTOFF * self.sigma[0].max(self.sigma[1]);
        self.sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count()
    }

    /// `A†·rhs`.
    pub fn solve(&self, rhs: &Vector2<f64>) -> Vector3<f64> {
        let g = self.rotation * rhs;
        let cutoff = SV_CUTOFF * self.sigma[0].max(self.sigma[1]);
        let mut x = Vector3::zeros();
        for i in 0..2 {
            let s = self.sigma[i];
            if s > cutoff && s > 0.0 {
                x += self.rows[i] * (g[i] / (s * s));
            }
        }
        x
    }

    pub fn pseudo_inverse(&self) -> Matrix3x2<f64> {
        let e0 = self.solve(&Vector2::new(1.0, 0.0));
        let e1 = self.solve(&Vector2::new(0.0, 1.0));
        Matrix3x2::from_columns(&[e0, e1])
    }
}

/// Minimum-norm least-squares solution `A†·rhs`.
pub fn pinv_solve(a: &Matrix2x3<f64>, rhs: &Vector2<f64>) -> Result<Vector3<f64>> {
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pseudo-inverse right-hand side"));
    }
    Ok(RowSvd::new(a)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_block() {
        let a = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let x = pinv_solve(&a, &Vector2::new(3.0, 4.0)).unwrap();
        assert_eq!(x, Vector3::new(3.0, 4.0, 0.0));
    }

    #[test]
    fn duplicate_rows_are_rank_one() {
        let a = Matrix2x3::new(1.0, 2.0, 3.0, 1.0, 2.0, 3.0);
        let svd = RowSvd::new(&a).unwrap();
        assert_eq!(svd.rank(), 1);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let x = pinv_solve(&Matrix2x3::zeros(), &Vector2::new(1.0, 1.0)).unwrap();
        assert_eq!(x, Vector3::zeros());
    }

    #[test]
    fn non_finite_is_rejected() {
        let a = Matrix2x3::new(f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert!(pinv_solve(&a, &Vector2::new(1.0, 1.0)).is_err());
        let a = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert!(pinv_solve(&a, &Vector2::new(f64::INFINITY, 1.0)).is_err());
    }
}
