//! Numerical kernels checked against independent implementations.

use nalgebra::{DMatrix, DVector, Matrix2x3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fbg_shape::numerics::{
    finite_difference_jacobian, integrate, least_squares, pinv_solve, EndCondition, Extrapolation, FnResiduals,
    FnResidualsWithJacobian, Residuals, RowSvd, Spline1D,
};

#[test]
fn pinv_matches_nalgebra_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let a = Matrix2x3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let b = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let ours = pinv_solve(&a, &b).unwrap();
        let theirs = a.pseudo_inverse(1e-14).unwrap() * b;
        assert!((ours - theirs).amax() < 1e-10, "{ours} vs {theirs}");
    }
}

#[test]
fn pinv_of_rank_one_matrix_matches_nalgebra() {
    let a = Matrix2x3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0);
    let b = Vector2::new(1.0, -1.0);
    let svd = RowSvd::new(&a).unwrap();
    assert_eq!(svd.rank(), 1);
    let theirs = a.pseudo_inverse(1e-12).unwrap() * b;
    assert!((svd.solve(&b) - theirs).amax() < 1e-12);
}

#[test]
fn pseudo_inverse_satisfies_penrose_conditions() {
    let a = Matrix2x3::new(-0.173, 0.115, 1.0, -0.162, -0.137, 1.0);
    let p = RowSvd::new(&a).unwrap().pseudo_inverse();
    assert!((a * p * a - a).amax() < 1e-12);
    assert!((p * a * p - p).amax() < 1e-12);
    assert!(((a * p).transpose() - a * p).amax() < 1e-12);
    assert!(((p * a).transpose() - p * a).amax() < 1e-12);
}

/// Natural spline second derivatives from the dense tridiagonal system.
fn dense_spline_second(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    m[(0, 0)] = 1.0;
    m[(n - 1, n - 1)] = 1.0;
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        m[(i, i - 1)] = h0 / 6.0;
        m[(i, i)] = (h0 + h1) / 3.0;
        m[(i, i + 1)] = h1 / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    m.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

#[test]
fn natural_spline_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 3..9 {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..35.0)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup_by(|a, b| (*a - *b).abs() < 0.5);
        if x.len() < 3 {
            continue;
        }
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-0.05..0.05)).collect();
        let s = Spline1D::natural(&x, &y).unwrap();
        let oracle = dense_spline_second(&x, &y);
        for (a, b) in s.knot_second_derivatives().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn clamped_spline_reproduces_cubic() {
    let f = |x: f64| 0.5 - x + 0.25 * x * x - 0.03 * x * x * x;
    let df = |x: f64| -1.0 + 0.5 * x - 0.09 * x * x;
    let x = [0.0, 1.3, 2.0, 3.7, 5.0];
    let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
    let s = Spline1D::with_end_conditions(
        &x,
        &y,
        EndCondition::Clamped(df(0.0)),
        EndCondition::Clamped(df(5.0)),
        Extrapolation::HoldEndpoint,
    )
    .unwrap();
    for i in 0..=50 {
        let t = i as f64 * 0.1;
        assert!((s.eval(t) - f(t)).abs() < 1e-12);
        assert!((s.derivative(t) - df(t)).abs() < 1e-11);
    }
}

#[test]
fn simpson_is_exact_for_cubics_and_converges() {
    let cubic = integrate(|x| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x, 0.0, 3.0, 0.7).unwrap();
    let exact = 3.0 + 4.5 - 18.0 + 0.125 * 81.0;
    assert!((cubic - exact).abs() < 1e-12);
    let coarse = (integrate(f64::sin, 0.0, 2.0, 0.2).unwrap() - (1.0 - 2f64.cos())).abs();
    let fine = (integrate(f64::sin, 0.0, 2.0, 0.1).unwrap() - (1.0 - 2f64.cos())).abs();
    // Fourth-order convergence.
    assert!(coarse / fine > 14.0 && coarse / fine < 18.0, "ratio {}", coarse / fine);
}

#[test]
fn rosenbrock_minimum() {
    let p = FnResiduals(|x: &[f64]| vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
    let rep = least_squares(&p, &[-1.2, 1.0], 1e-12).unwrap();
    assert!((rep.x[0] - 1.0).abs() < 1e-8 && (rep.x[1] - 1.0).abs() < 1e-8, "{:?}", rep.x);
}

#[test]
fn exponential_fit_recovers_parameters() {
    let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
    let y: Vec<f64> = t.iter().map(|&t| 2.5 * (-0.7 * t).exp()).collect();
    let t2 = t.clone();
    let p = FnResidualsWithJacobian(
        move |c: &[f64]| t.iter().zip(&y).map(|(t, y)| c[0] * (-c[1] * t).exp() - y).collect(),
        move |c: &[f64]| {
            DMatrix::from_fn(t2.len(), 2, |i, j| {
                let e = (-c[1] * t2[i]).exp();
                if j == 0 {
                    e
                } else {
                    -c[0] * t2[i] * e
                }
            })
        },
    );
    let rep = least_squares(&p, &[1.0, 0.1], 1e-12).unwrap();
    assert!((rep.x[0] - 2.5).abs() < 1e-9 && (rep.x[1] - 0.7).abs() < 1e-9);
}

#[test]
fn finite_difference_jacobian_matches_analytic() {
    let p = FnResiduals(|x: &[f64]| vec![x[0].sin() * x[1], x[0] * x[0] + x[1].exp(), x[1] / (1.0 + x[0] * x[0])]);
    let x = [0.3, -0.8];
    let j = finite_difference_jacobian(&p, &x);
    let d = 1.0 + x[0] * x[0];
    let analytic = DMatrix::from_row_slice(
        3,
        2,
        &[
            x[0].cos() * x[1],
            x[0].sin(),
            2.0 * x[0],
            x[1].exp(),
            -2.0 * x[0] * x[1] / (d * d),
            1.0 / d,
        ],
    );
    assert!((j - analytic).amax() < 1e-8);
    assert!(p.jacobian(&x).is_none());
}
