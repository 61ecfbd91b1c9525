use crate::error::{Error, Result};

/// Default quadrature step, mm.
pub const DEFAULT_STEP: f64 = 0.1;

/// Composite Simpson rule over `[a, b]` with an even number of panels no
/// wider than `step`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, step: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("quadrature step must be positive, got {step}")));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("quadrature bounds"));
    }
    if a > b {
        return Err(Error::Precondition(format!("quadrature bounds reversed: {a} > {b}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut n = ((b - a) / step).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;

    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("integrand"))
        }
    };
    let mut sum = eval(a)? + eval(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * eval(a + i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_integrand() {
        assert!((integrate(|_| 1.0, 0.0, 1.0, 0.1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_over_half_period() {
        let v = integrate(f64::sin, 0.0, PI, 0.01).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn constant_curvature_quarter_turn() {
        // A 90 degree jig spread over 35 mm.
        let kappa = 0.0449;
        let angle = integrate(|_| kappa, 0.0, 35.0, DEFAULT_STEP).unwrap();
        assert!((angle - 1.5715).abs() < 1e-12);
        assert!((angle.to_degrees() - 90.0).abs() < 0.05);
    }

    #[test]
    fn empty_interval_and_errors() {
        assert_eq!(integrate(|x| x, 2.0, 2.0, 0.1).unwrap(), 0.0);
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(integrate(|x| x, 1.0, 0.0, 0.1).is_err());
        assert!(matches!(
            integrate(|x| 1.0 / (x - 0.5), 0.0, 1.0, 0.25),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |x: f64| (3.0 * x).exp().sin();
        let exact = {
            // Reference at a very fine step.
            integrate(f, 0.0, 1.0, 1e-5).unwrap()
        };
        let e1 = (integrate(f, 0.0, 1.0, 0.02).unwrap() - exact).abs();
        let e2 = (integrate(f, 0.0, 1.0, 0.01).unwrap() - exact).abs();
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }
}
