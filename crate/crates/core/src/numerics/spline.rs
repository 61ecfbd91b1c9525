use crate::error::{Error, Result};

/// Behaviour outside the knot range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolation {
    /// Return the value at the nearest end knot.
    #[default]
    HoldEndpoint,
}

/// Boundary condition at one end of a cubic spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    /// Zero second derivative.
    Natural,
    /// Prescribed first derivative.
    Clamped(f64),
}

/// Piecewise-cubic C² interpolant stored as knot values plus second
/// derivatives at the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline1D {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    extrapolation: Extrapolation,
}

/// Natural cubic interpolant through `(knots, values)`.
pub fn spline_fit(knots: &[f64], values: &[f64], extrapolation: Extrapolation) -> Result<Spline1D> {
    Spline1D::with_end_conditions(
        knots,
        values,
        EndCondition::Natural,
        EndCondition::Natural,
        extrapolation,
    )
}

impl Spline1D {
    pub fn natural(knots: &[f64], values: &[f64]) -> Result<Self> {
        spline_fit(knots, values, Extrapolation::HoldEndpoint)
    }

    pub fn with_end_conditions(
        knots: &[f64],
        values: &[f64],
        start: EndCondition,
        end: EndCondition,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        let n = knots.len();
        if n < 2 {
            return Err(Error::Precondition(format!("spline needs at least 2 knots, got {n}")));
        }
        if values.len() != n {
            return Err(Error::Precondition(format!(
                "spline has {n} knots but {} values",
                values.len()
            )));
        }
        if knots.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spline data"));
        }
        if let Some(i) = (1..n).find(|&i| knots[i] <= knots[i - 1]) {
            return Err(Error::Precondition(format!(
                "spline knots must be strictly increasing (knot {} = {} after {})",
                i,
                knots[i],
                knots[i - 1]
            )));
        }

        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // Tridiagonal system sub[i]·M[i-1] + diag[i]·M[i] + sup[i]·M[i+1] = rhs[i].
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        match start {
            EndCondition::Natural => diag[0] = 1.0,
            EndCondition::Clamped(d) => {
                diag[0] = 2.0 * h[0];
                sup[0] = h[0];
                rhs[0] = 6.0 * (slope[0] - d);
            }
        }
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        match end {
            EndCondition::Natural => diag[n - 1] = 1.0,
            EndCondition::Clamped(d) => {
                sub[n - 1] = h[n - 2];
                diag[n - 1] = 2.0 * h[n - 2];
                rhs[n - 1] = 6.0 * (d - slope[n - 2]);
            }
        }
        let second = solve_tridiagonal(&sub, &diag, &sup, &rhs);

        Ok(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
            extrapolation,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    /// Second derivatives at the knots.
    pub fn knot_second_derivatives(&self) -> &[f64] {
        &self.second
    }

    fn segment(&self, x: f64) -> usize {
        let last = self.knots.len() - 2;
        self.knots.partition_point(|&k| k <= x).saturating_sub(1).min(last)
    }

    /// `None` when `x` is outside the knot range.
    fn locate(&self, x: f64) -> Option<(usize, f64, f64, f64)> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return None;
        }
        let i = self.segment(x);
        let h = self.knots[i + 1] - self.knots[i];
        Some((i, h, self.knots[i + 1] - x, x - self.knots[i]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, h, a, b)) => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                m0 * a * a * a / (6.0 * h)
                    + m1 * b * b * b / (6.0 * h)
                    + (y0 / h - m0 * h / 6.0) * a
                    + (y1 / h - m1 * h / 6.0) * b
            }
            None => match self.extrapolation {
                Extrapolation::HoldEndpoint => {
                    if x < self.knots[0] {
                        self.values[0]
                    } else {
                        self.values[self.values.len() - 1]
                    }
                }
            },
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, h, a, b)) => {
                let (m0, m1) = (self.second[i], self.second[i + 1]);
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) + (y1 - y0) / h - (m1 - m0) * h / 6.0
            }
            None => 0.0,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, h, a, b)) => (self.second[i] * a + self.second[i + 1] * b) / h,
            None => 0.0,
        }
    }
}

/// Thomas algorithm; the systems built above are diagonally dominant.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i < n - 1 { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
