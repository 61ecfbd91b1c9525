//! Calibration: node geometry, friction coefficients and twist offsets,
//! plus held-out validation statistics.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::domain::{wrap_angle, CalibrationSet, Fiber, SensorGeometry, WavelengthFrame, ACTIVE_AREAS};
use crate::error::{Error, Result};
use crate::numerics::{least_squares, FnResiduals, FnResidualsWithJacobian};
use crate::reconstruct::signed_planar;
use crate::sensing::{self, AaSolution, Bend, Deflection};

/// Smallest groove curvature at which the bending direction is trusted.
pub const MIN_TWIST_KAPPA: f64 = 0.005;
const FIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub frame: WavelengthFrame,
    /// Sensor-path curvature magnitude and bending direction per active area.
    pub truth: [Bend; ACTIVE_AREAS],
    pub deflection: Deflection,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationDataset {
    pub samples: Vec<CalibrationSample>,
}

impl CalibrationDataset {
    pub fn new(samples: Vec<CalibrationSample>) -> Result<Self> {
        let ds = Self { samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.truth.iter().any(|b| !(b.kappa.is_finite() && b.phi.is_finite()) || b.kappa < 0.0) {
                return Err(Error::invariant(
                    format!("samples[{i}].truth"),
                    "curvature must be finite and >= 0, direction finite",
                ));
            }
            if s.frame.lambda.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::invariant(format!("samples[{i}].frame"), "wavelengths must be finite"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, sign: Deflection) -> usize {
        self.samples.iter().filter(|s| s.deflection == sign).count()
    }

    pub fn extend(&mut self, other: CalibrationDataset) {
        self.samples.extend(other.samples);
    }
}

/// Inverse model used to predict `(κ, φ)` from a frame during the geometry fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseModel {
    /// Minimum-norm solve with the lumped thermal term, as in reconstruction.
    #[default]
    Lumped,
    /// Exact 2×2 solve assuming no temperature change since the reference.
    Isothermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// Independent `(r, θ)` for each node.
    #[default]
    PerFiber,
    /// One `θ` per active area shared by both fibres.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GeometryFitOptions {
    pub model: InverseModel,
    pub theta_mode: ThetaMode,
}

impl GeometryFitOptions {
    pub fn describe(&self) -> String {
        let model = match self.model {
            InverseModel::Lumped => "lumped",
            InverseModel::Isothermal => "isothermal",
        };
        let theta = match self.theta_mode {
            ThetaMode::PerFiber => "per-fiber",
            ThetaMode::Shared => "shared-theta",
        };
        format!("{model}, {theta}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFit {
    pub geometry: SensorGeometry,
    /// Weighted residual norm per active area.
    pub residual_norm: [f64; ACTIVE_AREAS],
    pub iterations: [usize; ACTIVE_AREAS],
    pub options: GeometryFitOptions,
}

fn predict(model: InverseModel, geometry: &SensorGeometry, frame: &WavelengthFrame, aa: usize) -> Result<AaSolution> {
    match model {
        InverseModel::Lumped => sensing::solve_aa(geometry, frame, aa),
        InverseModel::Isothermal => sensing::solve_aa_isothermal(geometry, frame, aa),
    }
}

fn apply_params(geometry: &mut SensorGeometry, aa: usize, mode: ThetaMode, p: &[f64]) {
    match mode {
        ThetaMode::PerFiber => {
            geometry.node_mut(Fiber::One, aa).r = p[0];
            geometry.node_mut(Fiber::One, aa).theta = p[1];
            geometry.node_mut(Fiber::Two, aa).r = p[2];
            geometry.node_mut(Fiber::Two, aa).theta = p[3];
        }
        ThetaMode::Shared => {
            geometry.node_mut(Fiber::One, aa).r = p[0];
            geometry.node_mut(Fiber::Two, aa).r = p[1];
            geometry.node_mut(Fiber::One, aa).theta = p[2];
            geometry.node_mut(Fiber::Two, aa).theta = p[2];
        }
    }
}

fn initial_params(geometry: &SensorGeometry, aa: usize, mode: ThetaMode) -> Vec<f64> {
    let n1 = geometry.node(Fiber::One, aa);
    let n2 = geometry.node(Fiber::Two, aa);
    match mode {
        ThetaMode::PerFiber => vec![n1.r, n1.theta, n2.r, n2.theta],
        ThetaMode::Shared => vec![n1.r, n2.r, 0.5 * (n1.theta + n2.theta)],
    }
}

/// Weighted `(κ, φ)` residuals of one active area. Direction residuals are
/// dropped for straight samples, where the direction is undefined.
fn geometry_residuals(
    dataset: &CalibrationDataset,
    base: &SensorGeometry,
    aa: usize,
    options: GeometryFitOptions,
    kappa_scale: f64,
    p: &[f64],
) -> Vec<f64> {
    let mut g = base.clone();
    apply_params(&mut g, aa, options.theta_mode, p);
    let mut out = Vec::with_capacity(2 * dataset.len());
    for s in &dataset.samples {
        let truth = s.truth[aa];
        match predict(options.model, &g, &s.frame, aa) {
            Ok(sol) => {
                out.push((sol.kappa - truth.kappa) / kappa_scale);
                if truth.kappa > 0.0 {
                    out.push(wrap_angle(sol.phi - truth.phi) / PI);
                }
            }
            Err(_) => {
                out.push(f64::NAN);
                if truth.kappa > 0.0 {
                    out.push(f64::NAN);
                }
            }
        }
    }
    out
}

/// Least-squares fit of node positions `r` and orientations `θ` against
/// known curvature and direction, one active area at a time. The neutral
/// axis and reference wavelengths are taken from `initial`.
pub fn fit_node_geometry(
    dataset: &CalibrationDataset,
    initial: &SensorGeometry,
    options: GeometryFitOptions,
) -> Result<GeometryFit> {
    dataset.validate()?;
    let mut distinct: Vec<f64> = dataset.samples.iter().map(|s| s.truth[0].kappa).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if distinct.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "geometry fit needs at least 4 distinct curvatures, got {}",
            distinct.len()
        )));
    }
    let kappa_scale = dataset
        .samples
        .iter()
        .flat_map(|s| s.truth.iter().map(|b| b.kappa))
        .fold(0.0, f64::max);
    if !(kappa_scale > 0.0) {
        return Err(Error::InsufficientData(
            "every sample is straight; node geometry is unobservable".into(),
        ));
    }

    let mut geometry = initial.clone();
    let mut residual_norm = [0.0; ACTIVE_AREAS];
    let mut iterations = [0; ACTIVE_AREAS];
    for aa in 0..ACTIVE_AREAS {
        if dataset.samples.iter().all(|s| s.truth[aa].kappa == 0.0) {
            return Err(Error::InsufficientData(format!(
                "active area {} is never bent; its nodes are unobservable",
                aa + 1
            )));
        }
        let problem = FnResiduals(|p: &[f64]| geometry_residuals(dataset, initial, aa, options, kappa_scale, p));
        let x0 = initial_params(initial, aa, options.theta_mode);
        let report = least_squares(&problem, &x0, FIT_TOLERANCE)?;
        apply_params(&mut geometry, aa, options.theta_mode, &report.x);
        residual_norm[aa] = report.residual_norm;
        iterations[aa] = report.iterations;
    }
    geometry
        .validate()
        .map_err(|e| Error::Geometry(format!("fitted geometry is not physical: {e}")))?;
    Ok(GeometryFit {
        geometry,
        residual_norm,
        iterations,
        options,
    })
}

/// Weighted residual norm of `geometry` on `dataset`, comparable with
/// [`GeometryFit::residual_norm`].
pub fn geometry_residual_norm(
    dataset: &CalibrationDataset,
    geometry: &SensorGeometry,
    options: GeometryFitOptions,
    aa: usize,
) -> f64 {
    let kappa_scale = dataset
        .samples
        .iter()
        .flat_map(|s| s.truth.iter().map(|b| b.kappa))
        .fold(0.0, f64::max);
    let p = initial_params(geometry, aa, options.theta_mode);
    geometry_residuals(dataset, geometry, aa, options, kappa_scale, &p)
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

/// Node geometry laid out as the usual position/orientation table.
pub fn format_geometry_table(geometry: &SensorGeometry) -> String {
    let mut out = String::new();
    out.push_str("fiber  r_k1 (mm)  r_k2 (mm)  r_k3 (mm)  theta_k1 (deg)  theta_k2 (deg)  theta_k3 (deg)\n");
    for fiber in Fiber::ALL {
        let n = |j| geometry.node(fiber, j);
        out.push_str(&format!(
            "{:<5}  {:>9.3}  {:>9.3}  {:>9.3}  {:>14.3}  {:>14.3}  {:>14.3}\n",
            fiber.number(),
            n(0).r,
            n(1).r,
            n(2).r,
            n(0).theta.to_degrees(),
            n(1).theta.to_degrees(),
            n(2).theta.to_degrees()
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionFit {
    /// `None` when the dataset has fewer than two samples of that sign.
    pub c_pos: Option<[f64; ACTIVE_AREAS]>,
    pub c_neg: Option<[f64; ACTIVE_AREAS]>,
}

/// Per-sign, per-active-area coefficients `C` minimising `Σ (C·κ′ − κ)²`.
pub fn fit_friction_coeffs(dataset: &CalibrationDataset, geometry: &SensorGeometry) -> Result<FrictionFit> {
    dataset.validate()?;
    let mut measured: Vec<(Deflection, [f64; ACTIVE_AREAS], [f64; ACTIVE_AREAS])> = Vec::new();
    for s in &dataset.samples {
        let raw = sensing::solve_all(geometry, &s.frame)?;
        measured.push((
            s.deflection,
            std::array::from_fn(|j| raw[j].kappa),
            std::array::from_fn(|j| s.truth[j].kappa),
        ));
    }
    let fit_sign = |sign: Deflection| -> Result<Option<[f64; ACTIVE_AREAS]>> {
        let rows: Vec<_> = measured.iter().filter(|m| m.0 == sign).collect();
        if rows.len() < 2 {
            return Ok(None);
        }
        let mut c = [0.0; ACTIVE_AREAS];
        for (j, cj) in c.iter_mut().enumerate() {
            let obs: Vec<f64> = rows.iter().map(|m| m.1[j]).collect();
            let truth: Vec<f64> = rows.iter().map(|m| m.2[j]).collect();
            if obs.iter().all(|&k| k == 0.0) {
                return Err(Error::InsufficientData(format!(
                    "no {} curvature observed at active area {}",
                    sign.as_str(),
                    j + 1
                )));
            }
            let n = obs.len();
            let problem = FnResidualsWithJacobian(
                |x: &[f64]| obs.iter().zip(&truth).map(|(o, t)| x[0] * o - t).collect(),
                |_: &[f64]| DMatrix::from_fn(n, 1, |i, _| obs[i]),
            );
            *cj = least_squares(&problem, &[1.0], FIT_TOLERANCE)?.x[0];
        }
        Ok(Some(c))
    };
    Ok(FrictionFit {
        c_pos: fit_sign(Deflection::Positive)?,
        c_neg: fit_sign(Deflection::Negative)?,
    })
}

/// Twist offsets from a straight reference frame and a frame taken in a
/// groove of known curvature lying in the nominal bending plane.
///
/// The straight frame re-zeros the reference wavelengths, so the groove
/// frame is solved without a thermal term.
pub fn measure_twist(
    straight_frame: &WavelengthFrame,
    groove_frame: &WavelengthFrame,
    groove_kappa: f64,
    geometry: &SensorGeometry,
) -> Result<[f64; ACTIVE_AREAS]> {
    if !(groove_kappa.abs() >= MIN_TWIST_KAPPA) {
        return Err(Error::Precondition(format!(
            "groove curvature {groove_kappa} mm^-1 is below {MIN_TWIST_KAPPA}; bending direction is ill-conditioned"
        )));
    }
    let zeroed = geometry.with_reference(straight_frame);
    let mut twist = [0.0; ACTIVE_AREAS];
    for (j, t) in twist.iter_mut().enumerate() {
        let sol = sensing::solve_aa_isothermal(&zeroed, groove_frame, j)?;
        if sol.kappa < 0.5 * MIN_TWIST_KAPPA {
            return Err(Error::Precondition(format!(
                "active area {} shows curvature {} in the groove; check the frames",
                j + 1,
                sol.kappa
            )));
        }
        *t = signed_planar(&Bend {
            kappa: sol.kappa,
            phi: sol.phi,
        })
        .1;
    }
    Ok(twist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
            count: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignStats {
    /// Absolute curvature error, 1/mm.
    pub curvature: ErrorStats,
    /// Absolute direction error, rad.
    pub direction: ErrorStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub overall: SignStats,
    pub positive: SignStats,
    pub negative: SignStats,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, name: &str, s: &SignStats| {
            writeln!(
                f,
                "{name:<9} n={:<4} curvature {:.3e} ± {:.3e} mm^-1   direction {:.3} ± {:.3} deg",
                s.curvature.count,
                s.curvature.mean,
                s.curvature.std,
                s.direction.mean.to_degrees(),
                s.direction.std.to_degrees()
            )
        };
        line(f, "positive", &self.positive)?;
        line(f, "negative", &self.negative)?;
        line(f, "all", &self.overall)
    }
}

/// Absolute curvature and direction errors of the compensated estimates
/// against the dataset truth, per active area and sample.
pub fn validate(dataset: &CalibrationDataset, calib: &CalibrationSet, deadband: f64) -> Result<ValidationReport> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("validation dataset is empty".into()));
    }
    dataset.validate()?;
    let mut kappa_err: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut phi_err: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for s in &dataset.samples {
        let est = sensing::estimate(&s.frame, calib, deadband)?;
        let bucket = match s.deflection {
            Deflection::Negative => 1,
            _ => 0,
        };
        for j in 0..ACTIVE_AREAS {
            let truth = s.truth[j];
            let got = est[j].compensated;
            kappa_err[bucket].push((got.kappa - truth.kappa).abs());
            if truth.kappa > 0.0 {
                phi_err[bucket].push(wrap_angle(got.phi - truth.phi).abs());
            }
        }
    }
    let stats = |k: &[f64], p: &[f64]| SignStats {
        curvature: ErrorStats::from_values(k),
        direction: ErrorStats::from_values(p),
    };
    let all_k: Vec<f64> = kappa_err.iter().flatten().copied().collect();
    let all_p: Vec<f64> = phi_err.iter().flatten().copied().collect();
    Ok(ValidationReport {
        overall: stats(&all_k, &all_p),
        positive: stats(&kappa_err[0], &phi_err[0]),
        negative: stats(&kappa_err[1], &phi_err[1]),
    })
}
