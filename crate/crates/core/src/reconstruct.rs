//! Centerline reconstruction.
//!
//! The sensor centerline is integrated in the distal frame (origin at the
//! distal tip, `+y` pointing proximally, `x` towards fibre 1). The active
//! areas are then carried across the lateral offset onto the manipulator
//! centerline, their arc positions re-measured from the proximal end, and
//! the manipulator centerline integrated from the proximal frame.
//!
//! Curvature is signed in the bending plane: positive deflection bends the
//! manipulator towards `+x` of the proximal frame, with the sensor on the
//! inside of the bend.

use crate::domain::{wrap_angle, CalibrationSet, CdmConfig, WavelengthFrame, ACTIVE_AREAS};
use crate::error::{Error, Result, Stage, StageExt};
use crate::numerics::{integrate, EndCondition, Extrapolation, Spline1D};
use crate::sensing::{self, AaEstimate, Bend};

/// Largest residual out-of-plane direction accepted after compensation.
pub const MAX_OUT_OF_PLANE: f64 = 10.0 * std::f64::consts::PI / 180.0;
/// Below this curvature the bending direction is noise and is not checked.
pub const PLANAR_CHECK_MIN_KAPPA: f64 = 1e-4;

/// Smooth curvature and bending direction along an arc.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    kappa: Spline1D,
    phi: Spline1D,
    s_max: f64,
}

impl CurvatureProfile {
    /// Natural cubic interpolants through `(s, kappa, phi)` knots, held
    /// constant outside the knot range. `s_max` bounds the domain.
    pub fn new(s: &[f64], kappa: &[f64], phi: &[f64], s_max: f64) -> Result<Self> {
        if !(s_max.is_finite() && s_max > 0.0) {
            return Err(Error::Precondition(format!("profile length {s_max} must be positive")));
        }
        if s.iter().any(|&v| v < 0.0 || v > s_max) {
            return Err(Error::Precondition(format!("profile knots must lie in [0, {s_max}]")));
        }
        Ok(Self {
            kappa: Spline1D::natural(s, kappa)?,
            phi: Spline1D::natural(s, phi)?,
            s_max,
        })
    }

    pub fn knots(&self) -> &[f64] {
        self.kappa.knots()
    }

    pub fn kappa_knots(&self) -> &[f64] {
        self.kappa.values()
    }

    pub fn phi_knots(&self) -> &[f64] {
        self.phi.values()
    }

    pub fn domain(&self) -> (f64, f64) {
        (0.0, self.s_max)
    }

    pub fn kappa(&self, s: f64) -> f64 {
        self.kappa.eval(s)
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.phi.eval(s)
    }

    /// The same profile with every curvature knot negated.
    pub fn mirrored(&self) -> Result<Self> {
        let neg: Vec<f64> = self.kappa_knots().iter().map(|k| -k).collect();
        Self::new(self.knots(), &neg, self.phi_knots(), self.s_max)
    }
}

/// Profile through the three active-area estimates at their configured
/// sensor arc positions (distal frame).
pub fn build_profile(aa: &[Bend; ACTIVE_AREAS], cdm: &CdmConfig) -> Result<CurvatureProfile> {
    let kappa: Vec<f64> = aa.iter().map(|b| b.kappa).collect();
    let phi: Vec<f64> = aa.iter().map(|b| b.phi).collect();
    CurvatureProfile::new(&cdm.aa_arc_positions, &kappa, &phi, cdm.total_arc_length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    SensorDistal,
    CdmProximal,
}

impl Frame {
    pub fn as_str(self) -> &'static str {
        match self {
            Frame::SensorDistal => "sensor-distal",
            Frame::CdmProximal => "cdm-proximal",
        }
    }
}

/// Uniformly sampled planar curve. The tangent at arc `s` is
/// `(sin θ, cos θ)`, so `θ = 0` points along `+y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlinePolyline {
    pub frame: Frame,
    pub step: f64,
    pub total_arc: f64,
    pub arc: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub tangent: Vec<f64>,
}

impl CenterlinePolyline {
    pub fn tip(&self) -> [f64; 2] {
        *self.points.last().expect("polyline is never empty")
    }

    pub fn tip_angle(&self) -> f64 {
        *self.tangent.last().expect("polyline is never empty")
    }

    /// Sum of chord lengths.
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    /// Position and tangent angle at arc `s`, by cubic Hermite
    /// interpolation between samples.
    pub fn pose_at(&self, s: f64) -> Result<([f64; 2], f64)> {
        let n = self.arc.len();
        if !(s >= self.arc[0] - 1e-9 && s <= self.arc[n - 1] + 1e-9) {
            return Err(Error::Precondition(format!(
                "arc {s} outside polyline range [{}, {}]",
                self.arc[0],
                self.arc[n - 1]
            )));
        }
        let i = self.arc.partition_point(|&a| a <= s).saturating_sub(1).min(n.saturating_sub(2));
        if n == 1 {
            return Ok((self.points[0], self.tangent[0]));
        }
        let h = self.arc[i + 1] - self.arc[i];
        let t = ((s - self.arc[i]) / h).clamp(0.0, 1.0);
        if t == 0.0 {
            return Ok((self.points[i], self.tangent[i]));
        }
        if t == 1.0 {
            return Ok((self.points[i + 1], self.tangent[i + 1]));
        }
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let (a, b) = (self.tangent[i], self.tangent[i + 1]);
        let d0 = [a.sin(), a.cos()];
        let d1 = [b.sin(), b.cos()];
        let p0 = self.points[i];
        let p1 = self.points[i + 1];
        let p = [
            h00 * p0[0] + h * h10 * d0[0] + h01 * p1[0] + h * h11 * d1[0],
            h00 * p0[1] + h * h10 * d0[1] + h01 * p1[1] + h * h11 * d1[1],
        ];
        Ok((p, a + t * (b - a)))
    }
}

/// Integrates `θ' = κ(s)`, `x' = sin θ`, `y' = cos θ` over `[0, span]`
/// with composite Simpson steps; `x` is scaled by `cos φ(s)`.
pub fn integrate_curve<K, P>(
    kappa: K,
    phi: P,
    span: f64,
    start: (f64, f64, f64),
    step: f64,
    frame: Frame,
) -> Result<CenterlinePolyline>
where
    K: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Precondition(format!("integration step must be positive, got {step}")));
    }
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::Precondition(format!("arc span must be positive, got {span}")));
    }
    let (theta0, x0, y0) = start;
    let n = ((span / step).round() as usize).max(1);
    let h = span / n as f64;

    let mut arc = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut tangent = Vec::with_capacity(n + 1);
    let (mut theta, mut x, mut y) = (theta0, x0, y0);
    let mut k0 = kappa(0.0);
    arc.push(0.0);
    points.push([x * phi(0.0).cos(), y]);
    tangent.push(theta);
    for i in 0..n {
        let s0 = i as f64 * h;
        let k1 = kappa(s0 + 0.25 * h);
        let k2 = kappa(s0 + 0.5 * h);
        let k3 = kappa(s0 + 0.75 * h);
        let k4 = kappa(s0 + h);
        let theta_mid = theta + h / 12.0 * (k0 + 4.0 * k1 + k2);
        let theta_end = theta_mid + h / 12.0 * (k2 + 4.0 * k3 + k4);
        x += h / 6.0 * (theta.sin() + 4.0 * theta_mid.sin() + theta_end.sin());
        y += h / 6.0 * (theta.cos() + 4.0 * theta_mid.cos() + theta_end.cos());
        theta = theta_end;
        k0 = k4;
        let s1 = if i + 1 == n { span } else { (i + 1) as f64 * h };
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(Error::NonFinite("centerline"));
        }
        arc.push(s1);
        points.push([x * phi(s1).cos(), y]);
        tangent.push(theta);
    }
    Ok(CenterlinePolyline {
        frame,
        step: h,
        total_arc: span,
        arc,
        points,
        tangent,
    })
}

/// Integrates a curvature profile from `(x0, y0)` with initial tangent
/// angle `theta0`.
pub fn integrate_centerline(
    profile: &CurvatureProfile,
    arc_span: f64,
    theta0: f64,
    x0: f64,
    y0: f64,
    step: f64,
) -> Result<CenterlinePolyline> {
    integrate_curve(
        |s| profile.kappa(s),
        |s| profile.phi(s),
        arc_span,
        (theta0, x0, y0),
        step,
        Frame::CdmProximal,
    )
}

/// Sensor centerline in the distal frame. Walking from the distal tip
/// reverses the direction of travel, so the signed curvature flips.
pub fn sensor_centerline(profile: &CurvatureProfile, arc_span: f64, step: f64) -> Result<CenterlinePolyline> {
    integrate_curve(
        |s| -profile.kappa(s),
        |_| 0.0,
        arc_span,
        (0.0, 0.0, 0.0),
        step,
        Frame::SensorDistal,
    )
}

/// Translation from the sensor distal frame to the manipulator distal
/// frame for an active area at `(x, y)`.
pub fn translation_vector(point: [f64; 2], d_offset: f64) -> [f64; 2] {
    [point[0] - d_offset, point[1]]
}

/// Maps each active area from the sensor centerline onto the manipulator
/// centerline, both in the distal frame: the manipulator point lies at
/// `d_offset` along the in-plane normal of the sensor.
pub fn transfer_aa_to_cdm(
    sensor: &CenterlinePolyline,
    cdm: &CdmConfig,
) -> Result<[[f64; 2]; ACTIVE_AREAS]> {
    let d = cdm.d_offset;
    let mut out = [[0.0; 2]; ACTIVE_AREAS];
    for (j, &s) in cdm.aa_arc_positions.iter().enumerate() {
        let (p, theta) = sensor.pose_at(s)?;
        let v = translation_vector(p, d);
        out[j] = [d * theta.cos() + v[0], -d * theta.sin() + v[1]];
    }
    Ok(out)
}

/// Arc position of each mapped active area measured from the proximal end.
///
/// A cubic `x = f(y)` through the distal origin and the three points,
/// leaving the origin with zero slope, is integrated for arc length.
pub fn aa_arclength_on_cdm(points: &[[f64; 2]; ACTIVE_AREAS], cdm: &CdmConfig, step: f64) -> Result<[f64; ACTIVE_AREAS]> {
    let mut ys = vec![0.0];
    let mut xs = vec![0.0];
    for p in points {
        ys.push(p[1]);
        xs.push(p[0]);
    }
    if let Some(i) = (1..ys.len()).find(|&i| !(ys[i] > ys[i - 1])) {
        return Err(Error::Geometry(format!(
            "mapped active areas fold over: y = {} after {}",
            ys[i],
            ys[i - 1]
        )));
    }
    let f = Spline1D::with_end_conditions(
        &ys,
        &xs,
        EndCondition::Clamped(0.0),
        EndCondition::Natural,
        Extrapolation::HoldEndpoint,
    )?;
    let mut out = [0.0; ACTIVE_AREAS];
    for j in 0..ACTIVE_AREAS {
        let len = integrate(
            |y| {
                let d = f.derivative(y);
                (1.0 + d * d).sqrt()
            },
            0.0,
            ys[j + 1],
            step,
        )?;
        let s = cdm.total_arc_length - len;
        if s < 0.0 {
            return Err(Error::Geometry(format!(
                "active area {} maps {len} mm from the tip, beyond the {} mm manipulator",
                j + 1,
                cdm.total_arc_length
            )));
        }
        out[j] = s;
    }
    Ok(out)
}

/// Manipulator curvature from sensor curvature across the lateral offset.
pub fn curvature_transfer(kappa: f64, phi: f64, d_offset: f64) -> Result<f64> {
    let denom = 1.0 + d_offset * kappa * phi.cos();
    if !(denom > 0.0) {
        return Err(Error::Geometry(format!(
            "offset curve degenerates: 1 + d·κ·cos φ = {denom}"
        )));
    }
    Ok(kappa / denom)
}

/// Signed in-plane curvature and the residual out-of-plane direction.
pub fn signed_planar(bend: &Bend) -> (f64, f64) {
    if bend.phi.cos() >= 0.0 {
        (bend.kappa, bend.phi)
    } else {
        (-bend.kappa, wrap_angle(bend.phi - std::f64::consts::PI))
    }
}

/// Intermediate and final results of one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub estimates: [AaEstimate; ACTIVE_AREAS],
    /// Signed sensor curvature at each active area.
    pub sensor_kappa: [f64; ACTIVE_AREAS],
    pub sensor: CenterlinePolyline,
    pub cdm_points: [[f64; 2]; ACTIVE_AREAS],
    /// Arc positions from the proximal end.
    pub cdm_arc: [f64; ACTIVE_AREAS],
    pub cdm_kappa: [f64; ACTIVE_AREAS],
    pub centerline: CenterlinePolyline,
}

/// Frame-to-centerline pipeline with fixed calibration.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    pub calib: CalibrationSet,
    pub cdm: CdmConfig,
    pub deadband: f64,
    pub step: f64,
}

impl Reconstructor {
    pub fn new(calib: CalibrationSet, cdm: CdmConfig, deadband: f64, step: f64) -> Result<Self> {
        calib.geometry.validate()?;
        cdm.validate()?;
        if !(step > 0.0) {
            return Err(Error::Precondition(format!("integration step must be positive, got {step}")));
        }
        Ok(Self {
            calib,
            cdm,
            deadband,
            step,
        })
    }

    pub fn from_config(config: &crate::config::Config) -> Result<Self> {
        Self::new(
            config.calibration.clone(),
            config.cdm.clone(),
            config.sensing.deadband,
            config.sensing.step,
        )
    }

    pub fn reconstruct(&self, frame: &WavelengthFrame) -> Result<Reconstruction> {
        let geometry = &self.calib.geometry;
        let raw = sensing::solve_all(geometry, frame).at(Stage::Solve)?;
        let deflection = sensing::classify_deflection(frame, geometry, self.deadband).at(Stage::Classify)?;
        let bends = sensing::compensate(&raw, &self.calib, deflection);

        let mut planar = [Bend { kappa: 0.0, phi: 0.0 }; ACTIVE_AREAS];
        for j in 0..ACTIVE_AREAS {
            let (kappa, phi) = signed_planar(&bends[j]);
            if kappa.abs() >= PLANAR_CHECK_MIN_KAPPA && phi.abs() >= MAX_OUT_OF_PLANE {
                return Err(Error::Geometry(format!(
                    "active area {} bends {:.2}° out of plane after compensation",
                    j + 1,
                    phi.to_degrees()
                )))
                .at(Stage::Compensate);
            }
            planar[j] = Bend { kappa, phi };
        }
        let estimates = std::array::from_fn(|j| AaEstimate {
            raw: raw[j],
            compensated: bends[j],
            deflection,
        });

        let sensor_profile = build_profile(&planar, &self.cdm).at(Stage::Profile)?;
        let span = self.cdm.aa_arc_positions[ACTIVE_AREAS - 1];
        let sensor = sensor_centerline(&sensor_profile, span, self.step).at(Stage::SensorCenterline)?;
        let cdm_points = transfer_aa_to_cdm(&sensor, &self.cdm).at(Stage::Transfer)?;
        let cdm_arc = aa_arclength_on_cdm(&cdm_points, &self.cdm, self.step).at(Stage::ArcLength)?;

        let mut cdm_kappa = [0.0; ACTIVE_AREAS];
        for j in 0..ACTIVE_AREAS {
            cdm_kappa[j] =
                curvature_transfer(planar[j].kappa, planar[j].phi, self.cdm.d_offset).at(Stage::CurvatureTransfer)?;
        }

        // Proximal arc positions run opposite to the distal ones.
        let knots: Vec<f64> = cdm_arc.iter().rev().copied().collect();
        let values: Vec<f64> = cdm_kappa.iter().rev().copied().collect();
        let profile = CurvatureProfile::new(&knots, &values, &[0.0; ACTIVE_AREAS], self.cdm.total_arc_length)
            .at(Stage::CdmCenterline)?;
        let centerline = integrate_centerline(&profile, self.cdm.total_arc_length, 0.0, 0.0, 0.0, self.step)
            .at(Stage::CdmCenterline)?;

        Ok(Reconstruction {
            estimates,
            sensor_kappa: std::array::from_fn(|j| planar[j].kappa),
            sensor,
            cdm_points,
            cdm_arc,
            cdm_kappa,
            centerline,
        })
    }
}

/// One-shot reconstruction of the manipulator centerline (proximal frame).
pub fn reconstruct_cdm(
    frame: &WavelengthFrame,
    calib: &CalibrationSet,
    cdm: &CdmConfig,
    deadband: f64,
    step: f64,
) -> Result<CenterlinePolyline> {
    let r = Reconstructor::new(calib.clone(), cdm.clone(), deadband, step)?;
    Ok(r.reconstruct(frame)?.centerline)
}
