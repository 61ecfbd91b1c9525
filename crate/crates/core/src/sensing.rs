//! Grating measurement model.
//!
//! Forward: bending state of each active area → node strains → Bragg
//! wavelengths. Inverse: normalised wavelength shifts → `B = A†·Λ` →
//! curvature, bending direction and a lumped thermal term, followed by
//! friction and twist compensation.

use nalgebra::{Matrix2, Matrix2x3, Vector2};

use crate::domain::{
    wrap_angle, CalibrationSet, Fiber, SensorGeometry, WavelengthFrame, ACTIVE_AREAS, FIBERS, STRAIN_LIMIT,
};
use crate::error::{Error, Result};
use crate::numerics::RowSvd;

/// Default sign-classification deadband, nm (5 pm).
pub const DEFAULT_DEADBAND: f64 = 0.005;
/// Default temperature coefficient of a silica grating, 1/K.
pub const DEFAULT_K_T: f64 = 6.5e-6;

/// Bending state of one active area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaState {
    /// Curvature, 1/mm (≥ 0).
    pub kappa: f64,
    /// Bending direction, rad in (−π, π].
    pub phi: f64,
    /// Temperature change, K.
    pub delta_t: f64,
}

impl AaState {
    pub fn new(kappa: f64, phi: f64, delta_t: f64) -> Result<Self> {
        if !(kappa.is_finite() && phi.is_finite() && delta_t.is_finite()) {
            return Err(Error::NonFinite("active-area state"));
        }
        if kappa < 0.0 {
            return Err(Error::invariant("kappa", format!("{kappa} is negative")));
        }
        Ok(Self {
            kappa,
            phi: wrap_angle(phi),
            delta_t,
        })
    }

    pub fn bending(kappa: f64, phi: f64) -> Result<Self> {
        Self::new(kappa, phi, 0.0)
    }

    pub fn straight() -> Self {
        Self {
            kappa: 0.0,
            phi: 0.0,
            delta_t: 0.0,
        }
    }
}

/// Raw inverse solution of one active area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaSolution {
    pub kappa: f64,
    pub phi: f64,
    /// Third component of `B`, the lumped `K_T·ΔT`.
    pub thermal: f64,
}

/// Curvature magnitude and bending direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bend {
    pub kappa: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Deflection {
    Positive,
    Negative,
    Straight,
}

impl Deflection {
    pub fn as_str(self) -> &'static str {
        match self {
            Deflection::Positive => "positive",
            Deflection::Negative => "negative",
            Deflection::Straight => "straight",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "positive" | "+" => Some(Deflection::Positive),
            "negative" | "-" => Some(Deflection::Negative),
            "straight" | "0" => Some(Deflection::Straight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaEstimate {
    pub raw: AaSolution,
    pub compensated: Bend,
    pub deflection: Deflection,
}

fn check_aa(aa: usize) -> Result<()> {
    if aa < ACTIVE_AREAS {
        Ok(())
    } else {
        Err(Error::Precondition(format!("active area index {aa} out of range")))
    }
}

/// Axial strain of node `N_{fiber, aa}` under pure bending.
pub fn node_strain(geometry: &SensorGeometry, aa: usize, fiber: Fiber, state: &AaState) -> Result<f64> {
    check_aa(aa)?;
    let node = geometry.node(fiber, aa);
    let (k, phi, zc) = (state.kappa, state.phi, geometry.z_c);
    let strain = match fiber {
        Fiber::One => -k * (zc * phi.sin() - node.r * (node.theta - phi).sin()),
        Fiber::Two => -k * (zc * phi.sin() + node.r * (node.theta + phi).sin()),
    };
    if strain.abs() > STRAIN_LIMIT {
        return Err(Error::StrainLimit {
            fiber: fiber.number(),
            aa: aa + 1,
            strain,
            limit: STRAIN_LIMIT,
        });
    }
    Ok(strain)
}

/// Bragg wavelengths produced by the given active-area states.
pub fn forward_wavelengths(
    geometry: &SensorGeometry,
    states: &[AaState; ACTIVE_AREAS],
    k_t: f64,
    timestamp: f64,
) -> Result<WavelengthFrame> {
    let k_eps = geometry.k_eps();
    let mut lambda = [[0.0; ACTIVE_AREAS]; FIBERS];
    for fiber in Fiber::ALL {
        for (aa, state) in states.iter().enumerate() {
            let strain = node_strain(geometry, aa, fiber, state)?;
            let lambda0 = geometry.node(fiber, aa).lambda0;
            lambda[fiber.index()][aa] = lambda0 + lambda0 * (k_eps * strain + k_t * state.delta_t);
        }
    }
    Ok(WavelengthFrame { timestamp, lambda })
}

/// `A_j` relating `B_j = (κ sin φ, κ cos φ, K_T ΔT)` to the normalised shifts.
pub fn build_design_matrix(geometry: &SensorGeometry, aa: usize) -> Result<Matrix2x3<f64>> {
    check_aa(aa)?;
    let k_eps = geometry.k_eps();
    let n1 = geometry.node(Fiber::One, aa);
    let n2 = geometry.node(Fiber::Two, aa);
    Ok(Matrix2x3::new(
        -k_eps * (geometry.z_c + n1.r * n1.theta.cos()),
        k_eps * n1.r * n1.theta.sin(),
        1.0,
        -k_eps * (geometry.z_c + n2.r * n2.theta.cos()),
        -k_eps * n2.r * n2.theta.sin(),
        1.0,
    ))
}

/// `Λ_j = (Δλ₁ⱼ/λ₀₁ⱼ, Δλ₂ⱼ/λ₀₂ⱼ)`.
pub fn normalized_shifts(geometry: &SensorGeometry, frame: &WavelengthFrame, aa: usize) -> Result<Vector2<f64>> {
    check_aa(aa)?;
    let mut out = Vector2::zeros();
    for fiber in Fiber::ALL {
        let measured = frame.lambda[fiber.index()][aa];
        if !measured.is_finite() {
            return Err(Error::NonFinite("wavelength"));
        }
        let lambda0 = geometry.node(fiber, aa).lambda0;
        out[fiber.index()] = (measured - lambda0) / lambda0;
    }
    Ok(out)
}

fn bend_from(b1: f64, b2: f64) -> (f64, f64) {
    let kappa = b1.hypot(b2);
    // atan2(0, 0) is defined as 0 so a straight sensor has a direction.
    let phi = if kappa == 0.0 { 0.0 } else { wrap_angle(b1.atan2(b2)) };
    (kappa, phi)
}

/// Minimum-norm inverse for one active area.
pub fn solve_aa(geometry: &SensorGeometry, frame: &WavelengthFrame, aa: usize) -> Result<AaSolution> {
    let lambda = normalized_shifts(geometry, frame, aa)?;
    let a = build_design_matrix(geometry, aa)?;
    let b = RowSvd::new(&a)?.solve(&lambda);
    let (kappa, phi) = bend_from(b[0], b[1]);
    Ok(AaSolution {
        kappa,
        phi,
        thermal: b[2],
    })
}

pub fn solve_all(geometry: &SensorGeometry, frame: &WavelengthFrame) -> Result<[AaSolution; ACTIVE_AREAS]> {
    Ok([
        solve_aa(geometry, frame, 0)?,
        solve_aa(geometry, frame, 1)?,
        solve_aa(geometry, frame, 2)?,
    ])
}

/// Inverse under a known-zero temperature change: the thermal column is
/// dropped and the remaining 2×2 system is solved exactly. Valid only when
/// the reference wavelengths were captured at the measurement temperature.
pub fn solve_aa_isothermal(geometry: &SensorGeometry, frame: &WavelengthFrame, aa: usize) -> Result<AaSolution> {
    let lambda = normalized_shifts(geometry, frame, aa)?;
    let a = build_design_matrix(geometry, aa)?;
    let m = Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let b = m
        .try_inverse()
        .ok_or_else(|| Error::Geometry(format!("isothermal system of active area {} is singular", aa + 1)))?
        * lambda;
    let (kappa, phi) = bend_from(b[0], b[1]);
    Ok(AaSolution {
        kappa,
        phi,
        thermal: 0.0,
    })
}

/// Per-active-area vote from the wavelength-shift signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Vote {
    Positive,
    Negative,
    Abstain,
    Contradictory,
}

fn vote(d1: f64, d2: f64, deadband: f64) -> Vote {
    let s1 = if d1 > deadband { 1 } else if d1 < -deadband { -1 } else { 0 };
    let s2 = if d2 > deadband { 1 } else if d2 < -deadband { -1 } else { 0 };
    match (s1, s2) {
        (0, 0) => Vote::Abstain,
        (1, -1) | (1, 0) | (0, -1) => Vote::Positive,
        (-1, 1) | (-1, 0) | (0, 1) => Vote::Negative,
        _ => Vote::Contradictory,
    }
}

/// Deflection sign: fibre 1 up and fibre 2 down is a positive deflection.
///
/// Each active area votes; shifts inside `deadband` (nm) abstain. Ties are
/// broken by the summed differential shift.
pub fn classify_deflection(frame: &WavelengthFrame, geometry: &SensorGeometry, deadband: f64) -> Result<Deflection> {
    let shifts = frame.shifts(geometry);
    if shifts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wavelength"));
    }
    let (mut pos, mut neg, mut contradictory) = (0, 0, 0);
    let mut differential = 0.0;
    for aa in 0..ACTIVE_AREAS {
        let (d1, d2) = (shifts[0][aa], shifts[1][aa]);
        match vote(d1, d2, deadband) {
            Vote::Positive => pos += 1,
            Vote::Negative => neg += 1,
            Vote::Abstain => {}
            Vote::Contradictory => contradictory += 1,
        }
        differential += d1 - d2;
    }
    if pos == 0 && neg == 0 {
        return if contradictory > 0 {
            Err(Error::AmbiguousSignal)
        } else {
            Ok(Deflection::Straight)
        };
    }
    Ok(match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Deflection::Positive,
        std::cmp::Ordering::Less => Deflection::Negative,
        std::cmp::Ordering::Equal if differential >= 0.0 => Deflection::Positive,
        std::cmp::Ordering::Equal => Deflection::Negative,
    })
}

/// Friction (`κ = C·κ′`) and twist (`φ = φ′ − φ_t`) compensation.
pub fn compensate(
    raw: &[AaSolution; ACTIVE_AREAS],
    calib: &CalibrationSet,
    deflection: Deflection,
) -> [Bend; ACTIVE_AREAS] {
    std::array::from_fn(|j| {
        let c = match deflection {
            Deflection::Positive => calib.c_pos[j],
            Deflection::Negative => calib.c_neg[j],
            Deflection::Straight => 1.0,
        };
        Bend {
            kappa: c * raw[j].kappa,
            phi: wrap_angle(raw[j].phi - calib.phi_twist[j]),
        }
    })
}

/// Full per-frame estimate for the three active areas.
pub fn estimate(
    frame: &WavelengthFrame,
    calib: &CalibrationSet,
    deadband: f64,
) -> Result<[AaEstimate; ACTIVE_AREAS]> {
    let raw = solve_all(&calib.geometry, frame)?;
    let deflection = classify_deflection(frame, &calib.geometry, deadband)?;
    let bends = compensate(&raw, calib, deflection);
    Ok(std::array::from_fn(|j| AaEstimate {
        raw: raw[j],
        compensated: bends[j],
        deflection,
    }))
}
