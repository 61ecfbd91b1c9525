//! Domain types shared by every module.
//!
//! Units are fixed across the crate: millimetres for lengths, nanometres for
//! wavelengths, radians for angles, GPa for moduli and 1/mm for curvature.
//! Degrees only appear in the config file and on the command line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIBERS: usize = 2;
pub const ACTIVE_AREAS: usize = 3;

/// Lower bound on a node radius; anything smaller is below fabrication
/// resolution and almost always means the value was entered in metres.
pub const MIN_NODE_RADIUS_MM: f64 = 0.01;
/// Upper bound on a node radius (outer radius of the substrate tube).
pub const MAX_NODE_RADIUS_MM: f64 = 0.25;
/// Grating length; active areas closer than this would overlap.
pub const GRATING_LENGTH_MM: f64 = 5.0;
pub const WAVELENGTH_RANGE_NM: (f64, f64) = (1500.0, 1600.0);
/// Fibre strain limit (1.5 %).
pub const STRAIN_LIMIT: f64 = 0.015;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn check_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(field, format!("{value} is not finite")))
    }
}

fn check_open(field: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    check_finite(field, value)?;
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(Error::invariant(field, format!("{value} not in ({lo}, {hi})")))
    }
}

fn check_closed(field: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    check_finite(field, value)?;
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::invariant(field, format!("{value} not in [{lo}, {hi}]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialRole {
    Tube,
    NitiRod,
    Fiber,
    Lumen,
}

/// One constituent of the sensor cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialComponent {
    pub role: MaterialRole,
    pub youngs_modulus_gpa: f64,
    pub diameter_mm: f64,
    pub count: u32,
}

impl MaterialComponent {
    pub fn new(role: MaterialRole, youngs_modulus_gpa: f64, diameter_mm: f64, count: u32) -> Result<Self> {
        let c = Self {
            role,
            youngs_modulus_gpa,
            diameter_mm,
            count,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        // Moduli above 1000 GPa are not a real material; they are Pa entered as GPa.
        check_closed("youngs_modulus_gpa", self.youngs_modulus_gpa, 0.0, 1000.0)?;
        // Sub-micron diameters signal metres entered as millimetres.
        check_open("diameter_mm", self.diameter_mm, 1e-3, 10.0)?;
        if self.count == 0 {
            return Err(Error::invariant("count", "must be at least 1"));
        }
        Ok(())
    }

    /// Cross-section area of a single instance, mm².
    pub fn area(&self) -> f64 {
        PI * self.diameter_mm * self.diameter_mm / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fiber {
    One,
    Two,
}

impl Fiber {
    pub const ALL: [Fiber; 2] = [Fiber::One, Fiber::Two];

    pub fn index(self) -> usize {
        match self {
            Fiber::One => 0,
            Fiber::Two => 1,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

/// Position, orientation and reference wavelength of one grating node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbgNode {
    /// Radial distance from the tube centre, mm.
    pub r: f64,
    /// Angular offset from the negative local z-axis, rad.
    pub theta: f64,
    /// Reference Bragg wavelength, nm.
    pub lambda0: f64,
}

/// Cross-section geometry of the sensing unit at the three active areas.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGeometry {
    /// Neutral-axis offset from the NiTi rod centre, mm.
    pub z_c: f64,
    /// Photo-elastic coefficient; the strain coefficient is `1 - photoelastic`.
    pub photoelastic: f64,
    /// Radius of the circle carrying the lumen centres, mm.
    pub lumen_circle_radius: f64,
    /// `nodes[fiber][aa]`.
    pub nodes: [[FbgNode; ACTIVE_AREAS]; FIBERS],
}

impl SensorGeometry {
    pub fn k_eps(&self) -> f64 {
        1.0 - self.photoelastic
    }

    pub fn node(&self, fiber: Fiber, aa: usize) -> &FbgNode {
        &self.nodes[fiber.index()][aa]
    }

    pub fn node_mut(&mut self, fiber: Fiber, aa: usize) -> &mut FbgNode {
        &mut self.nodes[fiber.index()][aa]
    }

    pub fn validate(&self) -> Result<()> {
        check_closed("sensor.z_c_mm", self.z_c, 0.0, MAX_NODE_RADIUS_MM)?;
        check_open("sensor.photoelastic", self.photoelastic, 0.0, 1.0)?;
        check_open("sensor.lumen_circle_radius_mm", self.lumen_circle_radius, 0.0, MAX_NODE_RADIUS_MM)?;
        for fiber in Fiber::ALL {
            for aa in 0..ACTIVE_AREAS {
                let n = self.node(fiber, aa);
                let tag = format!("fiber{}.aa{}", fiber.number(), aa + 1);
                check_open(&format!("{tag}.r_mm"), n.r, MIN_NODE_RADIUS_MM, MAX_NODE_RADIUS_MM)?;
                check_open(&format!("{tag}.theta"), n.theta, 0.0, PI)?;
                let (lo, hi) = WAVELENGTH_RANGE_NM;
                check_closed(&format!("{tag}.lambda0_nm"), n.lambda0, lo, hi)?;
            }
        }
        Ok(())
    }

    /// Reference wavelengths as a frame (zero shift).
    pub fn reference_frame(&self, timestamp: f64) -> WavelengthFrame {
        let mut lambda = [[0.0; ACTIVE_AREAS]; FIBERS];
        for (k, row) in self.nodes.iter().enumerate() {
            for (j, node) in row.iter().enumerate() {
                lambda[k][j] = node.lambda0;
            }
        }
        WavelengthFrame { timestamp, lambda }
    }

    /// Replaces every reference wavelength with the values of `frame`.
    pub fn with_reference(&self, frame: &WavelengthFrame) -> SensorGeometry {
        let mut g = self.clone();
        for k in 0..FIBERS {
            for j in 0..ACTIVE_AREAS {
                g.nodes[k][j].lambda0 = frame.lambda[k][j];
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeflectionSignConvention {
    #[default]
    Fiber1PositiveIsPositiveDeflection,
}

/// Manipulator-level configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CdmConfig {
    /// Flexible length of the manipulator, mm.
    pub total_arc_length: f64,
    /// Lateral distance between sensor channel and manipulator centreline, mm.
    pub d_offset: f64,
    /// Arc positions of the active areas along the sensor, measured from the distal end, mm.
    pub aa_arc_positions: [f64; ACTIVE_AREAS],
    pub sign_convention: DeflectionSignConvention,
}

impl CdmConfig {
    pub fn validate(&self) -> Result<()> {
        check_open("cdm.total_arc_length_mm", self.total_arc_length, 0.0, f64::INFINITY)?;
        check_open("cdm.d_offset_mm", self.d_offset, 0.0, 3.0)?;
        for (j, &s) in self.aa_arc_positions.iter().enumerate() {
            check_closed(
                &format!("cdm.aa_arc_positions_mm[{j}]"),
                s,
                0.0,
                self.total_arc_length,
            )?;
        }
        for j in 1..ACTIVE_AREAS {
            let gap = self.aa_arc_positions[j] - self.aa_arc_positions[j - 1];
            if gap < GRATING_LENGTH_MM {
                return Err(Error::invariant(
                    "cdm.aa_arc_positions_mm",
                    format!(
                        "active areas {} and {} are {gap} mm apart; must be increasing and at least {GRATING_LENGTH_MM} mm apart",
                        j,
                        j + 1
                    ),
                ));
            }
        }
        Ok(())
    }
}

impl Default for CdmConfig {
    fn default() -> Self {
        Self {
            total_arc_length: 35.0,
            d_offset: 2.45,
            aa_arc_positions: [5.0, 15.0, 25.0],
            sign_convention: DeflectionSignConvention::default(),
        }
    }
}

/// One interrogator sample: `lambda[fiber][aa]` in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthFrame {
    pub timestamp: f64,
    pub lambda: [[f64; ACTIVE_AREAS]; FIBERS],
}

impl WavelengthFrame {
    pub fn validate(&self) -> Result<()> {
        check_finite("t", self.timestamp)?;
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        for k in 0..FIBERS {
            for j in 0..ACTIVE_AREAS {
                check_closed(&format!("l{}{}", k + 1, j + 1), self.lambda[k][j], lo, hi)?;
            }
        }
        Ok(())
    }

    /// Wavelength shift of each node relative to the geometry's reference, nm.
    pub fn shifts(&self, geometry: &SensorGeometry) -> [[f64; ACTIVE_AREAS]; FIBERS] {
        let mut out = [[0.0; ACTIVE_AREAS]; FIBERS];
        for k in 0..FIBERS {
            for j in 0..ACTIVE_AREAS {
                out[k][j] = self.lambda[k][j] - geometry.nodes[k][j].lambda0;
            }
        }
        out
    }
}

/// Friction coefficients, twist offsets and the calibrated geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub c_pos: [f64; ACTIVE_AREAS],
    pub c_neg: [f64; ACTIVE_AREAS],
    /// Twist offsets, rad.
    pub phi_twist: [f64; ACTIVE_AREAS],
    pub geometry: SensorGeometry,
}

impl CalibrationSet {
    /// Unit coefficients and zero twist.
    pub fn identity(geometry: SensorGeometry) -> Self {
        Self {
            c_pos: [1.0; ACTIVE_AREAS],
            c_neg: [1.0; ACTIVE_AREAS],
            phi_twist: [0.0; ACTIVE_AREAS],
            geometry,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..ACTIVE_AREAS {
            check_open(&format!("calibration.c_pos[{j}]"), self.c_pos[j], 0.3, 2.0)?;
            check_open(&format!("calibration.c_neg[{j}]"), self.c_neg[j], 0.3, 2.0)?;
            check_open(
                &format!("calibration.twist[{j}]"),
                self.phi_twist[j],
                -PI / 4.0,
                PI / 4.0,
            )?;
        }
        self.geometry.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cdm_rejects_metre_scaled_positions() {
        let cdm = CdmConfig {
            total_arc_length: 0.035,
            d_offset: 0.00245,
            aa_arc_positions: [0.005, 0.015, 0.025],
            ..CdmConfig::default()
        };
        assert!(matches!(cdm.validate(), Err(Error::Invariant { .. })));
    }

    #[test]
    fn material_rejects_pascal_moduli() {
        assert!(MaterialComponent::new(MaterialRole::Tube, 2.6e9, 0.5, 1).is_err());
        assert!(MaterialComponent::new(MaterialRole::Tube, 2.6, 0.0005, 1).is_err());
        assert!(MaterialComponent::new(MaterialRole::Lumen, 0.0, 0.15, 3).is_ok());
    }
}
