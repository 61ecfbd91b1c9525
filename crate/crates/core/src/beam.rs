//! Composite-beam neutral axis of the sensing-unit cross-section.
//!
//! Local frame: origin at the NiTi rod centre, z towards the tube centre.
//! The three lumens sit 120° apart on a circle of radius `r` about the tube
//! centre; the rod fills the lumen on the z-axis and the two fibres fill the
//! mirrored pair at `z = 1.5·r`, `y = ±(√3/2)·r`.

use crate::domain::{MaterialComponent, MaterialRole};
use crate::error::{Error, Result};

/// One circular region of the cross-section. Lumens are modelled as tube
/// material removed (`sign = -1`) and then refilled by their occupant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedComponent {
    pub role: MaterialRole,
    pub youngs_modulus_gpa: f64,
    pub diameter_mm: f64,
    pub center_z: f64,
    pub center_y: f64,
    pub sign: f64,
}

impl PlacedComponent {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter_mm * self.diameter_mm / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Materials {
    tube: MaterialComponent,
    rod: MaterialComponent,
    fiber: MaterialComponent,
    lumen: MaterialComponent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    materials: Materials,
    lumen_circle_radius: f64,
    components: Vec<PlacedComponent>,
}

fn pick(materials: &[MaterialComponent], role: MaterialRole, count: u32) -> Result<MaterialComponent> {
    let mut found = materials.iter().filter(|m| m.role == role);
    let m = found
        .next()
        .ok_or_else(|| Error::invariant("materials", format!("missing {role:?} component")))?;
    if found.next().is_some() {
        return Err(Error::invariant("materials", format!("duplicate {role:?} component")));
    }
    m.validate()?;
    if m.count != count {
        return Err(Error::invariant(
            "materials",
            format!("{role:?} count is {}, the three-lumen layout needs {count}", m.count),
        ));
    }
    Ok(*m)
}

impl CrossSection {
    /// Three-lumen tube with a NiTi rod and two fibres.
    pub fn sensing_unit(materials: &[MaterialComponent], lumen_circle_radius: f64) -> Result<Self> {
        if !(lumen_circle_radius.is_finite() && lumen_circle_radius >= 0.0) {
            return Err(Error::invariant(
                "lumen_circle_radius_mm",
                format!("{lumen_circle_radius} must be finite and >= 0"),
            ));
        }
        let m = Materials {
            tube: pick(materials, MaterialRole::Tube, 1)?,
            rod: pick(materials, MaterialRole::NitiRod, 1)?,
            fiber: pick(materials, MaterialRole::Fiber, 2)?,
            lumen: pick(materials, MaterialRole::Lumen, 3)?,
        };
        let r = lumen_circle_radius;
        let (fz, fy) = (1.5 * r, 0.75f64.sqrt() * r);
        let place = |role, modulus, diameter, z, y, sign| PlacedComponent {
            role,
            youngs_modulus_gpa: modulus,
            diameter_mm: diameter,
            center_z: z,
            center_y: y,
            sign,
        };
        let e_t = m.tube.youngs_modulus_gpa;
        let d_l = m.lumen.diameter_mm;
        let components = vec![
            place(MaterialRole::Tube, e_t, m.tube.diameter_mm, r, 0.0, 1.0),
            place(MaterialRole::Lumen, e_t, d_l, 0.0, 0.0, -1.0),
            place(MaterialRole::Lumen, e_t, d_l, fz, fy, -1.0),
            place(MaterialRole::Lumen, e_t, d_l, fz, -fy, -1.0),
            place(MaterialRole::NitiRod, m.rod.youngs_modulus_gpa, m.rod.diameter_mm, 0.0, 0.0, 1.0),
            place(MaterialRole::Fiber, m.fiber.youngs_modulus_gpa, m.fiber.diameter_mm, fz, fy, 1.0),
            place(MaterialRole::Fiber, m.fiber.youngs_modulus_gpa, m.fiber.diameter_mm, fz, -fy, 1.0),
        ];
        let section = Self {
            materials: m,
            lumen_circle_radius,
            components,
        };
        section.validate()?;
        Ok(section)
    }

    pub fn components(&self) -> &[PlacedComponent] {
        &self.components
    }

    pub fn lumen_circle_radius(&self) -> f64 {
        self.lumen_circle_radius
    }

    /// Mirror symmetry about the z-axis and a positive net area.
    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if c.center_y == 0.0 {
                continue;
            }
            let mirrored = self.components.iter().any(|o| {
                o.role == c.role
                    && o.center_z == c.center_z
                    && o.center_y == -c.center_y
                    && o.diameter_mm == c.diameter_mm
                    && o.youngs_modulus_gpa == c.youngs_modulus_gpa
            });
            if !mirrored {
                return Err(Error::Geometry(format!(
                    "{:?} at y = {} has no mirror partner",
                    c.role, c.center_y
                )));
            }
        }
        let net_area: f64 = self
            .components
            .iter()
            .filter(|c| c.role == MaterialRole::Tube || c.role == MaterialRole::Lumen)
            .map(|c| c.sign * c.area())
            .sum();
        if !(net_area > 0.0) {
            return Err(Error::Geometry(format!("net tube area {net_area} mm² is not positive")));
        }
        Ok(())
    }
}

/// Neutral-axis offset `z_c` (mm) of the three-lumen sensing unit.
pub fn neutral_axis_offset(section: &CrossSection) -> Result<f64> {
    let m = &section.materials;
    let sq = |c: &MaterialComponent| c.diameter_mm * c.diameter_mm;
    let (e_t, e_nw, e_f) = (
        m.tube.youngs_modulus_gpa,
        m.rod.youngs_modulus_gpa,
        m.fiber.youngs_modulus_gpa,
    );
    let tube_net = e_t * (sq(&m.tube) - 3.0 * sq(&m.lumen));
    let numerator = (3.0 * e_f * sq(&m.fiber) + tube_net) * section.lumen_circle_radius;
    let denominator = e_nw * sq(&m.rod) + 2.0 * e_f * sq(&m.fiber) + tube_net;
    if !(denominator > 0.0) {
        return Err(Error::Geometry(format!(
            "modulus-weighted area {denominator} is not positive"
        )));
    }
    Ok(numerator / denominator)
}
