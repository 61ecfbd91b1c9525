//! Key-value (TOML) configuration file.
//!
//! The file mirrors [`Config`] section by section; `schema_version` is
//! mandatory. Angles are written in degrees and converted on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    CalibrationSet, CdmConfig, DeflectionSignConvention, FbgNode, MaterialComponent, SensorGeometry,
    ACTIVE_AREAS,
};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable that overrides the config path on the command line.
pub const CONFIG_ENV: &str = "FBG_SHAPE_CONFIG";

const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// Parameters of the measurement model that are not part of the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingParams {
    /// Temperature coefficient, 1/K. Only the simulator uses it.
    pub k_t: f64,
    /// Sign-classification deadband, nm.
    pub deadband: f64,
    /// Default integration step, mm.
    pub step: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            k_t: 6.5e-6,
            deadband: 0.005,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub materials: Vec<MaterialComponent>,
    pub cdm: CdmConfig,
    /// Friction/twist calibration together with the node geometry.
    pub calibration: CalibrationSet,
    pub sensing: SensingParams,
    /// Free-form note on how the geometry was fitted, if it was.
    pub geometry_fit: Option<String>,
}

impl Config {
    pub fn geometry(&self) -> &SensorGeometry {
        &self.calibration.geometry
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.materials {
            m.validate()?;
        }
        self.cdm.validate()?;
        self.calibration.validate()?;
        if !(self.sensing.k_t.is_finite() && self.sensing.k_t >= 0.0) {
            return Err(Error::invariant("sensing.k_t_per_kelvin", "must be finite and >= 0"));
        }
        if !(self.sensing.deadband.is_finite() && self.sensing.deadband >= 0.0) {
            return Err(Error::invariant("sensing.deadband_pm", "must be finite and >= 0"));
        }
        if !(self.sensing.step > 0.0 && self.sensing.step <= 1.0) {
            return Err(Error::invariant("sensing.step_mm", "must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_config()
    }

    pub fn to_toml_string(&self) -> String {
        let file = ConfigFile::from_config(self);
        toml::to_string(&file).expect("config serialization is infallible")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml_str(DEFAULT_CONFIG).expect("shipped default config is valid")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    Config::from_toml_str(&text)
}

/// On-disk layout. Kept separate from the domain types so angles stay in
/// degrees on disk and radians in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub materials: Vec<MaterialComponent>,
    pub sensor: SensorSection,
    pub cdm: CdmSection,
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub sensing: SensingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub z_c_mm: f64,
    pub photoelastic: f64,
    pub lumen_circle_radius_mm: f64,
    pub fiber1: FiberSection,
    pub fiber2: FiberSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub r_mm: [f64; ACTIVE_AREAS],
    pub theta_deg: [f64; ACTIVE_AREAS],
    pub lambda0_nm: [f64; ACTIVE_AREAS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdmSection {
    pub total_arc_length_mm: f64,
    pub d_offset_mm: f64,
    pub aa_arc_positions_mm: [f64; ACTIVE_AREAS],
    #[serde(default)]
    pub deflection_sign_convention: DeflectionSignConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub c_pos: [f64; ACTIVE_AREAS],
    pub c_neg: [f64; ACTIVE_AREAS],
    pub twist_deg: [f64; ACTIVE_AREAS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_fit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub k_t_per_kelvin: f64,
    pub deadband_pm: f64,
    pub step_mm: f64,
}

impl Default for SensingSection {
    fn default() -> Self {
        let p = SensingParams::default();
        Self {
            k_t_per_kelvin: p.k_t,
            deadband_pm: p.deadband * 1e3,
            step_mm: p.step,
        }
    }
}

fn fiber_nodes(section: &FiberSection) -> [FbgNode; ACTIVE_AREAS] {
    std::array::from_fn(|j| FbgNode {
        r: section.r_mm[j],
        theta: section.theta_deg[j].to_radians(),
        lambda0: section.lambda0_nm[j],
    })
}

fn fiber_section(nodes: &[FbgNode; ACTIVE_AREAS]) -> FiberSection {
    FiberSection {
        r_mm: nodes.map(|n| n.r),
        theta_deg: nodes.map(|n| n.theta.to_degrees()),
        lambda0_nm: nodes.map(|n| n.lambda0),
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<Config> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invariant(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let geometry = SensorGeometry {
            z_c: self.sensor.z_c_mm,
            photoelastic: self.sensor.photoelastic,
            lumen_circle_radius: self.sensor.lumen_circle_radius_mm,
            nodes: [fiber_nodes(&self.sensor.fiber1), fiber_nodes(&self.sensor.fiber2)],
        };
        let config = Config {
            materials: self.materials,
            cdm: CdmConfig {
                total_arc_length: self.cdm.total_arc_length_mm,
                d_offset: self.cdm.d_offset_mm,
                aa_arc_positions: self.cdm.aa_arc_positions_mm,
                sign_convention: self.cdm.deflection_sign_convention,
            },
            calibration: CalibrationSet {
                c_pos: self.calibration.c_pos,
                c_neg: self.calibration.c_neg,
                phi_twist: self.calibration.twist_deg.map(f64::to_radians),
                geometry,
            },
            sensing: SensingParams {
                k_t: self.sensing.k_t_per_kelvin,
                deadband: self.sensing.deadband_pm * 1e-3,
                step: self.sensing.step_mm,
            },
            geometry_fit: self.calibration.geometry_fit,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_config(config: &Config) -> Self {
        let g = config.geometry();
        ConfigFile {
            schema_version: SCHEMA_VERSION,
            materials: config.materials.clone(),
            sensor: SensorSection {
                z_c_mm: g.z_c,
                photoelastic: g.photoelastic,
                lumen_circle_radius_mm: g.lumen_circle_radius,
                fiber1: fiber_section(&g.nodes[0]),
                fiber2: fiber_section(&g.nodes[1]),
            },
            cdm: CdmSection {
                total_arc_length_mm: config.cdm.total_arc_length,
                d_offset_mm: config.cdm.d_offset,
                aa_arc_positions_mm: config.cdm.aa_arc_positions,
                deflection_sign_convention: config.cdm.sign_convention,
            },
            calibration: CalibrationSection {
                c_pos: config.calibration.c_pos,
                c_neg: config.calibration.c_neg,
                twist_deg: config.calibration.phi_twist.map(f64::to_degrees),
                geometry_fit: config.geometry_fit.clone(),
            },
            sensing: SensingSection {
                k_t_per_kelvin: config.sensing.k_t,
                deadband_pm: config.sensing.deadband * 1e3,
                step_mm: config.sensing.step,
            },
        }
    }
}
