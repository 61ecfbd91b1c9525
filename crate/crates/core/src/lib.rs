//! Shape sensing for a planar continuum manipulator instrumented with a
//! two-fibre, three-active-area FBG sensor: forward and inverse strain
//! models, centerline reconstruction, calibration and a synthetic simulator.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod calibrate;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod io;
pub mod numerics;
pub mod reconstruct;
pub mod sensing;
pub mod simulate;
pub mod stream;

pub use config::Config;
pub use domain::{CalibrationSet, CdmConfig, SensorGeometry, WavelengthFrame};
pub use error::{Error, Result};
pub use reconstruct::{Reconstruction, Reconstructor};
