#![allow(dead_code)]

use std::f64::consts::PI;

use fbg_shape::calibrate::{
    fit_friction_coeffs, fit_node_geometry, measure_twist, CalibrationDataset, GeometryFitOptions,
};
use fbg_shape::config::Config;
use fbg_shape::domain::{CalibrationSet, SensorGeometry, ACTIVE_AREAS};
use fbg_shape::sensing::DEFAULT_K_T;
use fbg_shape::simulate::{
    angle_sweep, jig_curvature, manipulator_jig_dataset, sensor_groove_dataset, twist_procedure_frames,
    FrictionInjection, JigSpec, DEFAULT_NOISE_NM,
};

pub const TABLE_C_POS: [f64; ACTIVE_AREAS] = [1.024, 0.945, 0.985];
pub const TABLE_C_NEG: [f64; ACTIVE_AREAS] = [0.917, 0.836, 0.655];

pub fn table_friction() -> FrictionInjection {
    FrictionInjection {
        c_pos: TABLE_C_POS,
        c_neg: TABLE_C_NEG,
    }
}

/// The shipped configuration's node layout, used as the simulated hardware.
pub fn truth_geometry() -> SensorGeometry {
    Config::default().geometry().clone()
}

/// Design-value starting point: every node on the lumen circle at 60°.
pub fn nominal_geometry(truth: &SensorGeometry) -> SensorGeometry {
    let mut g = truth.clone();
    for node in g.nodes.iter_mut().flatten() {
        node.r = truth.lumen_circle_radius;
        node.theta = PI / 3.0;
    }
    g
}

/// Every node at the same radius, so the pseudo-inverse is exact in-plane.
pub fn symmetric_geometry() -> SensorGeometry {
    let mut g = truth_geometry();
    for node in g.nodes.iter_mut().flatten() {
        node.r = 0.155;
    }
    g
}

pub fn fitting_angles() -> Vec<f64> {
    angle_sweep(-90.0, 90.0, 10.0)
}

pub fn validation_angles() -> Vec<f64> {
    angle_sweep(-85.0, 85.0, 10.0)
}

pub fn groove_set(truth: &SensorGeometry, angles: &[f64], noise: f64, seed: u64) -> CalibrationDataset {
    sensor_groove_dataset(truth, angles, &[0.0], noise, DEFAULT_K_T, seed).unwrap()
}

/// Geometry, friction and twist calibration against simulated hardware.
pub fn calibrate(
    truth: &SensorGeometry,
    friction: FrictionInjection,
    twist: [f64; ACTIVE_AREAS],
    noise: f64,
    seed: u64,
) -> CalibrationSet {
    let cdm = Config::default().cdm;
    let grooves = groove_set(truth, &fitting_angles(), noise, seed);
    let fit = fit_node_geometry(&grooves, &nominal_geometry(truth), GeometryFitOptions::default()).unwrap();
    let jig = manipulator_jig_dataset(
        truth,
        &cdm,
        &angle_sweep(-90.0, 90.0, 5.0),
        friction,
        twist,
        noise,
        DEFAULT_K_T,
        seed + 1,
    )
    .unwrap();
    let c = fit_friction_coeffs(&jig, &fit.geometry).unwrap();
    let groove_kappa = jig_curvature(&JigSpec::with_angle(90.0).unwrap());
    let (straight, groove) =
        twist_procedure_frames(truth, twist, groove_kappa, 0.0, noise, DEFAULT_K_T, seed + 2).unwrap();
    let phi_twist = measure_twist(&straight, &groove, groove_kappa, &fit.geometry).unwrap();
    CalibrationSet {
        c_pos: c.c_pos.unwrap(),
        c_neg: c.c_neg.unwrap(),
        phi_twist,
        geometry: fit.geometry,
    }
}

pub fn default_calibration(seed: u64) -> CalibrationSet {
    calibrate(
        &truth_geometry(),
        table_friction(),
        [2f64.to_radians(); ACTIVE_AREAS],
        DEFAULT_NOISE_NM,
        seed,
    )
}
