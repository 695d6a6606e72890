#![allow(dead_code)]

use std::f64::consts::PI;

use optomech::{working_point_from_g, OperatingPoint, SystemParams, C64};

pub const TAU: f64 = 2.0 * PI;

/// Reference device at coupling `g`, red-sideband control, probe `1/30`.
pub fn operating_point(eta: f64, g: f64, phi: f64, y: f64) -> OperatingPoint {
    working_point_from_g(
        &SystemParams::reference(eta),
        C64::new(g, 0.0),
        10.0,
        y,
        phi,
        1.0 / 30.0,
    )
    .unwrap()
}

pub fn strong_control(phi: f64) -> OperatingPoint {
    operating_point(0.05, 1.0 / 3.0, phi, 1.0)
}

pub fn rel_diff(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
