//! WebAssembly bindings behind `www/index.html`.
//!
//! The reference device (omega_m = 10 kappa, gamma_m = kappa / 1000, probe
//! kappa / 30) is fixed; the page varies coupling, phase, amplitude ratio and
//! external coupling. Every entry point returns a JSON string so the page
//! needs no generated type definitions.

use optomech::response::compute_spectrum;
use optomech::{
    classify_regime, linearity_bound, log_spaced, sweep_coupling, working_point_from_g,
    DetuningGrid, Method, OperatingPoint, RegimeReport, SystemParams, C64,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const PROBE: f64 = 1.0 / 30.0;
const MAX_POINTS: usize = 20_001;

#[derive(Debug, Serialize)]
pub struct SpectrumData {
    pub delta_prime: Vec<f64>,
    pub absorption: Vec<f64>,
    pub dispersion: Vec<f64>,
    pub transmission: Vec<f64>,
    pub cooperativity: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepData {
    pub g: Vec<f64>,
    pub transmission: Vec<f64>,
    pub peak_g: f64,
    pub peak_transmission: f64,
}

#[derive(Debug, Serialize)]
pub struct Classification {
    pub report: RegimeReport,
    pub linearity_margin: f64,
    pub linearity: optomech::Validity,
    pub resonant_transmission: f64,
}

fn check_points(points: usize) -> Result<usize, String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(points)
    } else {
        Err(format!("points must lie in 2..={MAX_POINTS}"))
    }
}

fn operating_point(g: f64, phi: f64, y: f64, eta: f64) -> Result<OperatingPoint, String> {
    let params = SystemParams::reference(eta);
    params.validate().map_err(|e| e.to_string())?;
    working_point_from_g(&params, C64::new(g, 0.0), params.omega_m, y, phi, PROBE)
        .map_err(|e| e.to_string())
}

/// Absorption, dispersion and transmission over `|delta_prime| <= span`.
pub fn spectrum_data(
    g: f64,
    phi: f64,
    y: f64,
    eta: f64,
    span: f64,
    points: usize,
) -> Result<SpectrumData, String> {
    let op = operating_point(g, phi, y, eta)?;
    let grid =
        DetuningGrid::linspace(-span, span, check_points(points)?).map_err(|e| e.to_string())?;
    let spec = compute_spectrum(
        &op.working_point,
        &op.params,
        &op.drives,
        &grid,
        Method::Exact,
    )
    .map_err(|e| e.to_string())?;
    Ok(SpectrumData {
        delta_prime: spec.points.iter().map(|p| p.delta_prime).collect(),
        absorption: spec.points.iter().map(|p| p.absorption()).collect(),
        dispersion: spec.points.iter().map(|p| p.dispersion()).collect(),
        transmission: spec.points.iter().map(|p| p.transmission).collect(),
        cooperativity: op.working_point.cooperativity,
    })
}

/// Resonant transmission against `|G|` on a logarithmic grid.
pub fn sweep_data(
    phi: f64,
    y: f64,
    eta: f64,
    g_min: f64,
    g_max: f64,
    points: usize,
) -> Result<SweepData, String> {
    let params = SystemParams::reference(eta);
    params.validate().map_err(|e| e.to_string())?;
    let gs = log_spaced(g_min, g_max, check_points(points)?).map_err(|e| e.to_string())?;
    let sweep = sweep_coupling(&params, &gs, &[y], phi, PROBE, 0.0, Method::Exact)
        .map_err(|e| e.to_string())?;
    let peak = sweep.max_transmission().ok_or("empty sweep")?;
    Ok(SweepData {
        g: sweep.rows.iter().map(|r| r.g).collect(),
        transmission: sweep.rows.iter().map(|r| r.point.transmission).collect(),
        peak_g: peak.g,
        peak_transmission: peak.point.transmission,
    })
}

pub fn classify_data(g: f64, phi: f64, y: f64, eta: f64) -> Result<Classification, String> {
    let op = operating_point(g, phi, y, eta)?;
    let report = classify_regime(&op.working_point, &op.params, y);
    let resonant = optomech::response_exact(
        &op.working_point,
        &op.params,
        op.drives.eps_p,
        op.drives.eps_a,
        0.0,
    )
    .map_err(|e| e.to_string())?
    .transmission;
    let t_max = report
        .phase_dependence
        .as_ref()
        .map_or(1.0, |p| p.t_max_estimate)
        .max(resonant);
    let lin = linearity_bound(t_max, PROBE, op.drives.eps_c.norm());
    Ok(Classification {
        report,
        linearity_margin: lin.margin,
        linearity: lin.validity,
        resonant_transmission: resonant,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn spectrum(
    g: f64,
    phi: f64,
    y: f64,
    eta: f64,
    span: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(spectrum_data(g, phi, y, eta, span, points))
}

#[wasm_bindgen]
pub fn sweep_g(
    phi: f64,
    y: f64,
    eta: f64,
    g_min: f64,
    g_max: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(sweep_data(phi, y, eta, g_min, g_max, points))
}

#[wasm_bindgen]
pub fn classify(g: f64, phi: f64, y: f64, eta: f64) -> Result<String, JsError> {
    to_js(classify_data(g, phi, y, eta))
}
