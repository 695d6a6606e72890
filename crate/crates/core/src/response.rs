//! Probe-frequency intracavity response and output transmission.
//!
//! Three evaluation routes are provided:
//!
//! * [`response_exact`] solves the rotating-frame mean equations for the
//!   complex coupling and drives directly,
//! * [`response_closed_form`] evaluates the two-pathway expression in terms
//!   of `|G|`, `|eps_p|`, `|eps_a|` and the total phase,
//! * [`response_weak_control`] is the small-cooperativity approximation.
//!
//! All three return a [`ResponsePoint`] with `eps_t = kappa_ex <dc> / eps_p`,
//! `script_t = -1 + eps_t` and `transmission = |script_t|^2`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriveSet, SystemParams, WorkingPoint, C64, I};
use crate::table::fmt_f64;

/// Cooperativity above which the weak-control approximation is flagged.
pub const WEAK_CONTROL_MAX_COOPERATIVITY: f64 = 0.01;

const SINGULAR_DET: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub delta_prime: f64,
    /// Output quadrature; real part is absorption, imaginary part dispersion.
    pub eps_t: C64,
    pub script_t: C64,
    /// Power transmission `|script_t|^2`.
    pub transmission: f64,
}

impl ResponsePoint {
    pub fn from_eps_t(delta_prime: f64, eps_t: C64) -> Self {
        let script_t = eps_t - 1.0;
        ResponsePoint {
            delta_prime,
            eps_t,
            script_t,
            transmission: script_t.norm_sqr(),
        }
    }

    pub fn absorption(&self) -> f64 {
        self.eps_t.re
    }

    pub fn dispersion(&self) -> f64 {
        self.eps_t.im
    }
}

fn cavity_factor(params: &SystemParams, delta_prime: f64) -> C64 {
    C64::new(params.kappa / 2.0, -delta_prime)
}

fn mechanical_factor(params: &SystemParams, delta_prime: f64) -> C64 {
    C64::new(params.gamma_m / 2.0, -delta_prime)
}

fn response_determinant(params: &SystemParams, g_mag: f64, delta_prime: f64) -> Result<C64> {
    let det =
        cavity_factor(params, delta_prime) * mechanical_factor(params, delta_prime) + g_mag * g_mag;
    if det.norm() < SINGULAR_DET || !det.re.is_finite() || !det.im.is_finite() {
        return Err(Error::SingularSystem { det: det.norm() });
    }
    Ok(det)
}

/// Steady-state fluctuation means `(<dc>, <db>)` of the rotating-wave linear
/// equations
///
/// ```text
/// 0 = (i D' - kappa/2) c + i G b + eps_p
/// 0 = (i D' - gamma_m/2) b + i G* c + eps_a
/// ```
pub fn linear_means(
    params: &SystemParams,
    g: C64,
    eps_p: C64,
    eps_a: C64,
    delta_prime: f64,
) -> Result<(C64, C64)> {
    let a = cavity_factor(params, delta_prime);
    let b = mechanical_factor(params, delta_prime);
    let det = response_determinant(params, g.norm(), delta_prime)?;
    let cav = (b * eps_p + I * g * eps_a) / det;
    let mech = (a * eps_a + I * g.conj() * eps_p) / det;
    Ok((cav, mech))
}

fn check_probe(eps_p: f64) -> Result<()> {
    if eps_p == 0.0 || !eps_p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "probe amplitude must be nonzero (got {eps_p})"
        )));
    }
    Ok(())
}

/// Response from the full complex linear system; no phase bookkeeping.
pub fn response_exact(
    wp: &WorkingPoint,
    params: &SystemParams,
    eps_p: C64,
    eps_a: C64,
    delta_prime: f64,
) -> Result<ResponsePoint> {
    check_probe(eps_p.norm())?;
    let (cav, _) = linear_means(params, wp.g, eps_p, eps_a, delta_prime)?;
    Ok(ResponsePoint::from_eps_t(
        delta_prime,
        params.kappa_ex() * cav / eps_p,
    ))
}

/// Closed-form response split into its two interfering pathways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormResponse {
    pub point: ResponsePoint,
    /// Contribution of the ordinary transparency pathway to `eps_t`.
    pub omit_term: C64,
    /// Contribution of the phonon-photon parametric pathway to `eps_t`.
    pub parametric_term: C64,
}

impl ClosedFormResponse {
    /// `Re(omit * conj(parametric))`: positive for constructive, negative for
    /// destructive interference.
    pub fn interference(&self) -> f64 {
        (self.omit_term * self.parametric_term.conj()).re
    }
}

pub fn response_closed_form(
    wp: &WorkingPoint,
    params: &SystemParams,
    eps_p_mag: f64,
    eps_a_mag: f64,
    phi_total: f64,
    delta_prime: f64,
) -> Result<ClosedFormResponse> {
    check_probe(eps_p_mag)?;
    let g_mag = wp.g.norm();
    let det = response_determinant(params, g_mag, delta_prime)?;
    let scale = params.kappa_ex() / eps_p_mag;
    let omit_term = scale * mechanical_factor(params, delta_prime) * eps_p_mag / det;
    let parametric_term = scale * C64::from_polar(eps_a_mag * g_mag, phi_total) / det;
    Ok(ClosedFormResponse {
        point: ResponsePoint::from_eps_t(delta_prime, omit_term + parametric_term),
        omit_term,
        parametric_term,
    })
}

/// Small-cooperativity approximation: a bare cavity Lorentzian plus a narrow
/// feature of width `gamma_m` from the driven mechanics.
///
/// Not an error outside its regime; a warning is logged when the
/// cooperativity exceeds [`WEAK_CONTROL_MAX_COOPERATIVITY`].
pub fn response_weak_control(
    params: &SystemParams,
    eps_p_mag: f64,
    eps_a_mag: f64,
    g_mag: f64,
    phi_total: f64,
    delta_prime: f64,
) -> Result<ResponsePoint> {
    check_probe(eps_p_mag)?;
    let coop = params.cooperativity(g_mag);
    if coop > WEAK_CONTROL_MAX_COOPERATIVITY {
        log::warn!(
            "weak-control response used at cooperativity {coop} > {WEAK_CONTROL_MAX_COOPERATIVITY}"
        );
    }
    let cav = eps_p_mag / cavity_factor(params, delta_prime)
        + 2.0 * C64::from_polar(eps_a_mag * g_mag, phi_total)
            / (params.kappa * mechanical_factor(params, delta_prime));
    Ok(ResponsePoint::from_eps_t(
        delta_prime,
        params.kappa_ex() * cav / eps_p_mag,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    ClosedForm,
    WeakControl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::ClosedForm => "closed_form",
            Method::WeakControl => "weak_control",
        }
    }
}

/// Strictly increasing, finite, non-empty list of two-photon detunings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid(Vec<f64>);

impl DetuningGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(DetuningGrid(values))
    }

    /// `points` evenly spaced values on `[min, max]`; a single point sits at
    /// the midpoint.
    pub fn linspace(min: f64, max: f64, points: usize) -> Result<Self> {
        match points {
            0 => Err(Error::InvalidGrid("zero points".into())),
            1 => Self::new(vec![0.5 * (min + max)]),
            n => {
                if !(max > min) {
                    return Err(Error::InvalidGrid(format!("max {max} <= min {min}")));
                }
                let step = (max - min) / (n - 1) as f64;
                let mut v: Vec<f64> = (0..n).map(|i| min + step * i as f64).collect();
                v[n - 1] = max;
                Self::new(v)
            }
        }
    }

    /// `[-kappa, kappa]` with 2001 points.
    pub fn wide(params: &SystemParams) -> Self {
        Self::linspace(-params.kappa, params.kappa, 2001).expect("kappa > 0")
    }

    /// `[-5 gamma_m, 5 gamma_m]` with 2001 points.
    pub fn narrow(params: &SystemParams) -> Self {
        Self::linspace(-5.0 * params.gamma_m, 5.0 * params.gamma_m, 2001).expect("gamma_m > 0")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub working_point: WorkingPoint,
    pub method: Method,
    pub points: Vec<ResponsePoint>,
}

pub const SPECTRUM_CSV_HEADER: &str = "delta_prime,re_epsT,im_epsT,re_scriptT,im_scriptT,T";

impl Spectrum {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{SPECTRUM_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(p.delta_prime),
                fmt_f64(p.eps_t.re),
                fmt_f64(p.eps_t.im),
                fmt_f64(p.script_t.re),
                fmt_f64(p.script_t.im),
                fmt_f64(p.transmission)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    /// Point with the largest power transmission.
    pub fn max_transmission(&self) -> &ResponsePoint {
        self.points
            .iter()
            .max_by(|a, b| a.transmission.total_cmp(&b.transmission))
            .expect("spectra are non-empty")
    }
}

/// Evaluates one response point with the chosen method.
pub fn response_at(
    wp: &WorkingPoint,
    params: &SystemParams,
    drives: &DriveSet,
    method: Method,
    delta_prime: f64,
) -> Result<ResponsePoint> {
    let p = drives.eps_p.norm();
    let a = drives.eps_a.norm();
    match method {
        Method::Exact => response_exact(wp, params, drives.eps_p, drives.eps_a, delta_prime),
        Method::ClosedForm => {
            response_closed_form(wp, params, p, a, wp.phi_total, delta_prime).map(|r| r.point)
        }
        Method::WeakControl => {
            response_weak_control(params, p, a, wp.g.norm(), wp.phi_total, delta_prime)
        }
    }
}

/// Sweeps the response over `grid`. Results are ordered like the grid and do
/// not depend on thread scheduling.
pub fn compute_spectrum(
    wp: &WorkingPoint,
    params: &SystemParams,
    drives: &DriveSet,
    grid: &DetuningGrid,
    method: Method,
) -> Result<Spectrum> {
    let eval = |(i, &d): (usize, &f64)| {
        response_at(wp, params, drives, method, d).map_err(|e| e.at_grid_point(i))
    };
    #[cfg(feature = "parallel")]
    let points = {
        use rayon::prelude::*;
        grid.values()
            .par_iter()
            .enumerate()
            .map(eval)
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let points = grid
        .values()
        .iter()
        .enumerate()
        .map(eval)
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        working_point: *wp,
        method,
        points,
    })
}

/// `points` logarithmically spaced values on `[min, max]`, both positive.
pub fn log_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) || !max.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "log grid needs 0 < min < max (got {min}, {max})"
        )));
    }
    match points {
        0 => Err(Error::InvalidGrid("zero points".into())),
        1 => Ok(vec![(min * max).sqrt()]),
        n => {
            let (a, b) = (min.ln(), max.ln());
            let step = (b - a) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
            v[0] = min;
            v[n - 1] = max;
            Ok(v)
        }
    }
}

/// Response at one coupling strength of a sweep in `|G|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub y: f64,
    pub g: f64,
    pub point: ResponsePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSweep {
    pub phi_total: f64,
    pub method: Method,
    pub rows: Vec<CouplingRow>,
}

pub const COUPLING_CSV_HEADER: &str = "y,g,delta_prime,re_epsT,im_epsT,re_scriptT,im_scriptT,T";

impl CouplingSweep {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{COUPLING_CSV_HEADER}")?;
        for r in &self.rows {
            let p = &r.point;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_f64(r.y),
                fmt_f64(r.g),
                fmt_f64(p.delta_prime),
                fmt_f64(p.eps_t.re),
                fmt_f64(p.eps_t.im),
                fmt_f64(p.script_t.re),
                fmt_f64(p.script_t.im),
                fmt_f64(p.transmission)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    /// Rows for one amplitude ratio, in sweep order.
    pub fn for_ratio(&self, y: f64) -> impl Iterator<Item = &CouplingRow> {
        self.rows.iter().filter(move |r| r.y == y)
    }

    pub fn max_transmission(&self) -> Option<&CouplingRow> {
        self.rows
            .iter()
            .max_by(|a, b| a.point.transmission.total_cmp(&b.point.transmission))
    }

    pub fn min_transmission(&self) -> Option<&CouplingRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.point.transmission.total_cmp(&b.point.transmission))
    }
}

/// Transmission against real coupling `|G|` at fixed detuning, pinning the
/// effective detuning to `omega_m`, for each amplitude ratio in `ratios`.
pub fn sweep_coupling(
    params: &SystemParams,
    couplings: &[f64],
    ratios: &[f64],
    phi_total: f64,
    eps_p_mag: f64,
    delta_prime: f64,
    method: Method,
) -> Result<CouplingSweep> {
    if couplings.is_empty() || ratios.is_empty() {
        return Err(Error::InvalidGrid("empty coupling sweep".into()));
    }
    let mut rows = Vec::with_capacity(couplings.len() * ratios.len());
    for &y in ratios {
        for (i, &g) in couplings.iter().enumerate() {
            let point = crate::model::working_point_from_g(
                params,
                C64::new(g, 0.0),
                params.omega_m,
                y,
                phi_total,
                eps_p_mag,
            )
            .and_then(|op| {
                response_at(
                    &op.working_point,
                    &op.params,
                    &op.drives,
                    method,
                    delta_prime,
                )
            })
            .map_err(|e| e.at_grid_point(i))?;
            rows.push(CouplingRow { y, g, point });
        }
    }
    Ok(CouplingSweep {
        phi_total,
        method,
        rows,
    })
}
