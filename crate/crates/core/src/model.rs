//! Device parameters, drive fields and the strong-control steady state.
//!
//! Rates (`kappa`, `gamma_m`, `omega_m`, `g0`, drive amplitudes, detunings)
//! share one frequency unit. Every formula in the crate is written for a
//! general `kappa`; [`SystemParams::from_units`] and
//! [`SystemParams::in_kappa_units`] give the conventional form in which all
//! rates are expressed in units of the cavity linewidth.

use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this ratio `omega_m / kappa` the rotating-wave response formulas are
/// flagged as unreliable.
pub const DEFAULT_RESOLVED_SIDEBAND_RATIO: f64 = 5.0;

/// Maximum `|eps_p| / |eps_c|` (and `|eps_a| / |eps_c|`) accepted as "weak".
pub const DEFAULT_WEAK_DRIVE_RATIO: f64 = 0.1;

const FIXED_POINT_RELAXATION: f64 = 0.5;
const FIXED_POINT_MAX_ITER: usize = 10_000;
const FIXED_POINT_TOL: f64 = 1e-13;

/// How the rates handed to [`SystemParams::from_units`] are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Already divided by the cavity decay rate.
    #[default]
    Kappa,
    /// Absolute rates; every value is divided by `kappa` on construction.
    Absolute,
}

/// Rates and couplings of the optomechanical device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub kappa: f64,
    pub gamma_m: f64,
    pub omega_m: f64,
    pub g0: f64,
    /// External coupling fraction, `kappa_ex = eta * kappa`.
    pub eta: f64,
    /// Bare control-cavity detuning. Optional because presets fix the
    /// effective detuning and derive this value.
    pub delta0: Option<f64>,
}

impl SystemParams {
    pub fn new(kappa: f64, gamma_m: f64, omega_m: f64, g0: f64, eta: f64) -> Result<Self> {
        let p = SystemParams {
            kappa,
            gamma_m,
            omega_m,
            g0,
            eta,
            delta0: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from rates in the given units. The result is always
    /// expressed in units of `kappa` (so `kappa == 1`). With
    /// [`Units::Kappa`] the `kappa` argument is ignored.
    pub fn from_units(
        units: Units,
        kappa: f64,
        gamma_m: f64,
        omega_m: f64,
        g0: f64,
        eta: f64,
    ) -> Result<Self> {
        match units {
            Units::Kappa => Self::new(1.0, gamma_m, omega_m, g0, eta),
            Units::Absolute => Ok(Self::new(kappa, gamma_m, omega_m, g0, eta)?.in_kappa_units()),
        }
    }

    /// Reference device used throughout the figure presets:
    /// `omega_m = 10 kappa`, `gamma_m = kappa / 1000`, `g0 = 1e-3 kappa`.
    pub fn reference(eta: f64) -> Self {
        SystemParams {
            kappa: 1.0,
            gamma_m: 1e-3,
            omega_m: 10.0,
            g0: 1e-3,
            eta,
            delta0: None,
        }
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = Some(delta0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa, self.gamma_m, self.omega_m, self.g0, self.eta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.delta0.is_some_and(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter("non-finite rate".into()));
        }
        if self.kappa <= 0.0 || self.gamma_m <= 0.0 || self.omega_m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa, gamma_m and omega_m must be positive (got {}, {}, {})",
                self.kappa, self.gamma_m, self.omega_m
            )));
        }
        if self.g0 < 0.0 {
            return Err(Error::InvalidParameter(format!("g0 = {} < 0", self.g0)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta = {} outside (0, 1]",
                self.eta
            )));
        }
        Ok(())
    }

    /// Same device with every rate divided by `kappa`.
    pub fn in_kappa_units(&self) -> Self {
        let k = self.kappa;
        SystemParams {
            kappa: 1.0,
            gamma_m: self.gamma_m / k,
            omega_m: self.omega_m / k,
            g0: self.g0 / k,
            eta: self.eta,
            delta0: self.delta0.map(|d| d / k),
        }
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SystemParams {
            kappa: self.kappa * factor,
            gamma_m: self.gamma_m * factor,
            omega_m: self.omega_m * factor,
            g0: self.g0 * factor,
            eta: self.eta,
            delta0: self.delta0.map(|d| d * factor),
        }
    }

    pub fn kappa_ex(&self) -> f64 {
        self.eta * self.kappa
    }

    pub fn resolved_sideband(&self, threshold: f64) -> bool {
        self.omega_m / self.kappa > threshold
    }

    /// `arctan(kappa / (2 omega_m))`, the offset between the drive phases and
    /// the physical total phase.
    pub fn phase_offset(&self) -> f64 {
        (self.kappa / (2.0 * self.omega_m)).atan()
    }

    /// `4 |G|^2 / (kappa gamma_m)`.
    pub fn cooperativity(&self, g_mag: f64) -> f64 {
        4.0 * g_mag * g_mag / (self.kappa * self.gamma_m)
    }

    pub(crate) fn warn_if_unresolved(&self) {
        if !self.resolved_sideband(DEFAULT_RESOLVED_SIDEBAND_RATIO) {
            log::warn!(
                "omega_m / kappa = {} is below {}: rotating-wave response is unreliable",
                self.omega_m / self.kappa,
                DEFAULT_RESOLVED_SIDEBAND_RATIO
            );
        }
    }
}

/// Control, probe and mechanical-drive amplitudes plus the two-photon detuning
/// `delta_prime = omega_a - omega_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSet {
    pub eps_c: C64,
    pub eps_p: C64,
    pub eps_a: C64,
    pub delta_prime: f64,
}

impl DriveSet {
    pub fn new(eps_c: C64, eps_p: C64, eps_a: C64, delta_prime: f64) -> Self {
        DriveSet {
            eps_c,
            eps_p,
            eps_a,
            delta_prime,
        }
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Self {
        self.delta_prime = delta_prime;
        self
    }

    /// `|eps_a / eps_p|`; zero when the mechanical drive is off.
    pub fn amplitude_ratio(&self) -> f64 {
        let a = self.eps_a.norm();
        if a == 0.0 {
            0.0
        } else {
            a / self.eps_p.norm()
        }
    }

    /// Soft check that both weak drives are at most `ratio * |eps_c|`.
    pub fn is_weak(&self, ratio: f64) -> bool {
        let c = self.eps_c.norm();
        self.eps_p.norm() <= ratio * c && self.eps_a.norm() <= ratio * c
    }
}

/// Steady state of the strongly driven system and the linear-response
/// quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    pub c_s: C64,
    pub b_s: C64,
    /// Effective detuning `delta0 - g0 (b_s + b_s*)`.
    pub delta_eff: f64,
    /// Linearized coupling `g0 c_s`.
    pub g: C64,
    /// Total phase in `[0, 2 pi)`.
    pub phi_total: f64,
    pub cooperativity: f64,
    /// `|eps_a / eps_p|`.
    pub y: f64,
}

/// Reduces an angle to `[0, 2 pi)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn phase(z: C64) -> f64 {
    if z == C64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

/// `arctan(kappa / 2 omega_m) + phi_c + phi_a - phi_p`, wrapped.
pub fn total_phase(params: &SystemParams, drives: &DriveSet) -> f64 {
    wrap_phase(
        params.phase_offset() + phase(drives.eps_c) + phase(drives.eps_a) - phase(drives.eps_p),
    )
}

fn mechanical_amplitude(params: &SystemParams, c_s: C64) -> C64 {
    I * params.g0 * c_s.norm_sqr() / C64::new(params.gamma_m / 2.0, params.omega_m)
}

fn assemble(params: &SystemParams, drives: &DriveSet, delta_eff: f64) -> WorkingPoint {
    let c_s = drives.eps_c / C64::new(params.kappa / 2.0, delta_eff);
    let b_s = mechanical_amplitude(params, c_s);
    let g = params.g0 * c_s;
    WorkingPoint {
        c_s,
        b_s,
        delta_eff,
        g,
        phi_total: total_phase(params, drives),
        cooperativity: params.cooperativity(g.norm()),
        y: drives.amplitude_ratio(),
    }
}

/// Relative mismatch of the self-consistency condition for `wp`.
pub fn steady_state_residual(params: &SystemParams, wp: &WorkingPoint) -> f64 {
    let delta0 = params.delta0.unwrap_or(f64::NAN);
    let rhs = delta0 - params.g0 * 2.0 * wp.b_s.re;
    let scale = wp.delta_eff.abs().max(delta0.abs()).max(params.kappa);
    (wp.delta_eff - rhs).abs() / scale
}

/// The self-consistency condition reduces to the cubic
/// `(delta0 - x)(x^2 + kappa^2/4) = k` in the effective detuning `x`, with
/// `k = 2 g0^2 omega_m |eps_c|^2 / (omega_m^2 + gamma_m^2 / 4)`.
struct DetuningCubic {
    delta0: f64,
    quarter_kappa_sq: f64,
    k: f64,
}

impl DetuningCubic {
    fn new(params: &SystemParams, delta0: f64, eps_c: C64) -> Self {
        let om = params.omega_m;
        let k = 2.0 * params.g0 * params.g0 * om * eps_c.norm_sqr()
            / (om * om + params.gamma_m * params.gamma_m / 4.0);
        DetuningCubic {
            delta0,
            quarter_kappa_sq: params.kappa * params.kappa / 4.0,
            k,
        }
    }

    fn map(&self, x: f64) -> f64 {
        self.delta0 - self.k / (x * x + self.quarter_kappa_sq)
    }

    fn value(&self, x: f64) -> f64 {
        (self.delta0 - x) * (x * x + self.quarter_kappa_sq) - self.k
    }

    fn derivative(&self, x: f64) -> f64 {
        -(x * x + self.quarter_kappa_sq) + 2.0 * x * (self.delta0 - x)
    }

    fn polish(&self, mut x: f64) -> f64 {
        for _ in 0..50 {
            let d = self.derivative(x);
            if d == 0.0 {
                break;
            }
            let step = self.value(x) / d;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        x
    }

    /// Real roots of `x^3 - delta0 x^2 + (kappa^2/4) x - (delta0 kappa^2/4 - k)`,
    /// ascending, Newton-polished.
    fn real_roots(&self) -> Vec<f64> {
        let a = -self.delta0;
        let b = self.quarter_kappa_sq;
        let c = -(self.delta0 * self.quarter_kappa_sq - self.k);
        let mut roots = real_cubic_roots(a, b, c);
        for r in roots.iter_mut() {
            *r = self.polish(*r);
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * x.abs().max(1.0));
        roots
    }
}

/// Real roots of the monic cubic `x^3 + a x^2 + b x + c`.
fn real_cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let shift = a / 3.0;
    if r * r < q * q * q {
        let theta = (r / q.powf(1.5)).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        vec![
            m * (theta / 3.0).cos() - shift,
            m * ((theta + TAU) / 3.0).cos() - shift,
            m * ((theta - TAU) / 3.0).cos() - shift,
        ]
    } else {
        let big_a = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let big_b = if big_a == 0.0 { 0.0 } else { q / big_a };
        vec![big_a + big_b - shift]
    }
}

/// Linear stability of the full (non rotating-wave) fluctuation dynamics
/// around a steady state.
pub fn is_linearly_stable(params: &SystemParams, wp: &WorkingPoint) -> bool {
    let cav = C64::new(params.kappa / 2.0, wp.delta_eff);
    let mech = C64::new(params.gamma_m / 2.0, params.omega_m);
    let g = wp.g;
    // state ordering: (Re dc, Im dc, Re db, Im db)
    let flow = |dc: C64, db: C64| -> (C64, C64) {
        let x = db + db.conj();
        let dc_dot = -cav * dc + I * g * x;
        let db_dot = -mech * db + I * (g * dc.conj() + g.conj() * dc);
        (dc_dot, db_dot)
    };
    let basis = [
        (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        (I, C64::new(0.0, 0.0)),
        (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        (C64::new(0.0, 0.0), I),
    ];
    let jac = Mat::<f64>::from_fn(4, 4, |row, col| {
        let (dc, db) = flow(basis[col].0, basis[col].1);
        [dc.re, dc.im, db.re, db.im][row]
    });
    match jac.eigenvalues() {
        Ok(ev) => ev.iter().all(|l| l.re < 0.0),
        Err(_) => false,
    }
}

/// Self-consistent steady state for the control field alone.
///
/// Runs a damped fixed-point iteration on the effective detuning and
/// cross-checks it against the roots of the equivalent cubic. When the cubic
/// has several linearly stable roots the solver refuses to choose and returns
/// [`Error::Multistable`].
pub fn solve_steady_state(params: &SystemParams, drives: &DriveSet) -> Result<WorkingPoint> {
    params.validate()?;
    params.warn_if_unresolved();
    let delta0 = params.delta0.ok_or_else(|| {
        Error::InvalidParameter("delta0 is required to solve the steady state".into())
    })?;
    let cubic = DetuningCubic::new(params, delta0, drives.eps_c);

    let mut x = delta0;
    let mut last_update = f64::INFINITY;
    let mut converged = false;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = (1.0 - FIXED_POINT_RELAXATION) * x + FIXED_POINT_RELAXATION * cubic.map(x);
        last_update = (next - x).abs();
        x = next;
        if last_update <= FIXED_POINT_TOL * x.abs().max(params.kappa) {
            converged = true;
            break;
        }
    }

    let roots = cubic.real_roots();
    let delta_eff = if roots.len() <= 1 {
        match (roots.first(), converged) {
            (Some(&r), _) => r,
            (None, true) => cubic.polish(x),
            (None, false) => {
                return Err(Error::NonConvergence {
                    iterations: FIXED_POINT_MAX_ITER,
                    last_update,
                })
            }
        }
    } else {
        let stable: Vec<f64> = roots
            .iter()
            .copied()
            .filter(|&r| is_linearly_stable(params, &assemble(params, drives, r)))
            .collect();
        match stable.len() {
            0 => {
                log::warn!("no linearly stable steady state among roots {roots:?}");
                if !converged {
                    return Err(Error::NonConvergence {
                        iterations: FIXED_POINT_MAX_ITER,
                        last_update,
                    });
                }
                cubic.polish(x)
            }
            1 => stable[0],
            _ => return Err(Error::Multistable { roots: stable }),
        }
    };

    let wp = assemble(params, drives, delta_eff);
    let residual = steady_state_residual(params, &wp);
    if residual > 1e-12 {
        return Err(Error::NonConvergence {
            iterations: FIXED_POINT_MAX_ITER,
            last_update: residual,
        });
    }
    Ok(wp)
}

/// Concrete device, drives and working point realizing a requested
/// linearized coupling, effective detuning, amplitude ratio and total phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Input parameters with `delta0` back-solved.
    pub params: SystemParams,
    pub drives: DriveSet,
    pub working_point: WorkingPoint,
}

/// Inverts the steady state: chooses `eps_c`, `eps_p`, `eps_a` and `delta0` so
/// that `g0 c_s = g` at effective detuning `delta_eff`, `|eps_a/eps_p| = y`
/// and the total phase is `phi_total`.
///
/// Only the total phase is physical, so the probe phase is fixed to zero, the
/// control phase follows from `arg g`, and the mechanical-drive phase absorbs
/// the rest.
pub fn working_point_from_g(
    params: &SystemParams,
    g: C64,
    delta_eff: f64,
    y: f64,
    phi_total: f64,
    eps_p_mag: f64,
) -> Result<OperatingPoint> {
    params.validate()?;
    if !(eps_p_mag > 0.0) || !eps_p_mag.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "probe amplitude must be positive (got {eps_p_mag})"
        )));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("amplitude ratio y = {y}")));
    }
    if !g.re.is_finite() || !g.im.is_finite() || !delta_eff.is_finite() || !phi_total.is_finite() {
        return Err(Error::InvalidParameter("non-finite working point".into()));
    }
    let c_s = if g.norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else if params.g0 > 0.0 {
        g / params.g0
    } else {
        return Err(Error::InvalidParameter("nonzero G requires g0 > 0".into()));
    };
    let eps_c = c_s * C64::new(params.kappa / 2.0, delta_eff);
    let b_s = mechanical_amplitude(params, c_s);
    let delta0 = delta_eff + 2.0 * params.g0 * b_s.re;

    let phi_c = phase(eps_c);
    let phi_a = phi_total - params.phase_offset() - phi_c;
    let eps_p = C64::new(eps_p_mag, 0.0);
    let eps_a = C64::from_polar(y * eps_p_mag, phi_a);
    let drives = DriveSet::new(eps_c, eps_p, eps_a, 0.0);
    let params = params.with_delta0(delta0);
    let mut working_point = assemble(&params, &drives, delta_eff);
    // keep the requested coupling bit-exact rather than g0 * (g / g0)
    working_point.g = g;
    working_point.phi_total = wrap_phase(phi_total);
    working_point.y = y;
    Ok(OperatingPoint {
        params,
        drives,
        working_point,
    })
}

/// `sqrt(kappa gamma_m) / 2`, the coupling at unit cooperativity.
pub fn unit_cooperativity_coupling(params: &SystemParams) -> f64 {
    (params.kappa * params.gamma_m).sqrt() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SystemParams::new(0.0, 1e-3, 10.0, 1e-3, 0.5).is_err());
        assert!(SystemParams::new(1.0, -1e-3, 10.0, 1e-3, 0.5).is_err());
        assert!(SystemParams::new(1.0, 1e-3, 10.0, -1.0, 0.5).is_err());
        assert!(SystemParams::new(1.0, 1e-3, 10.0, 1e-3, 0.0).is_err());
        assert!(SystemParams::new(1.0, 1e-3, 10.0, 1e-3, 1.5).is_err());
        assert!(SystemParams::new(1.0, 1e-3, 10.0, 1e-3, 1.0).is_ok());
    }

    #[test]
    fn absolute_units_normalize() {
        let p =
            SystemParams::from_units(Units::Absolute, 2.0e6, 2.0e3, 2.0e7, 2.0e3, 0.05).unwrap();
        assert_eq!(p.kappa, 1.0);
        assert!(close(p.gamma_m, 1e-3, 1e-15));
        assert!(close(p.omega_m, 10.0, 1e-15));
        let q = SystemParams::from_units(Units::Kappa, 123.0, 1e-3, 10.0, 1e-3, 0.05).unwrap();
        assert_eq!(q.kappa, 1.0);
    }

    #[test]
    fn zero_coupling_is_bare_lorentzian() {
        let p = SystemParams::new(1.0, 1e-3, 10.0, 0.0, 0.05)
            .unwrap()
            .with_delta0(3.0);
        let eps_c = C64::new(2.0, -1.0);
        let d = DriveSet::new(eps_c, C64::new(0.1, 0.0), C64::new(0.0, 0.0), 0.0);
        let wp = solve_steady_state(&p, &d).unwrap();
        assert_eq!(wp.b_s, C64::new(0.0, 0.0));
        assert_eq!(wp.delta_eff, 3.0);
        assert_eq!(wp.c_s, eps_c / C64::new(0.5, 3.0));
    }

    #[test]
    fn no_control_field() {
        let p = SystemParams::reference(0.05).with_delta0(10.0);
        let d = DriveSet::new(
            C64::new(0.0, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.1, 0.0),
            0.0,
        );
        let wp = solve_steady_state(&p, &d).unwrap();
        assert_eq!(wp.c_s.norm(), 0.0);
        assert_eq!(wp.b_s.norm(), 0.0);
        assert_eq!(wp.g.norm(), 0.0);
    }

    #[test]
    fn missing_delta0() {
        let p = SystemParams::reference(0.05);
        let d = DriveSet::new(
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            0.0,
        );
        assert!(matches!(
            solve_steady_state(&p, &d),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn invert_for_third_kappa_coupling() {
        // |c_s| = (1/3) / 1e-3, |eps_c| = |c_s| |i 10 + 1/2|
        let p = SystemParams::reference(0.05);
        let op = working_point_from_g(&p, C64::new(1.0 / 3.0, 0.0), 10.0, 1.0, 0.0, 1.0).unwrap();
        let cs = 1000.0 / 3.0;
        assert!(close(op.working_point.c_s.norm(), cs, 1e-14));
        assert!(close(op.drives.eps_c.norm(), cs * 100.25_f64.sqrt(), 1e-14));
        assert!(close(op.drives.eps_c.norm(), 3337.5, 1e-4));

        let wp = solve_steady_state(&op.params, &op.drives).unwrap();
        assert!(close(wp.g.norm(), 1.0 / 3.0, 1e-10));
        assert!(close(wp.delta_eff, 10.0, 1e-10));
        assert!(steady_state_residual(&op.params, &wp) <= 1e-12);
    }

    #[test]
    fn zero_coupling_inversion() {
        let p = SystemParams::reference(0.05);
        let op = working_point_from_g(&p, C64::new(0.0, 0.0), 10.0, 1.0, 1.0, 0.2).unwrap();
        assert_eq!(op.drives.eps_c.norm(), 0.0);
        assert!(close(op.drives.eps_a.norm(), op.drives.eps_p.norm(), 1e-15));
    }

    #[test]
    fn zero_phases_give_offset_phase() {
        let p = SystemParams::reference(0.05);
        let d = DriveSet::new(
            C64::new(5.0, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.1, 0.0),
            0.0,
        );
        assert!(close(total_phase(&p, &d), 0.05_f64.atan(), 1e-15));
        assert!(close(total_phase(&p, &d), 0.049958395721942765, 1e-15));
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!(close(wrap_phase(-0.5), TAU - 0.5, 1e-15));
        assert!(close(wrap_phase(7.0), 7.0 - TAU, 1e-15));
        assert!(wrap_phase(-1e-17) < TAU);
    }

    #[test]
    fn cubic_roots_match_known_polynomial() {
        // (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        let r = real_cubic_roots(-6.0, 11.0, -6.0);
        let mut r = r;
        r.sort_by(f64::total_cmp);
        assert!(close(r[0], 1.0, 1e-12) && close(r[1], 2.0, 1e-12) && close(r[2], 3.0, 1e-12));
        assert_eq!(real_cubic_roots(0.0, 1.0, 0.0).len(), 1);
    }

    #[test]
    fn strong_drive_reports_multistability() {
        // Deep in the bistable region of the detuning cubic.
        let p = SystemParams::new(1.0, 1e-3, 10.0, 1e-3, 0.05)
            .unwrap()
            .with_delta0(12.0);
        let eps_c = C64::new(1.3e4, 0.0);
        let d = DriveSet::new(eps_c, C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        let cubic = DetuningCubic::new(&p, 12.0, eps_c);
        let roots = cubic.real_roots();
        assert_eq!(roots.len(), 3, "{roots:?}");
        match solve_steady_state(&p, &d) {
            Err(Error::Multistable { roots }) => assert!(roots.len() >= 2),
            other => {
                // only one root stable is also legitimate physics; it must then be an outer root
                let wp = other.unwrap();
                assert!(wp.delta_eff == roots[0] || wp.delta_eff == roots[2]);
            }
        }
    }

    #[test]
    fn red_sideband_point_is_stable() {
        let p = SystemParams::reference(0.05);
        let op = working_point_from_g(&p, C64::new(1.0 / 3.0, 0.0), 10.0, 1.0, 0.0, 1.0).unwrap();
        assert!(is_linearly_stable(&op.params, &op.working_point));
        // blue-detuned control with a large coupling is parametrically unstable
        let blue = working_point_from_g(&p, C64::new(0.2, 0.0), -10.0, 1.0, 0.0, 1.0).unwrap();
        assert!(!is_linearly_stable(&blue.params, &blue.working_point));
    }
}
