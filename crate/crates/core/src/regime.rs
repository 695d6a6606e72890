//! Regime classification, amplification windows and the linear-regime bound.

use serde::{Deserialize, Serialize};

use crate::model::{SystemParams, WorkingPoint};

pub const GWI_MIN_COOPERATIVITY: f64 = 1.0;
pub const WEAK_CONTROL_COOPERATIVITY: f64 = 0.01;

pub const LINEARITY_PASS: f64 = 0.1;
pub const LINEARITY_FAIL: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `C > 1`: Autler-Townes split, phase-dependent gain spectra.
    GwiLike,
    /// `C < 0.01`: bare Lorentzian with a narrow mechanical feature.
    WeakControl,
    Transitional,
}

impl Regime {
    pub fn from_cooperativity(c: f64) -> Self {
        if c > GWI_MIN_COOPERATIVITY {
            Regime::GwiLike
        } else if c < WEAK_CONTROL_COOPERATIVITY {
            Regime::WeakControl
        } else {
            Regime::Transitional
        }
    }
}

/// Open interval of `|G|`; `upper == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingWindow {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl CouplingWindow {
    pub fn contains(&self, g: f64) -> bool {
        g > self.lower && self.upper.is_none_or(|u| g < u)
    }
}

/// Resonant-probe features that only exist with a mechanical drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDependence {
    /// `T(0) > 1` window for total phase 0.
    pub amplification_in_phase: Option<CouplingWindow>,
    /// `T(0) > 1` window for total phase pi: `|G| > gamma_m / (2 y)`.
    pub amplification_out_of_phase: CouplingWindow,
    /// `sqrt(kappa gamma_m) / 2`, where the gain peaks (unit cooperativity).
    pub max_gain_coupling: f64,
    /// `y^2 kappa / gamma_m`.
    pub t_max_estimate: f64,
    /// Exact positive roots of `T(0) = 0` for total phase 0.
    pub perfect_absorption_in_phase: Vec<f64>,
    /// Exact positive roots of `T(0) = 0` for total phase pi.
    pub perfect_absorption_out_of_phase: Vec<f64>,
    /// Leading-order locations `(y kappa, gamma_m / (4 y))`, valid for
    /// `eta = 1` and `gamma_m << kappa`.
    pub perfect_absorption_approx: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub cooperativity: f64,
    pub regime: Regime,
    /// `None` when the mechanical drive is off (ordinary transparency).
    pub phase_dependence: Option<PhaseDependence>,
}

fn positive_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * s);
    let mut roots = if q == 0.0 {
        vec![0.0]
    } else {
        vec![q / a, c / q]
    };
    roots.retain(|r| *r > 0.0 && r.is_finite());
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

/// Classifies the working point and locates the resonant-probe special
/// couplings for amplitude ratio `y`.
///
/// With `eps_t(0) = eta kappa (gamma_m/2 + s y |G|) / (kappa gamma_m/4 + |G|^2)`
/// (`s = +1` for total phase 0, `-1` for pi) the windows follow from
/// `T > 1 <=> eps_t < 0 or eps_t > 2` and perfect absorption from
/// `eps_t = 1`.
pub fn classify_regime(wp: &WorkingPoint, params: &SystemParams, y: f64) -> RegimeReport {
    let kappa = params.kappa;
    let gamma = params.gamma_m;
    let eta = params.eta;
    let c = params.cooperativity(wp.g.norm());
    let phase_dependence = (y > 0.0).then(|| {
        // 2 g^2 - eta kappa y g + kappa gamma (1 - eta) / 2 < 0
        let disc = (eta * kappa * y).powi(2) - 4.0 * kappa * gamma * (1.0 - eta);
        let amplification_in_phase = (disc > 0.0).then(|| {
            let s = disc.sqrt();
            CouplingWindow {
                lower: ((eta * kappa * y - s) / 4.0).max(0.0),
                upper: Some((eta * kappa * y + s) / 4.0),
            }
        });
        let quarter_kg = kappa * gamma * (1.0 - 2.0 * eta) / 4.0;
        PhaseDependence {
            amplification_in_phase,
            amplification_out_of_phase: CouplingWindow {
                lower: gamma / (2.0 * y),
                upper: None,
            },
            max_gain_coupling: (kappa * gamma).sqrt() / 2.0,
            t_max_estimate: y * y * kappa / gamma,
            perfect_absorption_in_phase: positive_quadratic_roots(
                1.0,
                -eta * kappa * y,
                quarter_kg,
            ),
            perfect_absorption_out_of_phase: positive_quadratic_roots(
                1.0,
                eta * kappa * y,
                quarter_kg,
            ),
            perfect_absorption_approx: (y * kappa, gamma / (4.0 * y)),
        }
    });
    RegimeReport {
        cooperativity: c,
        regime: Regime::from_cooperativity(c),
        phase_dependence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearityCheck {
    /// `sqrt(T_max) |eps_p / eps_c|`.
    pub margin: f64,
    pub validity: Validity,
}

/// The amplified probe must stay small next to the control field.
pub fn linearity_bound(t_max: f64, eps_p_mag: f64, eps_c_mag: f64) -> LinearityCheck {
    let margin = if eps_c_mag > 0.0 {
        t_max.max(0.0).sqrt() * eps_p_mag / eps_c_mag
    } else {
        f64::INFINITY
    };
    let validity = if margin <= LINEARITY_PASS {
        Validity::Pass
    } else if margin <= LINEARITY_FAIL {
        Validity::Warn
    } else {
        Validity::Fail
    };
    LinearityCheck { margin, validity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::C64;

    fn wp_with(g: f64) -> WorkingPoint {
        WorkingPoint {
            c_s: C64::new(g / 1e-3, 0.0),
            b_s: C64::new(0.0, 0.0),
            delta_eff: 10.0,
            g: C64::new(g, 0.0),
            phi_total: 0.0,
            cooperativity: 4.0 * g * g / 1e-3,
            y: 1.0,
        }
    }

    #[test]
    fn labels() {
        assert_eq!(Regime::from_cooperativity(444.0), Regime::GwiLike);
        assert_eq!(Regime::from_cooperativity(1.0), Regime::Transitional);
        assert_eq!(Regime::from_cooperativity(1e-3), Regime::WeakControl);
        assert_eq!(Regime::from_cooperativity(0.01), Regime::Transitional);
    }

    #[test]
    fn windows_unit_ratio() {
        let p = SystemParams::reference(1.0);
        let r = classify_regime(&wp_with(1.0 / 3.0), &p, 1.0);
        assert_eq!(r.regime, Regime::GwiLike);
        let pd = r.phase_dependence.unwrap();
        let w0 = pd.amplification_in_phase.unwrap();
        assert_eq!(w0.lower, 0.0);
        assert!((w0.upper.unwrap() - 0.5).abs() < 1e-15);
        assert!((pd.amplification_out_of_phase.lower - 5e-4).abs() < 1e-18);
        assert_eq!(pd.amplification_out_of_phase.upper, None);
        assert!((pd.max_gain_coupling - 0.015811388300841896).abs() < 1e-15);
        assert_eq!(pd.perfect_absorption_approx, (1.0, 2.5e-4));
        // exact roots close to the leading-order values
        assert_eq!(pd.perfect_absorption_in_phase.len(), 1);
        assert!((pd.perfect_absorption_in_phase[0] - 1.0).abs() < 3e-4);
        assert_eq!(pd.perfect_absorption_out_of_phase.len(), 1);
        assert!((pd.perfect_absorption_out_of_phase[0] - 2.5e-4).abs() < 1e-7);
        assert!((pd.t_max_estimate - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn ratio_two_doubles_window() {
        let p = SystemParams::reference(1.0);
        let pd = classify_regime(&wp_with(0.1), &p, 2.0)
            .phase_dependence
            .unwrap();
        assert!((pd.amplification_in_phase.unwrap().upper.unwrap() - 1.0).abs() < 1e-15);
        assert!((pd.t_max_estimate - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn no_mechanical_drive() {
        let p = SystemParams::reference(1.0);
        let r = classify_regime(&wp_with(0.1), &p, 0.0);
        assert!(r.phase_dependence.is_none());
    }

    #[test]
    fn linearity_margins() {
        let c = linearity_bound(1000.0, 1e-4, 1.0);
        assert!((c.margin - 0.0031622776601683794).abs() < 1e-15);
        assert_eq!(c.validity, Validity::Pass);
        let c = linearity_bound(1000.0, 0.02, 1.0);
        assert!((c.margin - 0.6324555320336759).abs() < 1e-14);
        assert_eq!(c.validity, Validity::Fail);
        let c = linearity_bound(1.0, 0.2, 1.0);
        assert_eq!(c.margin, 0.2);
        assert_eq!(c.validity, Validity::Warn);
        assert_eq!(linearity_bound(1.0, 1.0, 0.0).validity, Validity::Fail);
    }
}
