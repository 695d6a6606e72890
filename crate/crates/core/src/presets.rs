//! Named parameter sets for the standard spectra, coupling sweeps and master
//! equation comparisons.
//!
//! All rates are in units of `kappa` on the reference device
//! (`omega_m = 10`, `gamma_m = 1e-3`, `g0 = 1e-3`) with the control on the red
//! sideband, so the effective detuning equals `omega_m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::TruncationSpec;
use crate::model::{working_point_from_g, OperatingPoint, SystemParams, C64};
use crate::response::DetuningGrid;

/// Probe amplitude shared by every preset.
pub const PRESET_PROBE: f64 = 1.0 / 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetMode {
    Spectrum,
    SweepG,
    Lindblad,
}

/// Evenly spaced detuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn wide(params: &SystemParams) -> Self {
        GridSpec {
            min: -params.kappa,
            max: params.kappa,
            points: 2001,
        }
    }

    pub fn narrow(params: &SystemParams) -> Self {
        GridSpec {
            min: -5.0 * params.gamma_m,
            max: 5.0 * params.gamma_m,
            points: 2001,
        }
    }

    pub fn build(&self) -> Result<DetuningGrid> {
        DetuningGrid::linspace(self.min, self.max, self.points)
    }
}

/// Logarithmic grid of real couplings `|G|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingGridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for CouplingGridSpec {
    fn default() -> Self {
        CouplingGridSpec {
            min: 1e-5,
            max: 10.0,
            points: 500,
        }
    }
}

impl CouplingGridSpec {
    pub fn build(&self) -> Result<Vec<f64>> {
        crate::response::log_spaced(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub mode: PresetMode,
    pub params: SystemParams,
    /// `|G|`; unused by coupling sweeps.
    pub g: f64,
    /// One total phase for spectra, several for sweeps and master-equation runs.
    pub phis: Vec<f64>,
    /// Amplitude ratios `|eps_a / eps_p|`.
    pub ys: Vec<f64>,
    pub eps_p: f64,
    pub grid: GridSpec,
    pub coupling_grid: Option<CouplingGridSpec>,
    pub n_th: f64,
    pub truncation: Option<TruncationSpec>,
}

impl Preset {
    /// Concrete drives for the first amplitude ratio and the given phase.
    pub fn operating_point(&self, phi: f64) -> Result<OperatingPoint> {
        working_point_from_g(
            &self.params,
            C64::new(self.g, 0.0),
            self.params.omega_m,
            self.ys[0],
            phi,
            self.eps_p,
        )
    }

    /// Resolves every phase and ratio to a validated operating point.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.phis.is_empty() || self.ys.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "preset {} is empty",
                self.name
            )));
        }
        self.grid.build()?;
        if let Some(c) = &self.coupling_grid {
            c.build()?;
        }
        if let Some(t) = &self.truncation {
            t.validate(crate::lindblad::DEFAULT_DIMENSION_CAP)?;
        }
        for &phi in &self.phis {
            for &y in &self.ys {
                working_point_from_g(
                    &self.params,
                    C64::new(self.g, 0.0),
                    self.params.omega_m,
                    y,
                    phi,
                    self.eps_p,
                )?;
            }
        }
        Ok(())
    }
}

fn spectrum(
    name: &'static str,
    description: &'static str,
    eta: f64,
    g: f64,
    phi: f64,
    narrow: bool,
) -> Preset {
    let params = SystemParams::reference(eta);
    let grid = if narrow {
        GridSpec::narrow(&params)
    } else {
        GridSpec::wide(&params)
    };
    Preset {
        name,
        description,
        mode: PresetMode::Spectrum,
        params,
        g,
        phis: vec![phi],
        ys: vec![1.0],
        eps_p: PRESET_PROBE,
        grid,
        coupling_grid: None,
        n_th: 0.0,
        truncation: None,
    }
}

fn sweep(name: &'static str, description: &'static str, phi: f64) -> Preset {
    let params = SystemParams::reference(1.0);
    Preset {
        name,
        description,
        mode: PresetMode::SweepG,
        params,
        g: 0.0,
        phis: vec![phi],
        ys: vec![0.5, 1.0, 2.0],
        eps_p: PRESET_PROBE,
        grid: GridSpec {
            min: 0.0,
            max: 0.0,
            points: 1,
        },
        coupling_grid: Some(CouplingGridSpec::default()),
        n_th: 0.0,
        truncation: None,
    }
}

fn lindblad(name: &'static str, description: &'static str, phis: Vec<f64>) -> Preset {
    let params = SystemParams::reference(0.05);
    Preset {
        name,
        description,
        mode: PresetMode::Lindblad,
        params,
        g: 1.0 / 3.0,
        phis,
        ys: vec![1.0],
        eps_p: PRESET_PROBE,
        grid: GridSpec {
            min: -1.0,
            max: 1.0,
            points: 21,
        },
        coupling_grid: None,
        n_th: 10.0,
        truncation: Some(TruncationSpec {
            n_cav: 5,
            n_mech: 50,
        }),
    }
}

/// The full catalog, in display order.
pub fn catalog() -> Vec<Preset> {
    let gm = 1e-3;
    let unit_c = f64::sqrt(gm) / 2.0;
    vec![
        spectrum(
            "fig2a",
            "strong control |G| = 1/3, total phase 0",
            0.05,
            1.0 / 3.0,
            0.0,
            false,
        ),
        spectrum(
            "fig2b",
            "strong control |G| = 1/3, total phase pi/2",
            0.05,
            1.0 / 3.0,
            PI / 2.0,
            false,
        ),
        spectrum(
            "fig2c",
            "strong control |G| = 1/3, total phase pi",
            0.05,
            1.0 / 3.0,
            PI,
            false,
        ),
        spectrum(
            "fig2d",
            "strong control |G| = 1/3, total phase 3pi/2",
            0.05,
            1.0 / 3.0,
            1.5 * PI,
            false,
        ),
        spectrum(
            "fig3a",
            "weak control |G| = gamma_m/2, phase 0, narrow window",
            0.05,
            gm / 2.0,
            0.0,
            true,
        ),
        spectrum(
            "fig3b",
            "weak control |G| = gamma_m/2, phase pi, narrow window",
            0.05,
            gm / 2.0,
            PI,
            true,
        ),
        spectrum(
            "fig3c",
            "weak control |G| = gamma_m, phase pi, narrow window",
            0.05,
            gm,
            PI,
            true,
        ),
        spectrum(
            "fig3d",
            "weak control |G| = gamma_m/2, phase 0, wide window",
            0.05,
            gm / 2.0,
            0.0,
            false,
        ),
        spectrum(
            "fig3e",
            "weak control |G| = gamma_m/2, phase pi, wide window",
            0.05,
            gm / 2.0,
            PI,
            false,
        ),
        spectrum(
            "fig3f",
            "weak control |G| = gamma_m, phase pi, wide window",
            0.05,
            gm,
            PI,
            false,
        ),
        sweep(
            "fig4a",
            "resonant transmission against |G|, phase 0, y in {0.5, 1, 2}",
            0.0,
        ),
        sweep(
            "fig4b",
            "resonant transmission against |G|, phase pi, y in {0.5, 1, 2}",
            PI,
        ),
        spectrum(
            "fig4c",
            "over-coupled, unit cooperativity, phase 0",
            1.0,
            unit_c,
            0.0,
            false,
        ),
        spectrum(
            "fig4d",
            "over-coupled, unit cooperativity, phase pi (maximal gain)",
            1.0,
            unit_c,
            PI,
            false,
        ),
        spectrum(
            "fig4e",
            "over-coupled, |G| = kappa, phase 0 (perfect absorption)",
            1.0,
            1.0,
            0.0,
            false,
        ),
        spectrum(
            "fig4f",
            "over-coupled, |G| = gamma_m/4, phase pi (perfect absorption)",
            1.0,
            gm / 4.0,
            PI,
            false,
        ),
        lindblad(
            "fig5a",
            "master equation with N_th = 10, phases 0 and pi",
            vec![0.0, PI],
        ),
        lindblad(
            "fig5b",
            "master equation with N_th = 10, phases pi/2 and 3pi/2",
            vec![PI / 2.0, 1.5 * PI],
        ),
    ]
}

pub fn find(name: &str) -> Option<Preset> {
    catalog()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

/// Closest catalog name by edit distance, for "did you mean" hints.
pub fn suggest(name: &str) -> Option<&'static str> {
    let lower = name.to_ascii_lowercase();
    catalog()
        .into_iter()
        .map(|p| (edit_distance(&lower, p.name), p.name))
        .min_by_key(|(d, _)| *d)
        .filter(|(d, _)| *d <= 3)
        .map(|(_, n)| n)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
