use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::TruncationSpec;
use crate::error::{Error, Result};
use crate::model::C64;

pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const POSITIVITY_SLACK: f64 = 1e-8;

/// Density matrix on the truncated photon-phonon Fock space, stored as
/// `vec(rho)` in column-major order: `rho[i + D * j] = <i|rho|j>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDensityMatrix {
    pub truncation: TruncationSpec,
    data: Vec<C64>,
}

impl TruncatedDensityMatrix {
    pub fn from_vec(truncation: TruncationSpec, data: Vec<C64>) -> Result<Self> {
        let d = truncation.dim();
        if data.len() != d * d {
            return Err(Error::InvalidParameter(format!(
                "density matrix needs {} entries, got {}",
                d * d,
                data.len()
            )));
        }
        Ok(TruncatedDensityMatrix { truncation, data })
    }

    /// `|n_cav, n_mech><n_cav, n_mech|`.
    pub fn fock(truncation: TruncationSpec, n_cav: usize, n_mech: usize) -> Self {
        let d = truncation.dim();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        let k = truncation.index(n_cav, n_mech);
        data[k + d * k] = C64::new(1.0, 0.0);
        TruncatedDensityMatrix { truncation, data }
    }

    pub fn vacuum(truncation: TruncationSpec) -> Self {
        Self::fock(truncation, 0, 0)
    }

    pub fn dim(&self) -> usize {
        self.truncation.dim()
    }

    pub fn as_vec(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i + self.dim() * j]
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|k| self.data[k + d * k]).sum()
    }

    /// `max |rho - rho^dagger|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Replaces `rho` with `(rho + rho^dagger) / 2`.
    pub fn symmetrize(&mut self) {
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                let avg = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                self.data[i + d * j] = avg;
                self.data[j + d * i] = avg.conj();
            }
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr.norm() > 0.0) || !tr.re.is_finite() {
            return Err(Error::SolverFailure(format!("cannot normalize trace {tr}")));
        }
        self.data.iter_mut().for_each(|v| *v /= tr);
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim();
        let m = Mat::<C64>::from_fn(d, d, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let ev = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::SolverFailure(format!("eigenvalues: {e:?}")))?;
        Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Checks unit trace, Hermiticity and positivity to the module slacks.
    pub fn check(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOLERANCE {
            return Err(Error::SolverFailure(format!("trace {tr} differs from 1")));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(Error::SolverFailure(format!("non-Hermitian by {herm:e}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_SLACK {
            return Err(Error::SolverFailure(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `tr(rho a)`.
    pub fn cavity_mean(&self) -> C64 {
        let t = self.truncation;
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        // tr(rho a) = sum <k|rho|k'> <k'|a|k>, with a|n_c> = sqrt(n_c)|n_c - 1>
        for nc in 1..=t.n_cav {
            for nm in 0..=t.n_mech {
                let k = t.index(nc, nm);
                let kp = t.index(nc - 1, nm);
                acc += self.data[k + d * kp] * (nc as f64).sqrt();
            }
        }
        acc
    }

    /// `tr(rho b)`.
    pub fn mechanical_mean(&self) -> C64 {
        let t = self.truncation;
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for nc in 0..=t.n_cav {
            for nm in 1..=t.n_mech {
                let k = t.index(nc, nm);
                let kp = t.index(nc, nm - 1);
                acc += self.data[k + d * kp] * (nm as f64).sqrt();
            }
        }
        acc
    }

    /// `tr(rho a^dagger a)`.
    pub fn photon_number(&self) -> f64 {
        self.diagonal_weighted(|nc, _| nc as f64)
    }

    /// `tr(rho b^dagger b)`.
    pub fn phonon_number(&self) -> f64 {
        self.diagonal_weighted(|_, nm| nm as f64)
    }

    /// Probability in the top phonon Fock level, a measure of truncation loss.
    pub fn phonon_tail(&self) -> f64 {
        let top = self.truncation.n_mech;
        self.diagonal_weighted(|_, nm| if nm == top { 1.0 } else { 0.0 })
    }

    /// Probability in the top photon Fock level.
    pub fn photon_tail(&self) -> f64 {
        let top = self.truncation.n_cav;
        self.diagonal_weighted(|nc, _| if nc == top { 1.0 } else { 0.0 })
    }

    /// Phonon-number distribution of the mechanical marginal.
    pub fn phonon_distribution(&self) -> Vec<f64> {
        let t = self.truncation;
        let d = self.dim();
        (0..=t.n_mech)
            .map(|nm| {
                (0..=t.n_cav)
                    .map(|nc| {
                        let k = t.index(nc, nm);
                        self.data[k + d * k].re
                    })
                    .sum()
            })
            .collect()
    }

    fn diagonal_weighted(&self, w: impl Fn(usize, usize) -> f64) -> f64 {
        let t = self.truncation;
        let d = self.dim();
        let mut acc = 0.0;
        for nc in 0..=t.n_cav {
            for nm in 0..=t.n_mech {
                let k = t.index(nc, nm);
                acc += w(nc, nm) * self.data[k + d * k].re;
            }
        }
        acc
    }
}
