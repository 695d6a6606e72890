//! Two-mode master equation on a truncated Fock space.
//!
//! The fluctuation modes evolve under the beam-splitter Hamiltonian
//!
//! ```text
//! H = -D' (a^dagger a + b^dagger b) - (G a^dagger b + G* a b^dagger)
//!     + (i eps_p a^dagger + i eps_a b^dagger + h.c.)
//! ```
//!
//! with cavity decay `kappa D[a]` and thermal mechanical damping
//! `gamma_m (N + 1) D[b] + gamma_m N D[b^dagger]`. Because the model is bilinear,
//! its first moments obey the linear response equations exactly, which makes
//! the steady-state solve an independent check of the analytic spectra.

mod krylov;
mod solve;
mod state;

use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use solve::{steady_state, steady_state_with, SteadyStateMethod};
pub use state::{TruncatedDensityMatrix, HERMITICITY_TOLERANCE, POSITIVITY_SLACK, TRACE_TOLERANCE};

use crate::error::{Error, Result};
use crate::model::{SystemParams, C64, I};
use crate::ode::{integrate, sample_times, StepControls};
use crate::response::{linear_means, DetuningGrid, ResponsePoint};
use crate::table::fmt_f64;

pub const DEFAULT_DIMENSION_CAP: usize = 4096;
pub const STEADY_STATE_RESIDUAL: f64 = 1e-10;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// Photon Fock levels `0..=n_cav`.
    pub n_cav: usize,
    /// Phonon Fock levels `0..=n_mech`.
    pub n_mech: usize,
}

impl TruncationSpec {
    pub fn new(n_cav: usize, n_mech: usize) -> Result<Self> {
        let t = TruncationSpec { n_cav, n_mech };
        t.validate(DEFAULT_DIMENSION_CAP)?;
        Ok(t)
    }

    /// Cutoffs used for a thermal occupation `n_th`: `(5, 8)` at zero
    /// temperature, otherwise enough phonon levels to leave a thermal tail
    /// below `1e-3`.
    pub fn default_for(n_th: f64) -> Self {
        if n_th <= 0.0 {
            return TruncationSpec {
                n_cav: 5,
                n_mech: 8,
            };
        }
        let ratio = n_th / (n_th + 1.0);
        let levels = ((1e-3f64).ln() / ratio.ln()).ceil() as usize;
        TruncationSpec {
            n_cav: 5,
            n_mech: levels.max(8),
        }
    }

    pub fn dim(&self) -> usize {
        (self.n_cav + 1) * (self.n_mech + 1)
    }

    /// Index of `|n_cav, n_mech>` in the product basis.
    pub fn index(&self, n_cav: usize, n_mech: usize) -> usize {
        n_cav * (self.n_mech + 1) + n_mech
    }

    pub fn validate(&self, cap: usize) -> Result<()> {
        if self.n_cav < 1 || self.n_mech < 1 {
            return Err(Error::InvalidParameter(format!(
                "truncation ({}, {}) needs at least one excitation per mode",
                self.n_cav, self.n_mech
            )));
        }
        let dim = self.dim();
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(())
    }

    fn contains(&self, other: &TruncationSpec) -> bool {
        self.n_cav >= other.n_cav && self.n_mech >= other.n_mech
    }
}

/// Coefficients of the fluctuation master equation, all in the frame
/// rotating at the probe frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel {
    pub delta_prime: f64,
    pub g: C64,
    pub eps_p: C64,
    pub eps_a: C64,
    pub kappa: f64,
    pub gamma_m: f64,
    /// Mean thermal phonon number.
    pub n_th: f64,
}

impl LindbladModel {
    pub fn new(
        params: &SystemParams,
        g: C64,
        eps_p: C64,
        eps_a: C64,
        delta_prime: f64,
        n_th: f64,
    ) -> Result<Self> {
        let m = LindbladModel {
            delta_prime,
            g,
            eps_p,
            eps_a,
            kappa: params.kappa,
            gamma_m: params.gamma_m,
            n_th,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Self {
        self.delta_prime = delta_prime;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (k, down, up) = self.rates();
        if !(k >= 0.0 && down >= 0.0 && up >= 0.0) || !(k + down + up).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dissipator rates must be nonnegative (kappa {k}, gamma_m (N+1) {down}, gamma_m N {up})"
            )));
        }
        let finite = [self.g, self.eps_p, self.eps_a]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite || !self.delta_prime.is_finite() {
            return Err(Error::InvalidParameter(
                "non-finite Hamiltonian coefficient".into(),
            ));
        }
        Ok(())
    }

    /// `(kappa, gamma_m (N_th + 1), gamma_m N_th)`.
    pub fn rates(&self) -> (f64, f64, f64) {
        (
            self.kappa,
            self.gamma_m * (self.n_th + 1.0),
            self.gamma_m * self.n_th,
        )
    }
}

type Op = Vec<(usize, usize, C64)>;

fn lowering_cavity(t: &TruncationSpec) -> Op {
    let mut op = Vec::new();
    for nc in 1..=t.n_cav {
        for nm in 0..=t.n_mech {
            op.push((
                t.index(nc - 1, nm),
                t.index(nc, nm),
                C64::new((nc as f64).sqrt(), 0.0),
            ));
        }
    }
    op
}

fn lowering_mech(t: &TruncationSpec) -> Op {
    let mut op = Vec::new();
    for nc in 0..=t.n_cav {
        for nm in 1..=t.n_mech {
            op.push((
                t.index(nc, nm - 1),
                t.index(nc, nm),
                C64::new((nm as f64).sqrt(), 0.0),
            ));
        }
    }
    op
}

fn adjoint(op: &Op) -> Op {
    op.iter().map(|&(r, c, v)| (c, r, v.conj())).collect()
}

/// `O^dagger O` for an operator with at most one entry per column, which is
/// diagonal.
fn number_like(op: &Op, dim: usize) -> Vec<f64> {
    let mut diag = vec![0.0; dim];
    for &(_, c, v) in op {
        diag[c] += v.norm_sqr();
    }
    diag
}

/// Superoperator in compressed sparse row form acting on `vec(rho)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub truncation: TruncationSpec,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl Liouvillian {
    /// Side length `D^2`.
    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_j |sum_k L[(k,k), j]|`: how far `vec(I)^T L` is from zero.
    pub fn trace_annihilation_error(&self) -> f64 {
        let d = self.truncation.dim();
        let mut col_sums = vec![C64::new(0.0, 0.0); self.size()];
        for k in 0..d {
            let r = k + d * k;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                col_sums[self.col_idx[p]] += self.values[p];
            }
        }
        col_sums.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `||L vec(rho)|| / (||L||_F ||rho||)`.
    pub fn relative_residual(&self, rho: &[C64]) -> f64 {
        let mut out = vec![C64::new(0.0, 0.0); rho.len()];
        self.apply(rho, &mut out);
        let num = out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let den = self.frobenius_norm() * rho.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Assembles `L` with the column-stacking convention
/// `vec(A X B) = (B^T kron A) vec(X)`.
pub fn build_liouvillian(model: &LindbladModel, trunc: &TruncationSpec) -> Result<Liouvillian> {
    build_liouvillian_with_cap(model, trunc, DEFAULT_DIMENSION_CAP)
}

pub fn build_liouvillian_with_cap(
    model: &LindbladModel,
    trunc: &TruncationSpec,
    cap: usize,
) -> Result<Liouvillian> {
    model.validate()?;
    trunc.validate(cap)?;
    let d = trunc.dim();
    let n = d * d;
    let a = lowering_cavity(trunc);
    let b = lowering_mech(trunc);
    let b_dag = adjoint(&b);
    let (kappa, down, up) = model.rates();

    // H_eff = H - (i/2) sum r O^dagger O, so -i[H, rho] plus the
    // anticommutators is -i K rho + i rho K^dagger.
    let mut k_op: Op = Vec::new();
    let n_a = number_like(&a, d);
    let n_b = number_like(&b, d);
    let n_bd = number_like(&b_dag, d);
    for nc in 0..=trunc.n_cav {
        for nm in 0..=trunc.n_mech {
            let s = trunc.index(nc, nm);
            let h = -model.delta_prime * (nc + nm) as f64;
            let decay = kappa * n_a[s] + down * n_b[s] + up * n_bd[s];
            k_op.push((s, s, C64::new(h, -0.5 * decay)));
            if nc < trunc.n_cav {
                let amp = ((nc + 1) as f64).sqrt();
                k_op.push((trunc.index(nc + 1, nm), s, I * model.eps_p * amp));
                if nm > 0 {
                    let amp = ((nc + 1) as f64 * nm as f64).sqrt();
                    k_op.push((trunc.index(nc + 1, nm - 1), s, -model.g * amp));
                }
            }
            if nc > 0 {
                let amp = (nc as f64).sqrt();
                k_op.push((trunc.index(nc - 1, nm), s, -I * model.eps_p.conj() * amp));
                if nm < trunc.n_mech {
                    let amp = (nc as f64 * (nm + 1) as f64).sqrt();
                    k_op.push((trunc.index(nc - 1, nm + 1), s, -model.g.conj() * amp));
                }
            }
            if nm < trunc.n_mech {
                let amp = ((nm + 1) as f64).sqrt();
                k_op.push((trunc.index(nc, nm + 1), s, I * model.eps_a * amp));
            }
            if nm > 0 {
                let amp = (nm as f64).sqrt();
                k_op.push((trunc.index(nc, nm - 1), s, -I * model.eps_a.conj() * amp));
            }
        }
    }
    k_op.retain(|e| e.2 != C64::new(0.0, 0.0));

    let mut trip: Vec<(usize, usize, C64)> = Vec::with_capacity(n * (2 * 9 + 3));
    for &(r, c, v) in &k_op {
        let left = -I * v;
        let right = I * v.conj();
        for j in 0..d {
            trip.push((r + d * j, c + d * j, left));
            trip.push((j + d * r, j + d * c, right));
        }
    }
    for (op, rate) in [(&a, kappa), (&b, down), (&b_dag, up)] {
        if rate == 0.0 {
            continue;
        }
        for &(r1, c1, o1) in op.iter() {
            for &(r2, c2, o2) in op.iter() {
                trip.push((r1 + d * r2, c1 + d * c2, rate * o1 * o2.conj()));
            }
        }
    }
    trip.sort_unstable_by_key(|e| (e.0, e.1));

    let mut row_ptr = vec![0usize; n + 1];
    let mut col_idx = Vec::with_capacity(trip.len());
    let mut values: Vec<C64> = Vec::with_capacity(trip.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in trip {
        if last == Some((r, c)) {
            *values.last_mut().expect("entry exists") += v;
        } else {
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..n {
        row_ptr[r + 1] += row_ptr[r];
    }
    Ok(Liouvillian {
        truncation: *trunc,
        row_ptr,
        col_idx,
        values,
    })
}

/// Integrates `d vec(rho)/dt = L vec(rho)` and calls `observe` at each of the
/// ascending `samples`.
pub fn evolve_with<O>(
    l: &Liouvillian,
    rho0: &TruncatedDensityMatrix,
    samples: &[f64],
    controls: &StepControls,
    mut observe: O,
) -> Result<TruncatedDensityMatrix>
where
    O: FnMut(f64, &TruncatedDensityMatrix),
{
    if rho0.truncation != l.truncation {
        return Err(Error::InvalidParameter(
            "state and Liouvillian truncations differ".into(),
        ));
    }
    rho0.check()?;
    let trunc = l.truncation;
    let (y, _) = integrate(
        |_, y, dy| l.apply(y, dy),
        0.0,
        rho0.as_vec(),
        samples,
        controls,
        |t, y| {
            let state = TruncatedDensityMatrix::from_vec(trunc, y.to_vec()).expect("size matches");
            observe(t, &state);
        },
    )?;
    TruncatedDensityMatrix::from_vec(trunc, y)
}

/// States at `0, dt_control, 2 dt_control, ...` up to `t_final`.
pub fn evolve(
    l: &Liouvillian,
    rho0: &TruncatedDensityMatrix,
    t_final: f64,
    dt_control: f64,
) -> Result<Vec<(f64, TruncatedDensityMatrix)>> {
    if !(dt_control > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt_control > 0 and t_final >= 0 (got {dt_control}, {t_final})"
        )));
    }
    let count = (t_final / dt_control).floor() as usize;
    let mut samples = sample_times(0.0, dt_control, count);
    if samples.last().is_some_and(|&t| t < t_final) {
        samples.push(t_final);
    }
    let controls = StepControls {
        rtol: 1e-9,
        atol: 1e-13,
        ..StepControls::default()
    };
    let mut out = Vec::with_capacity(samples.len());
    evolve_with(l, rho0, &samples, &controls, |t, s| {
        out.push((t, s.clone()))
    })?;
    Ok(out)
}

/// `eps_t = eta kappa tr(rho a) / eps_p`.
pub fn extract_response(
    rho: &TruncatedDensityMatrix,
    eta: f64,
    kappa: f64,
    eps_p: C64,
    delta_prime: f64,
) -> ResponsePoint {
    ResponsePoint::from_eps_t(delta_prime, eta * kappa * rho.cavity_mean() / eps_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub delta_prime: f64,
    pub eps_t_numeric: C64,
    pub eps_t_analytic: C64,
    pub abs_err: f64,
}

impl ComparisonRow {
    pub fn rel_err(&self) -> f64 {
        self.abs_err / self.eps_t_analytic.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub truncation: TruncationSpec,
    pub n_th: f64,
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_CSV_HEADER: &str =
    "delta_prime,re_epsT_num,im_epsT_num,re_epsT_ana,im_epsT_ana,abs_err";

impl Comparison {
    pub fn max_abs_err(&self) -> f64 {
        self.rows.iter().map(|r| r.abs_err).fold(0.0, f64::max)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_err()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{COMPARISON_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(r.delta_prime),
                fmt_f64(r.eps_t_numeric.re),
                fmt_f64(r.eps_t_numeric.im),
                fmt_f64(r.eps_t_analytic.re),
                fmt_f64(r.eps_t_analytic.im),
                fmt_f64(r.abs_err)
            )?;
        }
        Ok(())
    }
}

fn compare_point(
    params: &SystemParams,
    model: &LindbladModel,
    trunc: &TruncationSpec,
    delta_prime: f64,
) -> Result<ComparisonRow> {
    let m = model.with_delta_prime(delta_prime);
    let rho = steady_state(&build_liouvillian(&m, trunc)?)?;
    let numeric = extract_response(&rho, params.eta, params.kappa, m.eps_p, delta_prime).eps_t;
    let (cav, _) = linear_means(params, m.g, m.eps_p, m.eps_a, delta_prime)?;
    let analytic = params.kappa_ex() * cav / m.eps_p;
    Ok(ComparisonRow {
        delta_prime,
        eps_t_numeric: numeric,
        eps_t_analytic: analytic,
        abs_err: (numeric - analytic).norm(),
    })
}

/// Steady-state `eps_t` against the linear-response value at every grid point.
pub fn compare_with_analytic(
    params: &SystemParams,
    model: &LindbladModel,
    trunc: &TruncationSpec,
    grid: &DetuningGrid,
) -> Result<Comparison> {
    let run = |(i, &dp): (usize, &f64)| {
        compare_point(params, model, trunc, dp).map_err(|e| e.at_grid_point(i))
    };
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<_>> = grid.values().par_iter().enumerate().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<_>> = grid.values().iter().enumerate().map(run).collect();
    Ok(Comparison {
        truncation: *trunc,
        n_th: model.n_th,
        rows: rows?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub truncation: TruncationSpec,
    pub cavity_mean: C64,
    pub mechanical_mean: C64,
    pub photon_tail: f64,
    pub phonon_tail: f64,
    /// `|<a>_k - <a>_{k-1}| / |<a>_k|`; `None` for the first rung.
    pub rel_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Last two rungs agree within [`CONVERGENCE_TOLERANCE`].
    pub converged: bool,
}

pub const CONVERGENCE_CSV_HEADER: &str = "n_cav,n_mech,re_c,im_c,re_b,im_b,rel_change";

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CONVERGENCE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.truncation.n_cav,
                r.truncation.n_mech,
                fmt_f64(r.cavity_mean.re),
                fmt_f64(r.cavity_mean.im),
                fmt_f64(r.mechanical_mean.re),
                fmt_f64(r.mechanical_mean.im),
                r.rel_change.map(fmt_f64).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Steady-state means along a ladder of non-decreasing truncations.
pub fn convergence_sweep(
    model: &LindbladModel,
    ladder: &[TruncationSpec],
) -> Result<ConvergenceTable> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "convergence ladder needs at least 3 truncations, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| !w[1].contains(&w[0])) {
        return Err(Error::InvalidParameter(
            "truncation ladder must not decrease".into(),
        ));
    }
    let solve = |t: &TruncationSpec| -> Result<TruncatedDensityMatrix> {
        steady_state(&build_liouvillian(model, t)?)
    };
    #[cfg(feature = "parallel")]
    let states: Result<Vec<_>> = ladder.par_iter().map(solve).collect();
    #[cfg(not(feature = "parallel"))]
    let states: Result<Vec<_>> = ladder.iter().map(solve).collect();
    let states = states?;

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for (t, rho) in ladder.iter().zip(&states) {
        let cav = rho.cavity_mean();
        let rel_change = rows.last().map(|prev| {
            let diff = (cav - prev.cavity_mean).norm();
            if diff == 0.0 {
                0.0
            } else {
                diff / cav.norm()
            }
        });
        rows.push(ConvergenceRow {
            truncation: *t,
            cavity_mean: cav,
            mechanical_mean: rho.mechanical_mean(),
            photon_tail: rho.photon_tail(),
            phonon_tail: rho.phonon_tail(),
            rel_change,
        });
    }
    let converged = rows
        .last()
        .and_then(|r| r.rel_change)
        .is_some_and(|c| c <= CONVERGENCE_TOLERANCE);
    if !converged {
        log::warn!("truncation ladder did not converge to {CONVERGENCE_TOLERANCE:e}");
    }
    Ok(ConvergenceTable { rows, converged })
}
