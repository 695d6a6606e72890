//! Steady state of the bordered system `[[L, t], [t^T, 0]] [x; s] = [0; 1]`,
//! `t = vec(I)`.
//!
//! Without drives the Liouvillian conserves the ket-minus-bra excitation
//! number `k`, so its restriction to each `k` sector is block diagonal. The
//! default solver runs GMRES on the full bordered system preconditioned by
//! exact sparse LU factors of those blocks; the drives couple neighbouring
//! sectors and set the iteration count.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::krylov::gmres;
use super::{Liouvillian, TruncatedDensityMatrix, STEADY_STATE_RESIDUAL};
use crate::error::{Error, Result};
use crate::model::C64;
use crate::ode::{integrate, StepControls};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteadyStateMethod {
    /// Sector-preconditioned GMRES, relaxing by time evolution if it stalls.
    #[default]
    Krylov,
    /// One sparse LU of the whole bordered system.
    DirectLu,
}

const GMRES_TOL: f64 = 1e-13;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITER: usize = 2000;
const RELAX_CHUNK: f64 = 10.0;
const RELAX_MAX_CHUNKS: usize = 2000;

pub fn steady_state(l: &Liouvillian) -> Result<TruncatedDensityMatrix> {
    steady_state_with(l, SteadyStateMethod::Krylov)
}

pub fn steady_state_with(
    l: &Liouvillian,
    method: SteadyStateMethod,
) -> Result<TruncatedDensityMatrix> {
    let x = match method {
        SteadyStateMethod::DirectLu => solve_direct(l)?,
        SteadyStateMethod::Krylov => match solve_krylov(l)? {
            Ok(x) => x,
            Err(guess) => {
                log::warn!("GMRES stalled; relaxing by time evolution");
                relax(l, guess)?
            }
        },
    };
    finish(l, x)
}

fn finish(l: &Liouvillian, data: Vec<C64>) -> Result<TruncatedDensityMatrix> {
    if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SolverFailure(
            "steady-state solve is singular beyond the trace direction".into(),
        ));
    }
    let mut rho = TruncatedDensityMatrix::from_vec(l.truncation, data)?;
    rho.symmetrize();
    rho.normalize()?;
    let residual = l.relative_residual(rho.as_vec());
    if !(residual <= STEADY_STATE_RESIDUAL) {
        return Err(Error::SolverFailure(format!(
            "steady-state residual {residual:e} above {STEADY_STATE_RESIDUAL:e}"
        )));
    }
    rho.check()?;
    Ok(rho)
}

fn unit_rhs(n: usize) -> Vec<C64> {
    let mut b = vec![C64::new(0.0, 0.0); n + 1];
    b[n] = C64::new(1.0, 0.0);
    b
}

fn bordered_apply(l: &Liouvillian, x: &[C64], y: &mut [C64]) {
    let n = l.size();
    let d = l.truncation.dim();
    l.apply(&x[..n], &mut y[..n]);
    let s = x[n];
    let mut tr = C64::new(0.0, 0.0);
    for k in 0..d {
        let v = k + d * k;
        y[v] += s;
        tr += x[v];
    }
    y[n] = tr;
}

fn solve_direct(l: &Liouvillian) -> Result<Vec<C64>> {
    let n = l.size();
    let d = l.truncation.dim();
    let mut trip = Vec::with_capacity(l.nnz() + 2 * d);
    for r in 0..n {
        for p in l.row_ptr[r]..l.row_ptr[r + 1] {
            trip.push(Triplet::new(r, l.col_idx[p], l.values[p]));
        }
    }
    let one = C64::new(1.0, 0.0);
    for k in 0..d {
        trip.push(Triplet::new(k + d * k, n, one));
        trip.push(Triplet::new(n, k + d * k, one));
    }
    let m = SparseColMat::<usize, C64>::try_new_from_triplets(n + 1, n + 1, &trip)
        .map_err(|e| Error::SolverFailure(format!("sparse assembly: {e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::SolverFailure(format!("sparse LU: {e:?}")))?;
    let b = unit_rhs(n);
    let rhs = Mat::<C64>::from_fn(n + 1, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

struct Sector {
    /// Global indices into the bordered vector; the border unknown is `n`.
    members: Vec<usize>,
    lu: Lu<usize, C64>,
}

/// Exact inverse of the sector-diagonal part of the bordered matrix.
struct SectorPreconditioner {
    sectors: Vec<Sector>,
}

impl SectorPreconditioner {
    fn new(l: &Liouvillian) -> Result<Self> {
        let t = l.truncation;
        let n = l.size();
        let d = t.dim();
        let excitations: Vec<usize> = (0..d)
            .map(|i| i / (t.n_mech + 1) + i % (t.n_mech + 1))
            .collect();
        let offset = t.n_cav + t.n_mech;
        let sector_of = |v: usize| -> usize {
            if v == n {
                offset
            } else {
                offset + excitations[v % d] - excitations[v / d]
            }
        };
        let count = 2 * offset + 1;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut local = vec![0usize; n + 1];
        for v in 0..=n {
            let s = sector_of(v);
            local[v] = members[s].len();
            members[s].push(v);
        }
        let mut trip: Vec<Vec<Triplet<usize, usize, C64>>> = vec![Vec::new(); count];
        for r in 0..n {
            let s = sector_of(r);
            for p in l.row_ptr[r]..l.row_ptr[r + 1] {
                let c = l.col_idx[p];
                if sector_of(c) == s {
                    trip[s].push(Triplet::new(local[r], local[c], l.values[p]));
                }
            }
        }
        let one = C64::new(1.0, 0.0);
        for k in 0..d {
            let v = k + d * k;
            trip[offset].push(Triplet::new(local[v], local[n], one));
            trip[offset].push(Triplet::new(local[n], local[v], one));
        }
        let mut sectors = Vec::with_capacity(count);
        for (m, tr) in members.into_iter().zip(trip) {
            if m.is_empty() {
                continue;
            }
            let size = m.len();
            let mat = SparseColMat::<usize, C64>::try_new_from_triplets(size, size, &tr)
                .map_err(|e| Error::SolverFailure(format!("sector assembly: {e:?}")))?;
            let lu = mat
                .sp_lu()
                .map_err(|e| Error::SolverFailure(format!("sector LU: {e:?}")))?;
            sectors.push(Sector { members: m, lu });
        }
        Ok(SectorPreconditioner { sectors })
    }

    fn apply(&self, v: &[C64], out: &mut [C64]) {
        for s in &self.sectors {
            let rhs = Mat::<C64>::from_fn(s.members.len(), 1, |i, _| v[s.members[i]]);
            let x = s.lu.solve(&rhs);
            for (i, &g) in s.members.iter().enumerate() {
                out[g] = x[(i, 0)];
            }
        }
    }
}

/// `Ok(x)` on convergence, `Err(best iterate)` if GMRES stalls.
fn solve_krylov(l: &Liouvillian) -> Result<std::result::Result<Vec<C64>, Vec<C64>>> {
    let n = l.size();
    let pre = SectorPreconditioner::new(l)?;
    let b = unit_rhs(n);
    let mut x = vec![C64::new(0.0, 0.0); n + 1];
    pre.apply(&b, &mut x);
    let out = gmres(
        |v, y| bordered_apply(l, v, y),
        |v, y| pre.apply(v, y),
        &b,
        &mut x,
        GMRES_RESTART,
        GMRES_MAX_ITER,
        GMRES_TOL,
    );
    log::debug!(
        "GMRES: {} iterations, residual {:e}",
        out.iterations,
        out.rel_residual
    );
    x.truncate(n);
    Ok(if out.converged { Ok(x) } else { Err(x) })
}

fn relax(l: &Liouvillian, guess: Vec<C64>) -> Result<Vec<C64>> {
    let d = l.truncation.dim();
    let mut y = guess;
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        y[0] = C64::new(1.0, 0.0);
    }
    let tr: C64 = (0..d).map(|k| y[k + d * k]).sum();
    if tr.norm() > 0.0 {
        y.iter_mut().for_each(|v| *v /= tr);
    }
    let controls = StepControls {
        rtol: 1e-11,
        atol: 1e-14,
        ..StepControls::default()
    };
    for _ in 0..RELAX_MAX_CHUNKS {
        let (next, _) = integrate(
            |_, v, dv| l.apply(v, dv),
            0.0,
            &y,
            &[RELAX_CHUNK],
            &controls,
            |_, _| {},
        )?;
        y = next;
        if l.relative_residual(&y) <= 0.1 * STEADY_STATE_RESIDUAL {
            return Ok(y);
        }
    }
    Err(Error::SolverFailure(
        "time evolution did not reach a steady state".into(),
    ))
}
