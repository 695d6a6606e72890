//! Restarted, right-preconditioned GMRES for complex systems.

use crate::model::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub converged: bool,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` as tracked by the Arnoldi recurrence.
    pub rel_residual: f64,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `A x = b` starting from `x`, with `apply_a(v, out)` computing `A v`
/// and `apply_m(v, out)` an approximation of `A^{-1} v`.
pub fn gmres<A, M>(
    mut apply_a: A,
    mut apply_m: M,
    b: &[C64],
    x: &mut [C64],
    restart: usize,
    max_iter: usize,
    tol: f64,
) -> GmresOutcome
where
    A: FnMut(&[C64], &mut [C64]),
    M: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return GmresOutcome {
            converged: true,
            iterations: 0,
            rel_residual: 0.0,
        };
    }
    let m = restart.max(1);
    let mut basis: Vec<Vec<C64>> = vec![vec![zero; n]; m + 1];
    let mut precond: Vec<Vec<C64>> = vec![vec![zero; n]; m];
    let mut h = vec![vec![zero; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![zero; m];
    let mut g = vec![zero; m + 1];
    let mut w = vec![zero; n];
    let mut iterations = 0;
    let mut rel = f64::INFINITY;

    while iterations < max_iter {
        apply_a(x, &mut w);
        for i in 0..n {
            basis[0][i] = b[i] - w[i];
        }
        let beta = norm(&basis[0]);
        rel = beta / b_norm;
        if rel <= tol {
            return GmresOutcome {
                converged: true,
                iterations,
                rel_residual: rel,
            };
        }
        basis[0].iter_mut().for_each(|v| *v /= beta);
        g.iter_mut().for_each(|v| *v = zero);
        g[0] = C64::new(beta, 0.0);

        let mut k = 0;
        while k < m && iterations < max_iter {
            apply_m(&basis[k], &mut precond[k]);
            apply_a(&precond[k], &mut w);
            for j in 0..=k {
                let hij = dot(&basis[j], &w);
                h[j][k] = hij;
                for i in 0..n {
                    w[i] -= hij * basis[j][i];
                }
            }
            let w_norm = norm(&w);
            h[k + 1][k] = C64::new(w_norm, 0.0);
            if w_norm > 0.0 {
                for i in 0..n {
                    basis[k + 1][i] = w[i] / w_norm;
                }
            }
            for j in 0..k {
                let (a, bb) = (h[j][k], h[j + 1][k]);
                h[j][k] = cs[j] * a + sn[j] * bb;
                h[j + 1][k] = -sn[j].conj() * a + cs[j] * bb;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let t = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = C64::new(1.0, 0.0);
            } else {
                cs[k] = a.norm() / t;
                sn[k] = a / a.norm() * bb.conj() / t;
            }
            h[k][k] = cs[k] * a + sn[k] * bb;
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            rel = g[k].norm() / b_norm;
            if rel <= tol || w_norm == 0.0 {
                break;
            }
        }

        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += *yj * precond[j][i];
            }
        }
        if rel <= tol {
            apply_a(x, &mut w);
            let true_rel = norm(&b.iter().zip(&w).map(|(p, q)| p - q).collect::<Vec<_>>()) / b_norm;
            if true_rel <= tol * 10.0 {
                return GmresOutcome {
                    converged: true,
                    iterations,
                    rel_residual: true_rel,
                };
            }
        }
    }
    GmresOutcome {
        converged: false,
        iterations,
        rel_residual: rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [
            [C64::new(4.0, 1.0), C64::new(1.0, 0.0), C64::new(0.0, 0.5)],
            [C64::new(-1.0, 0.0), C64::new(3.0, -2.0), C64::new(1.0, 0.0)],
            [C64::new(0.0, 1.0), C64::new(2.0, 0.0), C64::new(5.0, 0.0)],
        ];
        let apply = |v: &[C64], out: &mut [C64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * v[j]).sum();
            }
        };
        let x_true = [C64::new(1.0, -1.0), C64::new(0.5, 0.0), C64::new(-2.0, 3.0)];
        let mut b = [C64::new(0.0, 0.0); 3];
        apply(&x_true, &mut b);
        let mut x = [C64::new(0.0, 0.0); 3];
        let out = gmres(apply, |v, o| o.copy_from_slice(v), &b, &mut x, 2, 50, 1e-14);
        assert!(out.converged);
        for i in 0..3 {
            assert!((x[i] - x_true[i]).norm() < 1e-12);
        }
    }
}
