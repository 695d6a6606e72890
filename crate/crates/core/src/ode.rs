//! Adaptive Dormand-Prince 5(4) integrator for complex-valued systems.
//!
//! The state is a flat `[C64]` slice. Outputs are produced at caller-chosen
//! sample times, which the step-size controller hits exactly so no
//! interpolation error enters the samples.

use crate::error::{Error, Result};
use crate::model::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen from the derivative magnitude when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Consecutive rejections tolerated before giving up.
    pub max_rejections: usize,
    /// Any component above this magnitude counts as divergence.
    pub divergence_limit: f64,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            max_rejections: 60,
            divergence_limit: 1e150,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates `dy/dt = rhs(t, y)` from `t0` to the last entry of `samples`,
/// calling `observe(t, y)` at every sample time (ascending, all `>= t0`).
/// Returns the final state.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[C64],
    samples: &[f64],
    controls: &StepControls,
    mut observe: O,
) -> Result<(Vec<C64>, StepStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]),
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let Some(&t_end) = samples.last() else {
        return Ok((y, stats));
    };
    if samples.windows(2).any(|w| w[1] < w[0]) || samples[0] < t0 {
        return Err(Error::InvalidParameter(
            "sample times must be ascending and not before t0".into(),
        ));
    }

    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut stage = k1.clone();
    let mut y_new = k1.clone();

    let mut t = t0;
    rhs(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut next = 0usize;
    while next < samples.len() && samples[next] <= t {
        observe(t, &y);
        next += 1;
    }

    let mut h = controls
        .h_init
        .unwrap_or_else(|| initial_step(&y, &k1, controls))
        .min(controls.h_max);
    let mut rejections = 0usize;

    while next < samples.len() {
        if stats.accepted + stats.rejected >= controls.max_steps {
            return Err(Error::StepRejection { t, h });
        }
        let target = samples[next];
        let mut hit = false;
        let mut h_step = h;
        if t + h_step >= target {
            h_step = target - t;
            hit = true;
        }

        macro_rules! combine {
            ($($coef:expr, $k:expr);+) => {
                for i in 0..n {
                    stage[i] = y[i] $(+ ($k[i] * ($coef * h_step)))+;
                }
            };
        }
        combine!(A21, k1);
        rhs(t + C2 * h_step, &stage, &mut k2);
        combine!(A31, k1; A32, k2);
        rhs(t + C3 * h_step, &stage, &mut k3);
        combine!(A41, k1; A42, k2; A43, k3);
        rhs(t + C4 * h_step, &stage, &mut k4);
        combine!(A51, k1; A52, k2; A53, k3; A54, k4);
        rhs(t + C5 * h_step, &stage, &mut k5);
        combine!(A61, k1; A62, k2; A63, k3; A64, k4; A65, k5);
        rhs(t + h_step, &stage, &mut k6);
        for i in 0..n {
            y_new[i] =
                y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h_step;
        }
        let t_new = if hit { target } else { t + h_step };
        rhs(t_new, &y_new, &mut k7);
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * h_step;
            let scale = controls.atol + controls.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += e.norm_sqr() / (scale * scale);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();

        if !err.is_finite() && y_new.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Divergence { t: t_new });
        }

        if err <= 1.0 {
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            rejections = 0;
            if y.iter().any(|v| !(v.norm() <= controls.divergence_limit)) {
                return Err(Error::Divergence { t });
            }
            while next < samples.len() && samples[next] <= t {
                observe(t, &y);
                next += 1;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            // a shortened step that landed on a sample should not shrink h
            h = if hit {
                h.max(h_step * fac)
            } else {
                h_step * fac
            };
            h = h.min(controls.h_max);
        } else {
            stats.rejected += 1;
            rejections += 1;
            if rejections > controls.max_rejections {
                return Err(Error::StepRejection { t, h: h_step });
            }
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h = h_step * fac;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepRejection { t, h });
        }
    }
    debug_assert!(t == t_end);
    Ok((y, stats))
}

fn initial_step(y: &[C64], dy: &[C64], controls: &StepControls) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (v, dv) in y.iter().zip(dy) {
        let sc = controls.atol + controls.rtol * v.norm();
        d0 += v.norm_sqr() / (sc * sc);
        d1 += dv.norm_sqr() / (sc * sc);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * (d0 / d1).sqrt()
    };
    h.min(controls.h_max)
}

/// Evenly spaced sample times `start + k * dt`, `k = 0..=count`.
pub fn sample_times(start: f64, dt: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| start + dt * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_rotation_matches_exponential() {
        let lambda = C64::new(-0.3, 2.0);
        let samples = sample_times(0.0, 0.5, 20);
        let mut err: f64 = 0.0;
        let (y, stats) = integrate(
            |_, y, dy| dy[0] = lambda * y[0],
            0.0,
            &[C64::new(1.0, 0.5)],
            &samples,
            &StepControls::default(),
            |t, y| {
                let exact = C64::new(1.0, 0.5) * (lambda * t).exp();
                err = err.max((y[0] - exact).norm());
            },
        )
        .unwrap();
        assert!(err < 1e-9, "max error {err}");
        assert!(stats.accepted > 0);
        assert!((y[0] - C64::new(1.0, 0.5) * (lambda * 10.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn observes_every_sample_once() {
        let samples = [0.0, 0.1, 0.1, 0.7, 2.0];
        let mut seen = Vec::new();
        integrate(
            |_, _, dy| dy[0] = C64::new(1.0, 0.0),
            0.0,
            &[C64::new(0.0, 0.0)],
            &samples,
            &StepControls::default(),
            |t, y| seen.push((t, y[0].re)),
        )
        .unwrap();
        assert_eq!(seen.len(), samples.len());
        for ((t, v), s) in seen.iter().zip(samples) {
            assert_eq!(*t, s);
            assert!((v - s).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_is_constant() {
        let y0 = [C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let (y, _) = integrate(
            |_, _, dy| dy.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0)),
            0.0,
            &y0,
            &[5.0],
            &StepControls::default(),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(y, y0.to_vec());
    }

    #[test]
    fn blow_up_is_divergence() {
        let res = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[C64::new(1.0, 0.0)],
            &[2.0],
            &StepControls::default(),
            |_, _| {},
        );
        assert!(matches!(
            res,
            Err(Error::Divergence { .. }) | Err(Error::StepRejection { .. })
        ));
    }

    #[test]
    fn rejects_unsorted_samples() {
        let res = integrate(
            |_, _, dy| dy[0] = C64::new(0.0, 0.0),
            0.0,
            &[C64::new(0.0, 0.0)],
            &[1.0, 0.5],
            &StepControls::default(),
            |_, _| {},
        );
        assert!(res.is_err());
    }
}
