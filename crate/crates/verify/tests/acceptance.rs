use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use optomech::lindblad::{compare_with_analytic, LindbladModel, TruncationSpec};
use optomech::mean_field::{extract_sideband, linearized_sidebands, MeanFieldControls};
use optomech::model::wrap_phase;
use optomech::{
    compute_spectrum, log_spaced, response_closed_form, response_exact, response_weak_control,
    solve_steady_state, sweep_coupling, working_point_from_g, DetuningGrid, DriveSet, Method,
    OperatingPoint, ResponsePoint, SystemParams, C64,
};
use optomech_verify::{Check, Criterion};
use proptest::prelude::RngCore;
use proptest::test_runner::{RngAlgorithm, TestRng};

// Criteria share one core; run them one at a time so the timings are honest.
static SERIAL: Mutex<()> = Mutex::new(());

const TAU: f64 = 2.0 * PI;

// Independent dense 2x2 solve of the rotating-frame mean equations.
const STRONG_IN_PHASE_T: f64 = 0.722_690_833_253_018;
const STRONG_OUT_OF_PHASE_T: f64 = 1.321_209_469_389_807;

struct Uniform(TestRng);

impl Uniform {
    fn seeded(seed: u8) -> Self {
        Uniform(TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
    }

    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.range(lo.ln(), hi.ln()).exp()
    }
}

fn finish(c: Criterion) {
    c.emit();
    assert!(c.passed(), "criterion {} failed", c.number);
}

fn op(eta: f64, g: f64, phi: f64, y: f64, eps_p: f64) -> OperatingPoint {
    working_point_from_g(
        &SystemParams::reference(eta),
        C64::new(g, 0.0),
        10.0,
        y,
        phi,
        eps_p,
    )
    .unwrap()
}

fn exact_at(o: &OperatingPoint, dp: f64) -> ResponsePoint {
    response_exact(
        &o.working_point,
        &o.params,
        o.drives.eps_p,
        o.drives.eps_a,
        dp,
    )
    .unwrap()
}

fn spectrum(o: &OperatingPoint) -> Vec<ResponsePoint> {
    let grid = DetuningGrid::wide(&o.params);
    compute_spectrum(&o.working_point, &o.params, &o.drives, &grid, Method::Exact)
        .unwrap()
        .points
}

#[test]
fn criterion_1_closed_form_matches_exact_solve() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = Uniform::seeded(1);
    let draws = 2000;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let c = rng.log_range(1e-4, 10.0);
        let phi = rng.range(0.0, TAU);
        let eta = 1.0 - rng.unit();
        let dp = rng.range(-1.0, 1.0);
        let y = rng.range(0.0, 3.0);
        let g = (c * 1e-3).sqrt() / 2.0;
        let o = op(eta, g, phi, y, 0.1);
        let exact = exact_at(&o, dp);
        let closed = response_closed_form(&o.working_point, &o.params, 0.1, 0.1 * y, phi, dp)
            .unwrap()
            .point;
        worst = worst.max((closed.eps_t - exact.eps_t).norm() / (1.0 + exact.eps_t.norm()));
    }
    let elapsed = start.elapsed();
    let mut c = Criterion::new(1, "closed form equals exact solve");
    c.push(Check::at_most(
        format!("max |closed - exact| / (1 + |eps_T|) over {draws} draws"),
        worst,
        1e-12,
    ));
    c.runtime(elapsed, Duration::from_secs(1));
    finish(c);
}

#[test]
fn criterion_2_strong_control_spectra() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let g = 1.0 / 3.0;
    let in_phase = op(0.05, g, 0.0, 1.0, 1.0 / 30.0);
    let s0 = spectrum(&in_phase);
    let t0 = exact_at(&in_phase, 0.0).transmission;
    let peak = s0
        .iter()
        .max_by(|a, b| a.eps_t.re.total_cmp(&b.eps_t.re))
        .unwrap();
    let centre = &s0[s0.len() / 2];
    let tpi = exact_at(&op(0.05, g, PI, 1.0, 1.0 / 30.0), 0.0).transmission;
    let quarter = spectrum(&op(0.05, g, PI / 2.0, 1.0, 1.0 / 30.0));
    let three_quarter = spectrum(&op(0.05, g, 1.5 * PI, 1.0, 1.0 / 30.0));
    let mirror = three_quarter
        .iter()
        .zip(quarter.iter().rev())
        .map(|(a, b)| (a.eps_t.re - b.eps_t.re).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();

    let mut c = Criterion::new(2, "strong-control spectra (|G| = 1/3, eta = 0.05, y = 1)");
    c.push(Check::close(
        "phase 0: T(0) against oracle",
        t0,
        STRONG_IN_PHASE_T,
        1e-6,
    ));
    c.push(Check::new(
        "phase 0: Re eps_T maximal at detuning 0",
        peak.delta_prime == 0.0,
        format!(
            "grid maximum {:.6} at {:+.3}, centre value {:.6}",
            peak.eps_t.re, peak.delta_prime, centre.eps_t.re
        ),
    ));
    c.push(Check::close(
        "phase pi: T(0) against oracle",
        tpi,
        STRONG_OUT_OF_PHASE_T,
        1e-6,
    ));
    c.push(Check::new(
        "phase pi: gain at resonance",
        tpi > 1.0,
        format!("T(0) = {tpi:.6}"),
    ));
    c.push(Check::at_most(
        "phase 3pi/2 mirrors pi/2: max |Re diff|",
        mirror,
        1e-12,
    ));
    c.runtime(elapsed, Duration::from_secs(1));
    finish(c);
}

#[test]
fn criterion_3_unit_transparency_dip() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let o = op(0.05, 5e-4, PI, 1.0, 1.0 / 30.0);
    let t = exact_at(&o, 0.0).transmission;
    let weak = response_weak_control(&o.params, 1.0 / 30.0, 1.0 / 30.0, 5e-4, PI, 0.0)
        .unwrap()
        .transmission;
    let elapsed = start.elapsed();
    let mut c = Criterion::new(
        3,
        "transparency dip of exactly one (|G| = gamma_m/2, phase pi)",
    );
    c.push(Check::close("exact T(0)", t, 1.0, 1e-6));
    c.push(Check::close("weak-control T(0)", weak, 1.0, 1e-6));
    c.runtime(elapsed, Duration::from_secs(1));
    finish(c);
}

#[test]
fn criterion_4_maximal_amplification() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let params = SystemParams::reference(1.0);
    let g_star = (params.kappa * params.gamma_m).sqrt() / 2.0;
    let t_star = exact_at(&op(1.0, g_star, PI, 1.0, 1.0 / 30.0), 0.0).transmission;
    let gs = log_spaced(1e-5, 1.0, 500).unwrap();
    let sweep = sweep_coupling(&params, &gs, &[1.0], PI, 1.0 / 30.0, 0.0, Method::Exact).unwrap();
    let best = sweep.max_transmission().unwrap();
    let elapsed = start.elapsed();
    let mut c = Criterion::new(
        4,
        "maximal amplification (phase pi, eta = 1, |G| = sqrt(kappa gamma_m)/2)",
    );
    c.push(Check::close("T(0) / 1000", t_star / 1000.0, 1.0, 0.005));
    c.push(Check::new(
        "no point of the 500-point log sweep exceeds it beyond 0.5%",
        best.point.transmission <= 1.005 * t_star,
        format!(
            "sweep maximum {:.4} at |G| = {:.5} (target {:.5})",
            best.point.transmission, best.g, g_star
        ),
    ));
    c.runtime(elapsed, Duration::from_secs(5));
    finish(c);
}

#[test]
fn criterion_5_perfect_absorption() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let t_in = exact_at(&op(1.0, 1.0, 0.0, 1.0, 1.0 / 30.0), 0.0).transmission;
    let t_out = exact_at(&op(1.0, 2.5e-4, PI, 1.0, 1.0 / 30.0), 0.0).transmission;
    let elapsed = start.elapsed();
    let mut c = Criterion::new(5, "perfect absorption (eta = 1, y = 1)");
    c.push(Check::at_most("phase 0, |G| = kappa: T(0)", t_in, 1e-5));
    c.push(Check::at_most(
        "phase pi, |G| = gamma_m/4: T(0)",
        t_out,
        1e-5,
    ));
    c.runtime(elapsed, Duration::from_secs(1));
    finish(c);
}

fn master_equation_worst(n_th: f64, trunc: TruncationSpec, phis: &[f64]) -> (f64, f64) {
    let grid = DetuningGrid::linspace(-1.0, 1.0, 21).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_at = 0.0;
    for &phi in phis {
        let o = op(0.05, 1.0 / 3.0, phi, 1.0, 1.0 / 30.0);
        let m = LindbladModel::new(
            &o.params,
            o.working_point.g,
            o.drives.eps_p,
            o.drives.eps_a,
            0.0,
            n_th,
        )
        .unwrap();
        let cmp = compare_with_analytic(&o.params, &m, &trunc, &grid).unwrap();
        for r in &cmp.rows {
            if r.rel_err() > worst {
                worst = r.rel_err();
                worst_at = r.delta_prime;
            }
        }
    }
    (worst, worst_at)
}

#[test]
fn criterion_6_master_equation_agreement() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (worst, at) = master_equation_worst(3.0, TruncationSpec::new(5, 20).unwrap(), &[0.0, PI]);
    let elapsed = start.elapsed();
    let mut c = Criterion::new(
        6,
        "master equation agrees with linear response (N_th = 3, (5, 20))",
    );
    c.push(Check::new(
        "max |eps_T num - ana| / |eps_T ana| over 21 points, phases 0 and pi",
        worst <= 0.02,
        format!("{worst:.3e} (at {at:+.1}) <= 2e-2"),
    ));
    c.runtime(elapsed, Duration::from_secs(60));
    finish(c);
}

#[test]
#[ignore = "slow suite: hot bath at (5, 50), several minutes"]
fn criterion_6_full_hot_bath() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (worst, at) = master_equation_worst(10.0, TruncationSpec::new(5, 50).unwrap(), &[0.0, PI]);
    let elapsed = start.elapsed();
    let mut c = Criterion::new(6, "slow suite: master equation at N_th = 10, (5, 50)");
    c.push(Check::new(
        "max relative deviation over 21 points, phases 0 and pi",
        worst <= 0.02,
        format!("{worst:.3e} (at {at:+.1}) <= 2e-2"),
    ));
    c.push(Check::new(
        "runtime",
        true,
        format!("{:.1} s", elapsed.as_secs_f64()),
    ));
    finish(c);
}

fn nonlinear_preset(omega_m: f64, ratio: f64) -> OperatingPoint {
    let mut p = SystemParams::reference(0.05);
    p.omega_m = omega_m;
    let g = C64::new(1.0 / 3.0, 0.0);
    let eps_c = working_point_from_g(&p, g, omega_m, 1.0, 0.0, 1.0)
        .unwrap()
        .drives
        .eps_c
        .norm();
    working_point_from_g(&p, g, omega_m, 1.0, 0.0, ratio * eps_c).unwrap()
}

#[test]
fn criterion_7_nonlinear_dynamics() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let controls = MeanFieldControls::default();
    let mut c = Criterion::new(
        7,
        "nonlinear sideband against linear response (|eps_p| = |eps_a| = 1e-3 |eps_c|)",
    );
    let mut linearized_worst: f64 = 0.0;
    for dp in [-0.5, 0.0, 0.5] {
        let o = nonlinear_preset(10.0, 1e-3);
        let drives = o.drives.with_delta_prime(dp);
        let (_, fit) = extract_sideband(&o.params, &drives, &controls).unwrap();
        let numeric = fit.eps_t(&o.params, drives.eps_p);
        let analytic = exact_at(&o, dp).eps_t;
        let rel = (numeric - analytic).norm() / analytic.norm();
        c.push(Check::new(
            format!("detuning {dp:+.1}: eps_T within 1% of the rotating-wave value"),
            rel <= 0.01,
            format!("relative deviation {rel:.3e}"),
        ));
        let (plus, _) = linearized_sidebands(&o.params, &o.working_point, &drives).unwrap();
        linearized_worst = linearized_worst.max((fit.amp_plus - plus).norm() / plus.norm());
    }
    let ratios: Vec<f64> = [10.0, 30.0, 100.0]
        .iter()
        .map(|&w| {
            let o = nonlinear_preset(w, 1e-3);
            extract_sideband(&o.params, &o.drives, &controls)
                .unwrap()
                .1
                .counter_rotating_ratio()
        })
        .collect();
    c.push(Check::new(
        "|amp_minus / amp_plus| falls over omega_m in {10, 30, 100}",
        ratios.windows(2).all(|w| w[1] < w[0]),
        format!("{:.3e}, {:.3e}, {:.3e}", ratios[0], ratios[1], ratios[2]),
    ));
    let elapsed = start.elapsed();
    c.runtime(elapsed, Duration::from_secs(120));
    c.emit();
    // context for the rotating-wave gap above; not part of the criterion
    let info = format!(
        "    [info] same runs against the linearized equations with counter-rotating terms kept: max relative deviation {linearized_worst:.3e}\n"
    );
    let _ = std::io::Write::write_all(&mut std::io::stderr(), info.as_bytes());
    assert!(c.passed(), "criterion 7 failed");
}

#[test]
fn criterion_8_gauge_and_scale_invariance() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = Uniform::seeded(8);
    let draws = 500;
    let mut gauge: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..draws {
        let g = (rng.log_range(1e-4, 10.0) * 1e-3).sqrt() / 2.0;
        let phi = rng.range(0.0, TAU);
        let y = rng.range(0.0, 3.0);
        let dp = rng.range(-1.0, 1.0);
        let eta = 1.0 - rng.unit();
        let o = op(eta, g, phi, y, 0.1);
        let base = exact_at(&o, dp);

        let (alpha, beta) = (rng.range(-PI, PI), rng.range(-PI, PI));
        let d = o.drives;
        let shifted = DriveSet::new(
            d.eps_c * C64::from_polar(1.0, alpha),
            d.eps_p * C64::from_polar(1.0, alpha + beta),
            d.eps_a * C64::from_polar(1.0, beta),
            dp,
        );
        let wp = solve_steady_state(&o.params, &shifted).unwrap();
        let moved = response_exact(&wp, &o.params, shifted.eps_p, shifted.eps_a, dp).unwrap();
        gauge = gauge.max((moved.eps_t - base.eps_t).norm());

        let lambda = rng.log_range(1e-3, 1e3);
        let big = working_point_from_g(
            &SystemParams::reference(eta).scaled(lambda),
            C64::new(g * lambda, 0.0),
            10.0 * lambda,
            y,
            phi,
            0.1 * lambda,
        )
        .unwrap();
        let r = exact_at(&big, dp * lambda);
        let (a, b) = (&o.working_point, &big.working_point);
        let dphi = wrap_phase(a.phi_total - b.phi_total);
        for diff in [
            (r.eps_t - base.eps_t).norm(),
            (r.script_t - base.script_t).norm(),
            (r.transmission - base.transmission).abs() / (1.0 + base.transmission),
            (a.cooperativity - b.cooperativity).abs() / (1.0 + a.cooperativity),
            dphi.min(TAU - dphi),
            (a.y - b.y).abs(),
        ] {
            scale = scale.max(diff);
        }
    }
    let elapsed = start.elapsed();
    let mut c = Criterion::new(8, "gauge and scale invariance");
    c.push(Check::at_most(
        format!("drive-phase shifts keeping the total phase, max |d eps_T| over {draws} draws"),
        gauge,
        1e-12,
    ));
    c.push(Check::at_most(
        "global rate rescaling, max change of eps_T, script T, T, C, phase, y",
        scale,
        1e-12,
    ));
    c.runtime(elapsed, Duration::from_secs(1));
    finish(c);
}
