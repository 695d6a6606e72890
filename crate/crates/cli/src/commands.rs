//! Subcommand bodies: compute, then write CSV tables and JSON sidecars.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::{Path, PathBuf};

use optomech::lindblad::{compare_with_analytic, convergence_sweep, LindbladModel, TruncationSpec};
use optomech::mean_field::{
    integrate_mean_field, settle_time, validate_linearity, LinearityTarget, MeanFieldControls,
};
use optomech::presets::{self, CouplingGridSpec, GridSpec};
use optomech::response::compute_spectrum;
use optomech::{
    classify_regime, linearity_bound, sweep_coupling, working_point_from_g, DriveSet,
    LinearityCheck, OperatingPoint, RegimeReport, SystemParams, Units, WorkingPoint, C64,
};
use serde::Serialize;

use crate::config::{Mode, RunConfig, OUT_DIR_ENV};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Where one table goes.
#[derive(Debug, Clone, PartialEq)]
enum Sink {
    Stdout,
    File(PathBuf),
}

fn phase_label(phi: f64) -> String {
    let deg = phi.to_degrees();
    if (deg - deg.round()).abs() < 1e-9 {
        format!("{}", deg.round() as i64)
    } else {
        format!("{deg:.3}")
    }
}

/// Multiples of pi print as `pi/2`, `3pi/2`; anything else as a number.
pub fn fmt_angle(phi: f64) -> String {
    let quarters = phi / (PI / 4.0);
    if (quarters - quarters.round()).abs() > 1e-12 {
        return format!("{phi}");
    }
    let q = quarters.round() as i64;
    if q == 0 {
        return "0".into();
    }
    let (num, den) = match q % 4 {
        0 => (q / 4, 1),
        2 | -2 => (q / 2, 2),
        _ => (q, 4),
    };
    let coef = match num {
        1 => String::new(),
        -1 => "-".into(),
        n => n.to_string(),
    };
    if den == 1 {
        format!("{coef}pi")
    } else {
        format!("{coef}pi/{den}")
    }
}

/// One sink per phase; several phases need a file destination, which is
/// then split into `<stem>-phi<degrees>.csv`.
fn sinks(cfg: &RunConfig, count: usize) -> Result<Vec<Sink>, CliError> {
    let base = match &cfg.out {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUT_DIR_ENV).map(|dir| {
            let stem = cfg
                .preset
                .clone()
                .unwrap_or_else(|| cfg.mode.name().to_string());
            PathBuf::from(dir).join(format!("{stem}.csv"))
        }),
    };
    match (base, count) {
        (None, 1) => Ok(vec![Sink::Stdout]),
        (None, _) => Err(CliError::Config(format!(
            "{count} phases give {count} tables; set --out or {OUT_DIR_ENV}"
        ))),
        (Some(p), 1) => Ok(vec![Sink::File(p)]),
        (Some(p), _) => {
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("omresp")
                .to_string();
            let ext = p
                .extension()
                .and_then(|s| s.to_str())
                .unwrap_or("csv")
                .to_string();
            Ok(cfg
                .phis
                .iter()
                .map(|&phi| {
                    Sink::File(p.with_file_name(format!("{stem}-phi{}.{ext}", phase_label(phi))))
                })
                .collect())
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn emit(
    sink: &Sink,
    table: &[u8],
    meta: &Metadata,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match sink {
        Sink::Stdout => stdout
            .write_all(table)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
        Sink::File(path) => {
            write_file(path, table)?;
            let side = sidecar_path(path);
            let mut json = serde_json::to_vec_pretty(meta).expect("metadata serializes");
            json.push(b'\n');
            write_file(&side, &json)?;
            log::info!("wrote {} and {}", path.display(), side.display());
            Ok(())
        }
    }
}

/// Sidecar contents. Rates are in units of kappa; `kappa_scale` converts back.
#[derive(Debug, Serialize)]
struct Metadata<'a> {
    software: &'static str,
    version: &'static str,
    mode: &'static str,
    preset: Option<&'a str>,
    units_in: Units,
    kappa_scale: f64,
    params: SystemParams,
    #[serde(rename = "G")]
    g: f64,
    phi_total: f64,
    y: &'a [f64],
    eps_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    drives: Option<DriveSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    working_point: Option<WorkingPoint>,
    cooperativity: f64,
    regime: RegimeReport,
    t_max_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max_observed: Option<f64>,
    linearity: LinearityCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling_grid: Option<CouplingGridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_th: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<TruncationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<&'a [TruncationSpec]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ladder: Option<&'a [f64]>,
    rows: usize,
}

impl<'a> Metadata<'a> {
    /// Fields shared by every mode, evaluated at operating point `op`.
    fn at(cfg: &'a RunConfig, op: &OperatingPoint, t_observed: Option<f64>) -> Self {
        let wp = &op.working_point;
        let regime = classify_regime(wp, &op.params, wp.y);
        let estimate = regime.phase_dependence.as_ref().map(|p| p.t_max_estimate);
        let t_max = estimate.unwrap_or(1.0).max(t_observed.unwrap_or(0.0));
        Metadata {
            software: "omresp",
            version: env!("CARGO_PKG_VERSION"),
            mode: cfg.mode.name(),
            preset: cfg.preset.as_deref(),
            units_in: cfg.units,
            kappa_scale: cfg.kappa_scale,
            params: op.params,
            g: wp.g.norm(),
            phi_total: wp.phi_total,
            y: &cfg.ys,
            eps_p: cfg.eps_p,
            drives: Some(op.drives),
            working_point: Some(*wp),
            cooperativity: wp.cooperativity,
            t_max_estimate: estimate,
            t_max_observed: t_observed,
            linearity: linearity_bound(t_max, op.drives.eps_p.norm(), op.drives.eps_c.norm()),
            regime,
            grid: None,
            coupling_grid: None,
            delta_prime: None,
            method: None,
            n_th: None,
            truncation: None,
            convergence: None,
            ladder: None,
            rows: 0,
        }
    }
}

fn operating_point(
    cfg: &RunConfig,
    g: f64,
    y: f64,
    phi: f64,
    eps_p: f64,
) -> Result<OperatingPoint, CliError> {
    let p = &cfg.params;
    Ok(working_point_from_g(
        p,
        C64::new(g, 0.0),
        p.omega_m,
        y,
        phi,
        eps_p,
    )?)
}

fn single_ratio(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.ys.as_slice() {
        [y] => Ok(*y),
        _ => Err(CliError::Config(format!(
            "{} takes a single --y (got {}); sweep-g accepts several",
            cfg.mode.name(),
            cfg.ys.len()
        ))),
    }
}

fn warn_linearity(meta: &Metadata) {
    if meta.linearity.validity != optomech::Validity::Pass {
        log::warn!(
            "linearity margin {:.3} at phase {}: the amplified probe is not small next to the control field",
            meta.linearity.margin,
            fmt_angle(meta.phi_total)
        );
    }
}

pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cfg.mode {
        Mode::Spectrum => spectrum(cfg, stdout),
        Mode::SweepG => sweep_g(cfg, stdout),
        Mode::Lindblad => lindblad(cfg, stdout),
        Mode::NonlinearCheck => nonlinear_check(cfg, stdout),
        Mode::Classify => classify(cfg, stdout),
    }
}

fn spectrum(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let y = single_ratio(cfg)?;
    let grid = cfg.grid.build()?;
    for (sink, &phi) in sinks(cfg, cfg.phis.len())?.iter().zip(&cfg.phis) {
        let op = operating_point(cfg, cfg.g, y, phi, cfg.eps_p)?;
        let spec = compute_spectrum(&op.working_point, &op.params, &op.drives, &grid, cfg.method)?;
        let mut meta = Metadata::at(cfg, &op, Some(spec.max_transmission().transmission));
        meta.grid = Some(cfg.grid);
        meta.method = Some(cfg.method.name());
        meta.rows = spec.points.len();
        warn_linearity(&meta);
        emit(sink, spec.to_csv().as_bytes(), &meta, stdout)?;
    }
    Ok(())
}

fn sweep_g(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let couplings = cfg.coupling_grid.build()?;
    for (sink, &phi) in sinks(cfg, cfg.phis.len())?.iter().zip(&cfg.phis) {
        let sweep = sweep_coupling(
            &cfg.params,
            &couplings,
            &cfg.ys,
            phi,
            cfg.eps_p,
            cfg.delta_prime,
            cfg.method,
        )?;
        let peak = sweep.max_transmission().expect("non-empty sweep");
        let op = operating_point(cfg, peak.g, peak.y, phi, cfg.eps_p)?;
        let mut meta = Metadata::at(cfg, &op, Some(peak.point.transmission));
        meta.coupling_grid = Some(cfg.coupling_grid);
        meta.delta_prime = Some(cfg.delta_prime);
        meta.method = Some(cfg.method.name());
        meta.rows = sweep.rows.len();
        log::info!(
            "phase {}: peak T = {} at |G| = {}, y = {}",
            fmt_angle(phi),
            peak.point.transmission,
            peak.g,
            peak.y
        );
        warn_linearity(&meta);
        emit(sink, sweep.to_csv().as_bytes(), &meta, stdout)?;
    }
    Ok(())
}

fn lindblad(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let y = single_ratio(cfg)?;
    for (sink, &phi) in sinks(cfg, cfg.phis.len())?.iter().zip(&cfg.phis) {
        let op = operating_point(cfg, cfg.g, y, phi, cfg.eps_p)?;
        let model = LindbladModel::new(
            &op.params,
            op.working_point.g,
            op.drives.eps_p,
            op.drives.eps_a,
            cfg.delta_prime,
            cfg.n_th,
        )?;
        let mut meta = Metadata::at(cfg, &op, None);
        meta.n_th = Some(cfg.n_th);
        let mut table = Vec::new();
        if cfg.convergence.is_empty() {
            let grid = cfg.grid.build()?;
            let cmp = compare_with_analytic(&op.params, &model, &cfg.truncation, &grid)?;
            log::info!(
                "phase {}: max relative deviation from the analytic response {:e}",
                fmt_angle(phi),
                cmp.max_rel_err()
            );
            cmp.write_csv(&mut table).expect("in-memory write");
            meta.grid = Some(cfg.grid);
            meta.truncation = Some(cfg.truncation);
            meta.rows = cmp.rows.len();
        } else {
            let conv = convergence_sweep(&model, &cfg.convergence)?;
            if !conv.converged {
                log::warn!(
                    "truncation ladder did not converge at phase {}",
                    fmt_angle(phi)
                );
            }
            conv.write_csv(&mut table).expect("in-memory write");
            meta.delta_prime = Some(cfg.delta_prime);
            meta.convergence = Some(&cfg.convergence);
            meta.rows = conv.rows.len();
        }
        emit(sink, &table, &meta, stdout)?;
    }
    Ok(())
}

fn nonlinear_check(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let y = single_ratio(cfg)?;
    let controls = MeanFieldControls::default();
    for (i, (sink, &phi)) in sinks(cfg, cfg.phis.len())?
        .iter()
        .zip(&cfg.phis)
        .enumerate()
    {
        let target = LinearityTarget {
            g: C64::new(cfg.g, 0.0),
            phi_total: phi,
            y,
            delta_prime: cfg.delta_prime,
        };
        let report = validate_linearity(&cfg.params, &target, &cfg.ladder, &controls)?;
        let eps_c = operating_point(cfg, cfg.g, y, phi, 1.0)?
            .drives
            .eps_c
            .norm();
        let op = operating_point(cfg, cfg.g, y, phi, cfg.ladder[0] * eps_c)?;
        if i == 0 {
            if let Some(path) = &cfg.time_series {
                let drives = op.drives.with_delta_prime(cfg.delta_prime);
                let period = TAU / (op.params.omega_m + cfg.delta_prime);
                let t = settle_time(&op.params, cfg.g) + period * controls.window_periods as f64;
                let series = integrate_mean_field(&op.params, &drives, t, &controls)?;
                let mut buf = Vec::new();
                series.write_csv(&mut buf).expect("in-memory write");
                write_file(path, &buf)?;
            }
        }
        if !report.within_bound() {
            log::warn!(
                "nonlinear response leaves the linear bound at phase {}",
                fmt_angle(phi)
            );
        }
        let mut meta = Metadata::at(cfg, &op, None);
        meta.delta_prime = Some(cfg.delta_prime);
        meta.ladder = Some(&cfg.ladder);
        meta.rows = report.rows.len();
        let mut table = Vec::new();
        report.write_csv(&mut table).expect("in-memory write");
        emit(sink, &table, &meta, stdout)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Classification {
    phi_total: f64,
    y: f64,
    #[serde(rename = "G")]
    g: f64,
    report: RegimeReport,
    linearity: LinearityCheck,
    drives: DriveSet,
    working_point: WorkingPoint,
}

fn classify(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut out = Vec::new();
    for &phi in &cfg.phis {
        for &y in &cfg.ys {
            let op = operating_point(cfg, cfg.g, y, phi, cfg.eps_p)?;
            let meta = Metadata::at(cfg, &op, None);
            out.push(Classification {
                phi_total: op.working_point.phi_total,
                y,
                g: cfg.g,
                report: meta.regime,
                linearity: meta.linearity,
                drives: op.drives,
                working_point: op.working_point,
            });
        }
    }
    let mut json = serde_json::to_vec_pretty(&out).expect("classification serializes");
    json.push(b'\n');
    match &cfg.out {
        Some(path) => write_file(path, &json),
        None => stdout
            .write_all(&json)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

pub fn list_presets(json: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let catalog = presets::catalog();
    let text = if json {
        let mut s = serde_json::to_string_pretty(&catalog).expect("catalog serializes");
        s.push('\n');
        s
    } else {
        let mut s = format!(
            "{:<7} {:<9} {:>5} {:>10} {:<14} {:<12} {:>5}  {}\n",
            "name", "mode", "eta", "G", "phi", "y", "N_th", "description"
        );
        for p in &catalog {
            let phis: Vec<String> = p.phis.iter().map(|&v| fmt_angle(v)).collect();
            let ys: Vec<String> = p.ys.iter().map(|v| format!("{v}")).collect();
            let mode = serde_json::to_value(p.mode).expect("mode serializes");
            let g = match p.mode {
                presets::PresetMode::SweepG => "swept".to_string(),
                _ => format!("{:.4e}", p.g),
            };
            let n_th = p
                .truncation
                .map(|_| format!("{}", p.n_th))
                .unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<7} {:<9} {:>5} {:>10} {:<14} {:<12} {:>5}  {}\n",
                p.name,
                mode.as_str().unwrap_or(""),
                p.params.eta,
                g,
                phis.join(","),
                ys.join(","),
                n_th,
                p.description
            ));
        }
        s
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}
