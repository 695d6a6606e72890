//! Command-line flags, the TOML config file, and their resolution into one
//! fully specified run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use optomech::lindblad::TruncationSpec;
use optomech::presets::{self, CouplingGridSpec, GridSpec, Preset, PresetMode};
use optomech::{Method, SystemParams, Units};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the directory used when `--out` is absent.
pub const OUT_DIR_ENV: &str = "OMRESP_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Exact,
    Closed,
    Weak,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Closed => Method::ClosedForm,
            MethodArg::Weak => Method::WeakControl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitsArg {
    Kappa,
    Absolute,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Kappa => Units::Kappa,
            UnitsArg::Absolute => Units::Absolute,
        }
    }
}

/// Accepts plain numbers and multiples of pi: `pi`, `-pi/2`, `3pi/2`,
/// `1.5pi`, `0.25*pi`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let s: String = text
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let bad = || format!("cannot read {text:?} as an angle (try 0, pi/2, 3pi/2 or 1.5707963)");
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (s.as_str(), 1.0),
    };
    let Some(coef) = num.strip_suffix("pi") else {
        return Err(bad());
    };
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let c = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(c * PI / den)
}

/// `NxM` truncation shorthand, e.g. `5x20`.
pub fn parse_truncation(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NCAVxNMECH, got {text:?}"))?;
    let n = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad cutoff in {text:?}"))
    };
    Ok((n(a)?, n(b)?))
}

/// Flags shared by every computing subcommand. Rates are in units of kappa
/// unless `--units absolute`.
#[derive(Args, Debug, Default, Clone, PartialEq)]
pub struct RunArgs {
    /// TOML file with the same settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named parameter set (see `list-presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Linearized coupling |G|.
    #[arg(long = "G", visible_alias = "g")]
    pub g: Option<f64>,
    /// Total phase; accepts multiples of pi such as `pi/2`. Repeatable.
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true, value_delimiter = ',')]
    pub phi: Vec<f64>,
    /// Amplitude ratio |eps_a / eps_p|. Repeatable for coupling sweeps.
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    /// External coupling fraction, kappa_ex = eta kappa.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Cavity decay rate; only meaningful with --units absolute.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long = "gamma-m")]
    pub gamma_m: Option<f64>,
    #[arg(long = "omega-m")]
    pub omega_m: Option<f64>,
    /// Single-photon coupling.
    #[arg(long)]
    pub g0: Option<f64>,
    /// Probe amplitude |eps_p|.
    #[arg(long = "eps-p")]
    pub eps_p: Option<f64>,
    #[arg(long = "delta-prime-min", allow_hyphen_values = true)]
    pub delta_prime_min: Option<f64>,
    #[arg(long = "delta-prime-max", allow_hyphen_values = true)]
    pub delta_prime_max: Option<f64>,
    /// Fixed two-photon detuning for sweep-g, nonlinear-check and --convergence.
    #[arg(long = "delta-prime", allow_hyphen_values = true)]
    pub delta_prime: Option<f64>,
    /// Grid size (detuning grid, or coupling grid for sweep-g).
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long = "g-min")]
    pub g_min: Option<f64>,
    #[arg(long = "g-max")]
    pub g_max: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Output CSV; the metadata sidecar goes next to it as `.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mean thermal phonon number.
    #[arg(long)]
    pub nth: Option<f64>,
    #[arg(long = "ncut-cav")]
    pub ncut_cav: Option<usize>,
    #[arg(long = "ncut-mech")]
    pub ncut_mech: Option<usize>,
    #[arg(long, value_enum)]
    pub units: Option<UnitsArg>,
    /// Truncation ladder such as `3x10,4x15,5x20`; lindblad then reports
    /// convergence instead of the detuning comparison.
    #[arg(long, value_parser = parse_truncation, value_delimiter = ',')]
    pub convergence: Vec<(usize, usize)>,
    /// Probe-to-control ratios |eps_p / eps_c| for nonlinear-check.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Vec<f64>,
    /// Also write the nonlinear time series of the first ladder rung.
    #[arg(long = "time-series")]
    pub time_series: Option<PathBuf>,
}

impl RunArgs {
    /// Fills every unset field from `base`.
    pub fn or(self, base: RunArgs) -> RunArgs {
        fn vec<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        RunArgs {
            config: self.config.or(base.config),
            preset: self.preset.or(base.preset),
            g: self.g.or(base.g),
            phi: vec(self.phi, base.phi),
            y: vec(self.y, base.y),
            eta: self.eta.or(base.eta),
            kappa: self.kappa.or(base.kappa),
            gamma_m: self.gamma_m.or(base.gamma_m),
            omega_m: self.omega_m.or(base.omega_m),
            g0: self.g0.or(base.g0),
            eps_p: self.eps_p.or(base.eps_p),
            delta_prime_min: self.delta_prime_min.or(base.delta_prime_min),
            delta_prime_max: self.delta_prime_max.or(base.delta_prime_max),
            delta_prime: self.delta_prime.or(base.delta_prime),
            points: self.points.or(base.points),
            g_min: self.g_min.or(base.g_min),
            g_max: self.g_max.or(base.g_max),
            method: self.method.or(base.method),
            out: self.out.or(base.out),
            nth: self.nth.or(base.nth),
            ncut_cav: self.ncut_cav.or(base.ncut_cav),
            ncut_mech: self.ncut_mech.or(base.ncut_mech),
            units: self.units.or(base.units),
            convergence: vec(self.convergence, base.convergence),
            ladder: vec(self.ladder, base.ladder),
            time_series: self.time_series.or(base.time_series),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AngleValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    kappa: Option<f64>,
    gamma_m: Option<f64>,
    omega_m: Option<f64>,
    g0: Option<f64>,
    eta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriveSection {
    #[serde(rename = "G", alias = "g")]
    g: Option<f64>,
    phi: Option<OneOrMany<AngleValue>>,
    y: Option<OneOrMany<f64>>,
    eps_p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    delta_prime_min: Option<f64>,
    delta_prime_max: Option<f64>,
    delta_prime: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    g_min: Option<f64>,
    g_max: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LindbladSection {
    nth: Option<f64>,
    ncut_cav: Option<usize>,
    ncut_mech: Option<usize>,
    convergence: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NonlinearSection {
    ladder: Option<Vec<f64>>,
    time_series: Option<PathBuf>,
}

/// On-disk layout of `--config` files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<String>,
    units: Option<UnitsArg>,
    method: Option<MethodArg>,
    out: Option<PathBuf>,
    #[serde(default)]
    params: ParamsSection,
    #[serde(default)]
    drive: DriveSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    lindblad: LindbladSection,
    #[serde(default)]
    nonlinear: NonlinearSection,
}

/// Reads a config file into the flag structure. Relative output paths are
/// taken relative to the file.
pub fn load_config(path: &Path) -> Result<RunArgs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let file: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let rel = |p: PathBuf| if p.is_relative() { dir.join(p) } else { p };
    let phi = match file.drive.phi {
        None => Vec::new(),
        Some(v) => v
            .into_vec()
            .into_iter()
            .map(|a| match a {
                AngleValue::Number(x) => Ok(x),
                AngleValue::Text(t) => parse_angle(&t)
                    .map_err(|e| CliError::Config(format!("{}: drive.phi: {e}", path.display()))),
            })
            .collect::<Result<_, _>>()?,
    };
    if file.grid.points.is_some() && file.sweep.points.is_some() {
        return Err(CliError::Config(format!(
            "{}: set either grid.points or sweep.points, not both",
            path.display()
        )));
    }
    Ok(RunArgs {
        config: None,
        preset: file.preset,
        g: file.drive.g,
        phi,
        y: file.drive.y.map(OneOrMany::into_vec).unwrap_or_default(),
        eta: file.params.eta,
        kappa: file.params.kappa,
        gamma_m: file.params.gamma_m,
        omega_m: file.params.omega_m,
        g0: file.params.g0,
        eps_p: file.drive.eps_p,
        delta_prime_min: file.grid.delta_prime_min,
        delta_prime_max: file.grid.delta_prime_max,
        delta_prime: file.grid.delta_prime,
        points: file.grid.points.or(file.sweep.points),
        g_min: file.sweep.g_min,
        g_max: file.sweep.g_max,
        method: file.method,
        out: file.out.map(rel),
        nth: file.lindblad.nth,
        ncut_cav: file.lindblad.ncut_cav,
        ncut_mech: file.lindblad.ncut_mech,
        units: file.units,
        convergence: file
            .lindblad
            .convergence
            .unwrap_or_default()
            .into_iter()
            .map(|[a, b]| (a, b))
            .collect(),
        ladder: file.nonlinear.ladder.unwrap_or_default(),
        time_series: file.nonlinear.time_series.map(rel),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    SweepG,
    Lindblad,
    NonlinearCheck,
    Classify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::SweepG => "sweep-g",
            Mode::Lindblad => "lindblad",
            Mode::NonlinearCheck => "nonlinear-check",
            Mode::Classify => "classify",
        }
    }
}

/// Every input of a run, in units of kappa, with no remaining defaults.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<String>,
    pub units: Units,
    /// Absolute cavity decay rate the inputs were divided by (1 in kappa units).
    pub kappa_scale: f64,
    pub params: SystemParams,
    #[serde(rename = "G")]
    pub g: f64,
    pub phis: Vec<f64>,
    pub ys: Vec<f64>,
    pub eps_p: f64,
    pub grid: GridSpec,
    pub coupling_grid: CouplingGridSpec,
    pub delta_prime: f64,
    pub method: Method,
    pub n_th: f64,
    pub truncation: TruncationSpec,
    pub convergence: Vec<TruncationSpec>,
    pub ladder: Vec<f64>,
    pub out: Option<PathBuf>,
    pub time_series: Option<PathBuf>,
}

fn unknown_preset(name: &str) -> CliError {
    let hint = presets::suggest(name)
        .map(|s| format!("; did you mean {s}?"))
        .unwrap_or_else(|| "; run `omresp list-presets` for the catalog".into());
    CliError::Config(format!("unknown preset {name:?}{hint}"))
}

/// Mode-specific starting point when no preset is named.
fn default_base(mode: Mode) -> Preset {
    let name = match mode {
        Mode::SweepG => "fig4b",
        Mode::Lindblad => "fig5a",
        _ => "fig2a",
    };
    let mut p = presets::find(name).expect("catalog entry");
    if mode == Mode::SweepG {
        p.ys = vec![1.0];
    }
    if mode == Mode::Lindblad {
        p.phis = vec![0.0];
        p.n_th = 3.0;
        p.truncation = Some(TruncationSpec {
            n_cav: 5,
            n_mech: 20,
        });
    }
    p
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive and finite (got {v})"
        )))
    }
}

/// Merges file and flags over the preset (or mode default) and checks the
/// result.
pub fn resolve(mode: Mode, flags: RunArgs) -> Result<RunConfig, CliError> {
    let args = match &flags.config {
        Some(path) => {
            let file = load_config(path)?;
            flags.or(file)
        }
        None => flags,
    };
    let (preset_name, base) = match &args.preset {
        Some(name) => {
            let p = presets::find(name).ok_or_else(|| unknown_preset(name))?;
            (Some(p.name.to_string()), p)
        }
        None => (None, default_base(mode)),
    };
    let units: Units = args.units.map(Units::from).unwrap_or_default();
    let kappa_scale = match units {
        Units::Kappa => {
            if args.kappa.is_some_and(|k| k != 1.0) {
                return Err(CliError::Config(
                    "--kappa only applies with --units absolute (rates are already in kappa)"
                        .into(),
                ));
            }
            1.0
        }
        Units::Absolute => positive(
            "--kappa",
            args.kappa
                .ok_or_else(|| CliError::Config("--units absolute needs --kappa".into()))?,
        )?,
    };
    let rate = |v: Option<f64>, fallback: f64| v.map(|x| x / kappa_scale).unwrap_or(fallback);

    let mut params = base.params;
    params.gamma_m = rate(args.gamma_m, params.gamma_m);
    params.omega_m = rate(args.omega_m, params.omega_m);
    params.g0 = rate(args.g0, params.g0);
    params.eta = args.eta.unwrap_or(params.eta);
    params
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let g = rate(args.g, base.g);
    if !(g >= 0.0) || !g.is_finite() {
        return Err(CliError::Config(format!("|G| must be >= 0 (got {g})")));
    }
    let phis = if args.phi.is_empty() {
        base.phis.clone()
    } else {
        args.phi.clone()
    };
    let ys = if args.y.is_empty() {
        base.ys.clone()
    } else {
        args.y.clone()
    };
    if let Some(y) = ys.iter().find(|y| !(**y >= 0.0) || !y.is_finite()) {
        return Err(CliError::Config(format!("y must be >= 0 (got {y})")));
    }
    let eps_p = positive("--eps-p", rate(args.eps_p, base.eps_p))?;

    let mut grid = base.grid;
    grid.min = rate(args.delta_prime_min, grid.min);
    grid.max = rate(args.delta_prime_max, grid.max);
    let mut coupling_grid = base.coupling_grid.unwrap_or_default();
    coupling_grid.min = rate(args.g_min, coupling_grid.min);
    coupling_grid.max = rate(args.g_max, coupling_grid.max);
    if let Some(points) = args.points {
        if points == 0 {
            return Err(CliError::Config("--points must be at least 1".into()));
        }
        match mode {
            Mode::SweepG => coupling_grid.points = points,
            _ => grid.points = points,
        }
    }
    if mode == Mode::SweepG {
        coupling_grid
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
    } else {
        grid.build().map_err(|e| CliError::Config(e.to_string()))?;
    }

    let base_trunc = base.truncation.unwrap_or(TruncationSpec {
        n_cav: 5,
        n_mech: 20,
    });
    let n_th = args.nth.unwrap_or(if base.mode == PresetMode::Lindblad {
        base.n_th
    } else {
        3.0
    });
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(CliError::Config(format!("--nth must be >= 0 (got {n_th})")));
    }
    let truncation = TruncationSpec::new(
        args.ncut_cav.unwrap_or(base_trunc.n_cav),
        args.ncut_mech.unwrap_or(base_trunc.n_mech),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let convergence = args
        .convergence
        .iter()
        .map(|&(c, m)| TruncationSpec::new(c, m).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if !convergence.is_empty() && convergence.len() < 3 {
        return Err(CliError::Config(
            "--convergence needs at least 3 truncations".into(),
        ));
    }

    let ladder = if args.ladder.is_empty() {
        vec![1e-4, 1e-3, 1e-2]
    } else {
        args.ladder.clone()
    };
    if let Some(r) = ladder.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(CliError::Config(format!(
            "ladder ratios must be positive (got {r})"
        )));
    }
    if mode == Mode::NonlinearCheck && g == 0.0 {
        return Err(CliError::Config(
            "nonlinear-check needs a nonzero |G| (the control field sets the probe scale)".into(),
        ));
    }
    if phis.is_empty() || ys.is_empty() {
        return Err(CliError::Config(
            "need at least one phase and one amplitude ratio".into(),
        ));
    }
    if phis.iter().any(|p| !p.is_finite()) {
        return Err(CliError::Config("non-finite phase".into()));
    }

    Ok(RunConfig {
        mode,
        preset: preset_name,
        units,
        kappa_scale,
        params,
        g,
        phis,
        ys,
        eps_p,
        grid,
        coupling_grid,
        delta_prime: rate(args.delta_prime, 0.0),
        method: args.method.map(Method::from).unwrap_or(Method::Exact),
        n_th,
        truncation,
        convergence,
        ladder,
        out: args.out,
        time_series: args.time_series,
    })
}
