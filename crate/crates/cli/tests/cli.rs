use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FIG2A_T0: f64 = 0.722690833253018;
const FIG2C_T0: f64 = 1.321209469389807;

fn omresp(args: &[&str]) -> Output {
    omresp_env(args, None)
}

fn omresp_env(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omresp"));
    cmd.args(args)
        .env_remove("OMRESP_OUT_DIR")
        .env_remove("RUST_LOG");
    if let Some(dir) = out_dir {
        cmd.env("OMRESP_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of a CSV table with the header split off.
fn table(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn resonant_transmission_at_phase_pi() {
    let (h, rows) = table(&stdout(&omresp(&["spectrum", "--preset", "fig2c"])));
    assert_eq!(rows.len(), 2001);
    let (dp, t) = (column(&h, "delta_prime"), column(&h, "T"));
    let centre = rows.iter().find(|r| r[dp] == 0.0).unwrap();
    assert!((centre[t] - FIG2C_T0).abs() < 1e-9, "{}", centre[t]);
}

#[test]
fn single_point_grid_sits_on_resonance() {
    let (h, rows) = table(&stdout(&omresp(&[
        "spectrum", "--preset", "fig2a", "--points", "1",
    ])));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&h, "delta_prime")], 0.0);
    assert!((rows[0][column(&h, "T")] - FIG2A_T0).abs() < 1e-9);
}

#[test]
fn coupling_sweep_peaks_near_unit_cooperativity() {
    let out = stdout(&omresp(&[
        "sweep-g", "--phi", "pi", "--eta", "1", "--y", "1",
    ]));
    let (h, rows) = table(&out);
    let (g, t) = (column(&h, "g"), column(&h, "T"));
    let peak = rows.iter().max_by(|a, b| a[t].total_cmp(&b[t])).unwrap();
    assert!((peak[t] - 1000.0).abs() < 10.0, "{}", peak[t]);
    assert!((peak[g] - 0.0158).abs() < 0.001, "{}", peak[g]);
}

#[test]
fn unknown_preset_exits_2_with_a_suggestion() {
    let o = omresp(&["spectrum", "--preset", "fig2z"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("did you mean fig2a"), "{err}");
}

#[test]
fn bad_values_exit_2() {
    for args in [
        &["spectrum", "--eta", "1.5"][..],
        &["spectrum", "--points", "0"],
        &["spectrum", "--phi", "half"],
        &["spectrum", "--kappa", "2"],
        &["lindblad", "--convergence", "2x2,3x3"],
        &["nonlinear-check", "--G", "0"],
    ] {
        assert_eq!(omresp(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_3() {
    let o = omresp(&["nonlinear-check", "--G", "1", "--ladder", "1000"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn runs_are_bit_identical() {
    let a = stdout(&omresp(&["spectrum", "--preset", "fig2b"]));
    let b = stdout(&omresp(&["spectrum", "--preset", "fig2b"]));
    assert_eq!(a, b);
}

#[test]
fn sidecar_records_the_resolved_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = omresp(&[
        "spectrum",
        "--preset",
        "fig4d",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let (_, rows) = table(&std::fs::read_to_string(&out).unwrap());
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap())
            .unwrap();
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["preset"], "fig4d");
    assert_eq!(meta["rows"].as_u64().unwrap() as usize, rows.len());
    assert!((meta["cooperativity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((meta["t_max_estimate"].as_f64().unwrap() - 1000.0).abs() < 1e-9);
    assert!((meta["phi_total"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(meta["method"], "exact");
    for key in [
        "params",
        "drives",
        "working_point",
        "linearity",
        "grid",
        "regime",
    ] {
        assert!(meta.get(key).is_some(), "missing {key}");
    }
    assert_eq!(meta["params"]["eta"], 1.0);
    assert!(meta["linearity"]["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_sits_between_preset_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "preset = \"fig2a\"\nout = \"from-file.csv\"\n\n[drive]\nphi = \"pi\"\n\n[grid]\npoints = 11\n",
    )
    .unwrap();
    let o = omresp(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--points",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = table(&std::fs::read_to_string(dir.path().join("from-file.csv")).unwrap());
    assert_eq!(rows.len(), 1);
    assert!((rows[0][column(&h, "T")] - FIG2C_T0).abs() < 1e-9);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[drive]\nG = 0.3\nphase = 1.0\n").unwrap();
    let o = omresp(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("phase") && err.contains("line 3"), "{err}");
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = omresp_env(
        &["spectrum", "--preset", "fig3a", "--points", "5"],
        Some(dir.path()),
    );
    assert!(o.status.success());
    assert!(dir.path().join("fig3a.csv").exists());
    assert!(dir.path().join("fig3a.json").exists());
}

#[test]
fn several_phases_split_into_files() {
    let small = [
        "lindblad",
        "--preset",
        "fig5a",
        "--nth",
        "0.5",
        "--ncut-cav",
        "2",
        "--ncut-mech",
        "4",
        "--points",
        "3",
    ];
    assert_eq!(omresp(&small).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("me.csv");
    let mut args = small.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    stdout(&omresp(&args));
    for deg in [0, 180] {
        let csv = std::fs::read_to_string(dir.path().join(format!("me-phi{deg}.csv"))).unwrap();
        let (h, rows) = table(&csv);
        assert_eq!(h[0], "delta_prime");
        assert_eq!(rows.len(), 3);
        assert!(dir.path().join(format!("me-phi{deg}.json")).exists());
    }
}

#[test]
fn convergence_ladder_table() {
    let out = stdout(&omresp(&[
        "lindblad",
        "--nth",
        "0",
        "--convergence",
        "2x2,3x3,4x4",
        "--delta-prime",
        "0.1",
    ]));
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("n_cav,n_mech,re_c,im_c,re_b,im_b,rel_change")
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn absolute_units_match_kappa_units() {
    let kappa = stdout(&omresp(&[
        "spectrum", "--G", "0.25", "--phi", "pi/2", "--points", "9",
    ]));
    let absolute = stdout(&omresp(&[
        "spectrum",
        "--units",
        "absolute",
        "--kappa",
        "4",
        "--G",
        "1",
        "--phi",
        "pi/2",
        "--gamma-m",
        "4e-3",
        "--omega-m",
        "40",
        "--g0",
        "4e-3",
        "--eps-p",
        "0.13333333333333333",
        "--delta-prime-min",
        "-4",
        "--delta-prime-max",
        "4",
        "--points",
        "9",
    ]));
    let (h, a) = table(&kappa);
    let (_, b) = table(&absolute);
    let t = column(&h, "T");
    for (x, y) in a.iter().zip(&b) {
        assert!((x[0] - y[0]).abs() < 1e-14);
        assert!((x[t] - y[t]).abs() < 1e-12 * x[t]);
    }
}

#[test]
fn preset_catalog_listing() {
    let text = stdout(&omresp(&["list-presets"]));
    assert_eq!(text.lines().count(), 19);
    let json: Value = serde_json::from_str(&stdout(&omresp(&["list-presets", "--json"]))).unwrap();
    let presets = json.as_array().unwrap();
    assert_eq!(presets.len(), 18);
    let fig5a = presets.iter().find(|p| p["name"] == "fig5a").unwrap();
    assert_eq!(fig5a["n_th"], 10.0);
    assert!((fig5a["eps_p"].as_f64().unwrap() - 1.0 / 30.0).abs() < 1e-15);
}

#[test]
fn classification_as_json() {
    let json: Value =
        serde_json::from_str(&stdout(&omresp(&["classify", "--preset", "fig2a"]))).unwrap();
    let entry = &json.as_array().unwrap()[0];
    assert_eq!(entry["report"]["regime"], "gwi_like");
    assert_eq!(entry["linearity"]["validity"], "pass");
    let weak: Value =
        serde_json::from_str(&stdout(&omresp(&["classify", "--preset", "fig3a"]))).unwrap();
    assert_eq!(weak[0]["report"]["regime"], "weak_control");
}

#[test]
fn nonlinear_check_with_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let (h, rows) = table(&stdout(&omresp(&[
        "nonlinear-check",
        "--phi",
        "pi",
        "--ladder",
        "1e-3,1e-2",
        "--time-series",
        series.to_str().unwrap(),
    ])));
    assert_eq!(h, ["eps_p_over_eps_c", "margin", "rel_deviation"]);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] < 0.05));
    let ts = std::fs::read_to_string(series).unwrap();
    assert!(ts.starts_with("t,re_c,im_c,re_b,im_b\n"));
    assert_eq!(ts.lines().count(), 1 + 50 * 32 + 1);
}
