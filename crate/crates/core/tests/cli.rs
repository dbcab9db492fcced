use std::fs;
use std::path::Path;

use clap::Parser;
use rydberg_dark::cli::{execute, main_with_args, Cli, CliError, EXIT_CONFIG};
use rydberg_dark::scenarios::{figure_settings, run_fig2_inset, Cell, InsetParams, ScenarioResult};

const RESTRICTED_N2: &str = "\
[atom]
omega_R_MHz = 1.0
omega_M_MHz = 1.0
gamma_r_MHz = 2.0

[geometry]
N = 2
blockade = \"perfect\"

[run]
model = \"restricted\"
t_end_us = 2.0
dt_out_us = 0.5
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Result<Vec<ScenarioResult>, CliError> {
    let mut full = vec!["rydberg-dark"];
    full.extend_from_slice(args);
    execute(&Cli::try_parse_from(full).unwrap())
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fig2_bundle_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(main_with_args(["rydberg-dark", "run", "fig2", "--out", out]), 0);
    for n in 1..=10 {
        let rows = csv_rows(&dir.path().join(format!("fig2_N{n}.csv")));
        assert_eq!(rows[0][0], "t_us");
        assert_eq!(rows.len(), 202);
    }
    let meta: toml::Table = fs::read_to_string(dir.path().join("fig2_meta.toml")).unwrap().parse().unwrap();
    assert_eq!(meta["scenario"].as_str(), Some("fig2"));
    assert!(meta["version"].as_str().unwrap().starts_with("rydberg-dark "));
    assert!(meta["parameters"].as_table().unwrap().contains_key("N"));
    assert_eq!(meta["diagnostics"]["valid"].as_bool(), Some(true));
}

#[test]
fn missing_atom_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[geometry]\nN = 2\n");
    let out = dir.path().join("o");
    let args = ["rydberg-dark", "run", "custom", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert_eq!(main_with_args(args), EXIT_CONFIG);
    let err = run(&args[1..]).unwrap_err();
    assert!(err.message.contains("[atom]"), "{}", err.message);
    assert!(!out.exists());
}

#[test]
fn bad_value_reports_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &RESTRICTED_N2.replace("gamma_r_MHz = 2.0", "gamma_r_MHz = -2.0"));
    let err = run(&["run", "custom", "--config", &cfg]).unwrap_err();
    assert_eq!(err.code, EXIT_CONFIG);
    assert!(err.message.contains("atom.gamma_r_MHz"), "{}", err.message);
    assert!(err.message.contains("line 4"), "{}", err.message);

    let cfg = write(dir.path(), "syntax.toml", "[atom]\nomega_R_MHz = = 1\n");
    let err = run(&["run", "custom", "--config", &cfg]).unwrap_err();
    assert_eq!(err.code, EXIT_CONFIG);
    assert!(err.message.contains("line 2"), "{}", err.message);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(main_with_args(["rydberg-dark", "run", "fig9"]), EXIT_CONFIG);
    assert!(Cli::try_parse_from(["rydberg-dark", "run", "n20-w"]).is_ok());
    assert_eq!(main_with_args(["rydberg-dark", "run", "fig2", "--tolerance-rel", "0"]), EXIT_CONFIG);
    assert_eq!(main_with_args(["rydberg-dark", "steady"]), EXIT_CONFIG);
    assert_eq!(main_with_args(["rydberg-dark", "run", "fig2", "--config", "x.toml"]), EXIT_CONFIG);
}

#[test]
fn custom_run_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pair.toml", RESTRICTED_N2);
    let out = dir.path().join("o");
    let res = run(&["run", "custom", "--config", &cfg, "--out", out.to_str().unwrap()]).unwrap();
    assert_eq!(res[0].id, "pair");
    let rows = csv_rows(&out.join("pair.csv"));
    assert_eq!(rows[0], ["t_us", "P_D", "purity"]);
    assert_eq!(rows.len(), 6);
    assert!(out.join("pair_meta.toml").exists());
}

#[test]
fn steady_restricted_pair_is_the_dark_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pair.toml", RESTRICTED_N2);
    let out = dir.path().join("o");
    let res = run(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]).unwrap();
    let r = &res[0];
    assert!((r.summary_value("P_D").unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(r.summary_value("kernel_dim"), Some(1.0));
    assert!(r.notes.is_empty());
    let rows = csv_rows(&out.join("pair_steady.csv"));
    assert_eq!(rows[0], ["observable", "value"]);
    assert!(rows.iter().any(|r| r[0] == "kernel_dim"));
}

#[test]
fn steady_without_channels_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "closed.toml", &RESTRICTED_N2.replace("gamma_r_MHz = 2.0", ""));
    let out = dir.path().join("o");
    let args = ["rydberg-dark", "steady", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert_eq!(main_with_args(args), 0);
    let meta: toml::Table = fs::read_to_string(out.join("closed_steady_meta.toml")).unwrap().parse().unwrap();
    assert!(meta["summary"]["kernel_dim"].as_float().unwrap() > 1.0);
    assert!(meta["notes"][0].as_str().unwrap().contains("degenerate"));
}

const INSET_SWEEP: &str = "\
[atom]
omega_R_MHz = 1.0
omega_M_MHz = 1.0
gamma_r_MHz = 2.0

[geometry]
N = 4
blockade = \"hybrid\"

[run]
model = \"full-3\"
t_end_us = 5.0
dt_out_us = 5.0
rtol = 1e-11
atol = 1e-13

[sweep]
axis = \"geometry.V_rs_MHz\"
values = [100.0, 0.0, 30.0, 1.0, 10.0, 3.0]
";

#[test]
fn sweep_is_sorted_and_identical_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "inset.toml", INSET_SWEEP);
    let mut bodies = Vec::new();
    for p in ["1", "8"] {
        let out = dir.path().join(format!("p{p}"));
        let args = ["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--parallelism", p];
        run(&args).unwrap();
        bodies.push(fs::read(out.join("inset_sweep.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let rows = csv_rows(&dir.path().join("p1/inset_sweep.csv"));
    assert_eq!(rows[0], ["V_rs_MHz", "observable", "value"]);
    assert_eq!(rows.len(), 1 + 6 * 2);
    let v: Vec<f64> = rows[1..].iter().step_by(2).map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(v, [0.0, 1.0, 3.0, 10.0, 30.0, 100.0]);
}

#[test]
fn inset_as_sweep_matches_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "inset.toml", INSET_SWEEP);
    let swept = run(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]).unwrap();
    let long = &swept[0].tables[0];
    let inset = run_fig2_inset(&InsetParams {
        steady: false,
        settings: figure_settings(),
        ..InsetParams::default()
    })
    .unwrap();
    let table = inset.table("fig2_inset").unwrap();
    let direct = |v: f64, col: &str| -> f64 {
        let vs = table.column("V_rs_MHz").unwrap();
        let i = vs.iter().position(|&x| x == v).unwrap();
        table.column(col).unwrap()[i]
    };
    for row in &long.rows {
        let v = row[0].as_f64().unwrap();
        let Cell::Text(obs) = &row[1] else { panic!() };
        let val = row[2].as_f64().unwrap();
        let col = if obs == "P_D" { "P_D_tau" } else { "purity_tau" };
        assert!((val - direct(v, col)).abs() < 1e-9, "{obs} at V_rs={v}: {val} vs {}", direct(v, col));
    }
}

#[test]
fn empty_sweep_axis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{RESTRICTED_N2}\n[sweep]\naxis = \"atom.omega_M_MHz\"\nvalues = []\n");
    let cfg = write(dir.path(), "empty.toml", &text);
    let err = run(&["sweep", "--config", &cfg]).unwrap_err();
    assert_eq!(err.code, EXIT_CONFIG);
    assert!(err.message.contains("no values"), "{}", err.message);
}

#[test]
fn sweep_failures_are_tabulated() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{RESTRICTED_N2}\n[sweep]\naxis = \"run.max_step_us\"\nvalues = [0.5, 1e-300]\n");
    let cfg = write(dir.path(), "fail.toml", &text);
    let out = dir.path().join("o");
    let res = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]).unwrap();
    assert_eq!(res[0].summary_value("failed_cells"), Some(1.0));
    let rows = csv_rows(&out.join("fail_sweep_failures.csv"));
    assert_eq!(rows.len(), 2);
}
