use std::path::Path;
use std::process::Command;

use fibercoat::io::read_snapshot;
use fibercoat::{builtin_scenario, SchemeKind};
use fibercoat_cli::commands::{bench_table, compare, run_scenario, snapshot_name};
use fibercoat_cli::config::{OutputOptions, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fibercoat"))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn diag_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join("diag.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "mass", "entropy", "entropy_bound", "min_h", "lipschitz", "dt", "newton_iters"]);
    r.records().map(|row| row.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn run_adaptive_smooth_completes_without_newton_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["run", "--scenario", "adaptive_smooth", "--quiet", "--snapshot-every", "10", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let s = summary(&out);
    assert_eq!(s["status"], "completed");
    assert_eq!(s["completed"], true);
    assert_eq!(s["aborted"], false);
    assert_eq!(s["newton_failures"], 0);
    assert!(s["final_time"].as_f64().unwrap() >= 1.0);
    assert!(s["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let text = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(text.lines().any(|l| l == "status: completed"));
    assert!(text.lines().any(|l| l == "newton_failures: 0"));
    assert!(diag_rows(&out).len() > 10);
    assert!(out.join(snapshot_name(0.0)).exists());
}

#[test]
fn run_adaptive_singular_stays_positive() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--scenario", "adaptive_singular", "--quiet", "--no-entropy", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let s = summary(dir.path());
    assert_eq!(s["completed"], true);
    assert!(s["min_h"].as_f64().unwrap() > 0.0);
    assert!(s["first_negative_time"].is_null());
}

#[test]
fn gm_benchmark_records_first_negative_time_matching_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--scenario", "cpu_benchmark", "--scheme", "gm", "--quiet", "--diag-every", "25", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    // Stopped at the first negative height, so not completed.
    assert_eq!(status.code(), Some(1));
    let s = summary(dir.path());
    assert_eq!(s["status"], "stopped on negative height");
    assert_eq!(s["aborted"], false);
    let t_neg = s["first_negative_time"].as_f64().expect("a negative height");
    assert!(t_neg > 0.0 && t_neg < 1.0, "{t_neg}");
    let first = diag_rows(dir.path())
        .into_iter()
        .find(|r| r[4].parse::<f64>().unwrap() < 0.0)
        .expect("a diagnostics row with min_h < 0");
    assert_eq!(first[0].parse::<f64>().unwrap(), t_neg);
}

#[test]
fn config_errors_exit_nonzero() {
    let out = bin().args(["run", "--scenario", "no_such_scenario", "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scenario = \"adaptive_smooth\"\n[grid]\npointz = 3\n").unwrap();
    let out = bin().args(["run", "--quiet", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["run", "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborted_run_exits_nonzero_with_label() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    // A Newton tolerance below the residual floor cannot be met.
    std::fs::write(&cfg, "scenario = \"adaptive_smooth\"\n[stepping]\nnewton_tolerance = 1e-30\n").unwrap();
    let out = dir.path().join("o");
    let status = bin().args(["run", "--quiet", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let s = summary(&out);
    assert_eq!(s["status"], "aborted (Newton)");
    assert_eq!(s["aborted"], true);
    assert_eq!(s["completed"], false);
}

#[test]
fn snapshot_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = builtin_scenario::<f64>("adaptive_smooth").unwrap().with_t_end(0.05);
    let opts =
        OutputOptions { dir: dir.path().to_path_buf(), snapshot_every: 0, snapshot_interval: None, diag_every: 5 };
    let s = run_scenario(&scenario, &opts, true, true).unwrap();
    let expected = scenario.run().unwrap();
    assert_eq!(s.final_time, expected.t);
    let back = read_snapshot(&dir.path().join(snapshot_name(s.final_time)), &scenario.grid).unwrap();
    assert_eq!(back.as_slice(), expected.state.as_slice());
}

#[test]
fn snapshot_interval_in_simulated_time() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = builtin_scenario::<f64>("cpu_benchmark").unwrap().with_t_end(0.01);
    let opts = OutputOptions {
        dir: dir.path().to_path_buf(),
        snapshot_every: 0,
        snapshot_interval: Some(0.0025),
        diag_every: 1,
    };
    let s = run_scenario(&scenario, &opts, true, true).unwrap();
    // t = 0, 0.0025, 0.005, 0.0075, 0.01.
    assert_eq!(s.snapshots, 5);
}

#[test]
fn compare_identical_configs_gives_zero_error() {
    let a = builtin_scenario::<f64>("adaptive_smooth").unwrap();
    let r = compare(a.clone(), a, 0.02, None).unwrap();
    assert_eq!(r.l2_error, Some(0.0));
    assert!(r.a.positive && r.b.positive);
}

fn smooth_fixed(points: usize) -> fibercoat::Scenario<f64> {
    let text = format!(
        "scenario = \"adaptive_smooth\"\n[grid]\npoints = {points}\n[stepping]\nmode = \"fixed\"\ndt = 1e-4\nnewton_tolerance = 1e-9\n"
    );
    RunConfig::from_toml(&text).unwrap().resolve().unwrap().0
}

#[test]
fn compare_error_shrinks_under_refinement() {
    let coarse = compare(smooth_fixed(32), smooth_fixed(64), 0.01, None).unwrap();
    let fine = compare(smooth_fixed(64), smooth_fixed(128), 0.01, None).unwrap();
    // Second order: the conventional norm drops 4x; the unweighted mean of
    // squares scales like N dx^4, so 8x.
    let r_norm = coarse.l2_distance.unwrap() / fine.l2_distance.unwrap();
    let r_mean_sq = coarse.l2_error.unwrap() / fine.l2_error.unwrap();
    assert!((3.5..4.5).contains(&r_norm), "{r_norm}");
    assert!((7.0..9.0).contains(&r_mean_sq), "{r_mean_sq}");
}

#[test]
fn compare_flags_gm_negativity_past_check_time() {
    let bem = builtin_scenario::<f64>("cpu_benchmark").unwrap().with_t_end(1.0);
    let gm = bem.clone().with_scheme(SchemeKind::ImplicitGm);
    let r = compare(bem, gm, 0.05, Some(1.0)).unwrap();
    assert!(r.l2_error.is_some());
    assert!(r.a.positive);
    assert!(!r.b.positive);
    assert!(r.b.first_negative_time.unwrap() > 0.05);
}

#[test]
fn compare_rejects_incompatible_domains() {
    let a = builtin_scenario::<f64>("adaptive_smooth").unwrap();
    let other_l = RunConfig::from_toml("scenario = \"adaptive_smooth\"\n[grid]\nlength = 2.0\n").unwrap().resolve().unwrap().0;
    assert!(compare(a.clone(), other_l, 0.01, None).unwrap_err().to_string().contains("domains"));
    let n3 = RunConfig::from_toml("scenario = \"adaptive_smooth\"\n[grid]\npoints = 300\n").unwrap().resolve().unwrap().0;
    assert!(compare(a, n3, 0.01, None).unwrap_err().to_string().contains("grids"));
}

#[test]
fn convergence_rejects_two_grids() {
    let out = bin().args(["convergence", "--scenario", "adaptive_smooth", "--points", "64,64"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 3"));
}

#[test]
fn convergence_smooth_ladder_is_second_order() {
    let out = bin()
        .args(["convergence", "--scenario", "adaptive_smooth", "--points", "32,64,128", "--t-check", "0.01"])
        .args(["--dt", "1e-4", "--newton-tolerance", "1e-9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let order: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("observed order: "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((order - 2.0).abs() < 0.2, "{text}");
    assert!(!text.contains("order unstable"));
}

#[test]
fn convergence_past_singular_time_is_flagged() {
    let out = bin()
        .args(["convergence", "--scenario", "adaptive_singular", "--scheme", "gm", "--points", "16,32,64"])
        .args(["--t-check", "0.3", "--dt", "1e-4", "--newton-tolerance", "1e-6"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("order unstable"));
}

#[test]
fn empty_bench_set_prints_empty_table() {
    let out = bin().args(["bench", "--quiet", "--grids"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), bench_table(&[]));
    assert_eq!(bench_table(&[]).lines().count(), 2);
}

#[test]
fn list_names_builtins() {
    let out = bin().arg("list").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["coarse_comparison", "rayleigh_plateau", "isolated_droplet", "cpu_benchmark"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}

#[test]
fn spin_up_scenario_needs_an_initial_snapshot() {
    let out = bin().args(["run", "--scenario", "coarse_comparison", "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spin-up"));
}
