//! End-to-end tests of the `fldi` binary: exit codes, file contracts, and
//! seeded determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fldi")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

fn calibrated_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/calibrated.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, subcmd: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        subcmd.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out-dir".into(),
        dir.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    Command::new(bin()).args(&args).output().expect("binary runs")
}

fn patched_config(dir: &Path, patch: &dyn Fn(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(default_config()).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    patch(&mut value);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

#[test]
fn state_default_reports_phi_plus() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "state", &default_config(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fidelity(phi_plus) = 1.000000"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("state.csv")).unwrap();
    assert!(csv.starts_with("basis,re,im\n"));
    assert!(csv.contains("HH,0.7071067811865"));
    assert!(dir.path().join("run.meta").exists());
}

#[test]
fn state_lcvr_pi_reports_phi_minus() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["source"]["lcvr_phase_rad"] = std::f64::consts::PI.into();
    });
    let out = run_in(dir.path(), "state", &config, &[]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fidelity(phi_minus) = 1.000000"), "{stdout}");
}

#[test]
fn malformed_config_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{ not json").unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(bin())
        .args([
            "state",
            "--config",
            &config.display().to_string(),
            "--out-dir",
            &out_dir.display().to_string(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no output may be written on config errors");
}

#[test]
fn unknown_config_key_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"windw_ns": 20.0}"#).unwrap();
    let out = run_in(dir.path(), "state", &config, &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("windw_ns"), "{stderr}");
}

#[test]
fn unknown_ccr_model_exits_2_listing_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["ccr_sweep"]["models"] = serde_json::json!(["bronze-solid"]);
    });
    let out = run_in(dir.path(), "ccr", &config, &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bronze-solid") && stderr.contains("silver-hollow"), "{stderr}");
}

#[test]
fn usage_error_exits_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ccr_csv_header_and_ideal_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "ccr", &default_config(), &[]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("ccr_ideal.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("hwp_angle_deg,orientation_deg,ellipticity_deg"));
    for line in lines {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let mut expected = 2.0 * fields[0] % 180.0;
        if expected > 90.0 {
            expected -= 180.0;
        }
        assert!((fields[1] - expected).abs() < 1e-9, "{line}");
        assert!(fields[2].abs() < 1e-9, "{line}");
    }
    let uncoated = std::fs::read_to_string(dir.path().join("ccr_uncoated-solid.csv")).unwrap();
    let max_chi_uncoated = uncoated
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap().abs())
        .fold(0.0f64, f64::max);
    let coated = std::fs::read_to_string(dir.path().join("ccr_gold-solid.csv")).unwrap();
    let max_chi_coated = coated
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap().abs())
        .fold(0.0f64, f64::max);
    assert!(max_chi_uncoated > max_chi_coated);
}

#[test]
fn misalign_origin_and_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "misalign", &default_config(), &[]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("misalign.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    let origin = rows.iter().find(|r| r[0].abs() < 1e-9).expect("grid includes 0");
    assert!((origin[1] - 1.0).abs() < 1e-12);
    for r in &rows {
        let mirrored = rows.iter().find(|m| (m[0] + r[0]).abs() < 1e-9).unwrap();
        assert!((r[1] - mirrored[1]).abs() < 1e-9);
        assert!((r[2] - r[1] * r[1]).abs() < 1e-12);
    }
}

#[test]
fn powersweep_outputs_and_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["powersweep"]["power_points"] = 1.into();
        v["powersweep"]["duration_s"] = 0.02.into();
    });
    let out = run_in(dir.path(), "powersweep", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("powersweep.csv")).unwrap();
    assert!(csv.starts_with("pump_power_mw,singles_signal,singles_idler,coincidences,"));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("powersweep_fits.txt").exists());
}

#[test]
fn powersweep_fits_converge_on_default_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        // saturating detectors give the sublinear trend the models describe
        v["detectors"][0]["dead_time_ns"] = 30.0.into();
        v["detectors"][1]["dead_time_ns"] = 30.0.into();
        v["powersweep"]["duration_s"] = 0.02.into();
    });
    let out = run_in(dir.path(), "powersweep", &config, &[]);
    assert!(out.status.success());
    let fits = std::fs::read_to_string(dir.path().join("powersweep_fits.txt")).unwrap();
    let converged = fits.matches("converged = true").count();
    assert!(converged >= 3, "{fits}");
}

#[test]
fn visibility_default_is_ideal() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "visibility", &default_config(), &[]);
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("visibility_metrics.csv")).unwrap();
    let fidelity: f64 = metrics
        .lines()
        .find(|l| l.starts_with("fidelity,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(fidelity > 0.99, "fidelity = {fidelity}");
}

#[test]
fn visibility_calibrated_matches_published_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "visibility", &calibrated_config(), &[]);
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(dir.path().join("visibility_metrics.csv")).unwrap();
    let fidelity: f64 = metrics
        .lines()
        .find(|l| l.starts_with("fidelity,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((fidelity - 0.941).abs() < 0.02, "fidelity = {fidelity}");
}

#[test]
fn visibility_rejects_oversized_step() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["visibility"]["theta2_step_deg"] = 120.0.into();
    });
    let out = run_in(dir.path(), "visibility", &config, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_short_run_and_duration_guard() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["stability"]["duration_s"] = 30.0.into();
    });
    let out = run_in(dir.path(), "stability", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let slopes = std::fs::read_to_string(dir.path().join("allan_slopes.csv")).unwrap();
    let c_slope: f64 = slopes
        .lines()
        .find(|l| l.starts_with("coincidences,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((c_slope + 0.5).abs() < 0.2, "slope = {c_slope}");
    assert!(dir.path().join("stability_timeseries.csv").exists());

    let too_short = patched_config(dir.path(), &|v| {
        v["stability"]["duration_s"] = 0.5.into();
    });
    let out = run_in(dir.path(), "stability", &too_short, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_drift_detected() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["stability"]["duration_s"] = 60.0.into();
        v["stability"]["drift_per_hour"] = 100.0.into();
    });
    let out = run_in(dir.path(), "stability", &config, &[]);
    assert!(out.status.success());
    let slopes = std::fs::read_to_string(dir.path().join("allan_slopes.csv")).unwrap();
    let c_slope: f64 = slopes
        .lines()
        .find(|l| l.starts_with("coincidences,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(c_slope > 0.0, "drift slope = {c_slope}");
}

#[test]
fn phasematch_map_has_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["phasematch"]["lambda_p_points"] = 3.into();
        v["phasematch"]["temp_points"] = 3.into();
    });
    let out = run_in(dir.path(), "phasematch", &config, &[]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("phasematch_pair_rate.csv")).unwrap();
    assert!(csv.starts_with("lambda_p_nm,temp_C,value\n"));
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn phasematch_out_of_range_cells_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let config = patched_config(dir.path(), &|v| {
        v["phasematch"]["temp_min_c"] = 140.0.into();
        v["phasematch"]["temp_max_c"] = 160.0.into();
        v["phasematch"]["temp_points"] = 3.into();
        v["phasematch"]["lambda_p_points"] = 2.into();
    });
    let out = run_in(dir.path(), "phasematch", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("phasematch_pair_rate.csv")).unwrap();
    assert!(csv.contains(",nan"), "{csv}");
}

#[test]
fn seeded_runs_are_byte_identical_and_seed_flag_changes_output() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let dir_c = tempfile::tempdir().unwrap();
    assert!(run_in(dir_a.path(), "visibility", &default_config(), &[]).status.success());
    assert!(run_in(dir_b.path(), "visibility", &default_config(), &[]).status.success());
    assert!(run_in(dir_c.path(), "visibility", &default_config(), &["--seed", "7"])
        .status
        .success());
    let a = std::fs::read(dir_a.path().join("visibility_curves.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("visibility_curves.csv")).unwrap();
    let c = std::fs::read(dir_c.path().join("visibility_curves.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn run_meta_records_seed_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), "misalign", &default_config(), &["--seed", "123"])
        .status
        .success());
    let meta = std::fs::read_to_string(dir.path().join("run.meta")).unwrap();
    assert!(meta.contains("command=misalign"), "{meta}");
    assert!(meta.contains("seed=123"), "{meta}");
    assert!(meta.contains("config_hash="), "{meta}");
    assert!(meta.contains("version="), "{meta}");
}
