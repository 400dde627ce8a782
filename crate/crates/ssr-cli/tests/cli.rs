//! End-to-end CLI behavior: exit codes, file outputs, manifests and the
//! report rendering.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ssrscan")
}

fn fixture_cfg() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../ssr-core/fixtures/two_area.cfg")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ssrcli_{tag}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn validate_fixture_exits_zero() {
    let dir = tmp_dir("validate");
    let out = run(&["validate", fixture_cfg(), "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no violations"));
    let manifest = fs::read_to_string(dir.join("validate_manifest.json")).unwrap();
    assert!(manifest.contains("config_sha256"));
    assert!(manifest.contains("\"tool_version\""));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn invalid_model_exits_one_with_report_on_stderr() {
    let dir = tmp_dir("invalid");
    let bad = dir.join("bad.cfg");
    // corrupt the power fractions of the first generator
    let text = fs::read_to_string(fixture_cfg())
        .unwrap()
        .replacen("bf = 0.3 0.3 0.3 0.1", "bf = 0.3 0.3 0.3 0.3", 1);
    fs::write(&bad, text).unwrap();
    let out = run(&["validate", bad.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("violation"), "stderr: {stderr}");
    assert!(stderr.contains("fractions sum"), "stderr: {stderr}");
    fs::remove_dir_all(dir).ok();
}

#[test]
fn parse_error_exits_one_with_line_number() {
    let dir = tmp_dir("parse");
    let bad = dir.join("bad.cfg");
    fs::write(&bad, "[system]\nbase_mva = 100\nmystery = 1\n").unwrap();
    let out = run(&["validate", bad.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
    fs::remove_dir_all(dir).ok();
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tmp_dir("numfail");
    let out = run(&[
        "simulate",
        fixture_cfg(),
        "--dt",
        "-0.001",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn config_hash_ignores_reformatting() {
    let dir = tmp_dir("hash");
    let reformatted = dir.join("reformatted.cfg");
    // add comments and blank lines; the parsed model is unchanged
    let text = format!("# reformatted copy\n\n{}\n# trailing comment\n", fs::read_to_string(fixture_cfg()).unwrap());
    fs::write(&reformatted, text).unwrap();

    let d1 = dir.join("a");
    let d2 = dir.join("b");
    run(&["validate", fixture_cfg(), "--out-dir", d1.to_str().unwrap()]);
    run(&["validate", reformatted.to_str().unwrap(), "--out-dir", d2.to_str().unwrap()]);
    let hash = |p: PathBuf| -> String {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("validate_manifest.json")).unwrap()).unwrap();
        m["config_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(d1), hash(d2));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn peaks_then_simulate_then_report() {
    let dir = tmp_dir("pipeline");
    let out = run(&[
        "peaks",
        fixture_cfg(),
        "--fmin",
        "20",
        "--fmax",
        "45",
        "--step",
        "0.01",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let peaks_csv = fs::read_to_string(dir.join("peaks.csv")).unwrap();
    assert!(peaks_csv.starts_with("output_id,f_center_hz,f_lo_hz,f_hi_hz,magnitude,r_m,stealth\n"));
    assert!(peaks_csv.lines().count() > 1, "no bands found");
    // at least one stealth-flagged band per generator
    for gen in ["G1", "G2", "G11", "G12"] {
        assert!(
            peaks_csv.lines().any(|l| {
                l.ends_with(",true") && l.split('_').nth(1) == Some(gen)
            }),
            "no stealth band for {gen}"
        );
    }

    let out = run(&[
        "simulate",
        fixture_cfg(),
        "--attack-freq",
        "32.84",
        "--amplitude",
        "1",
        "--horizon",
        "4",
        "--dt",
        "1e-3",
        "--start",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&[
        "report",
        "--peaks",
        dir.join("peaks.csv").to_str().unwrap(),
        "--severity",
        dir.join("simulate_severity.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Vulnerability summary"), "{text}");
    assert!(text.contains("rank"), "{text}");
    assert!(text.contains("confirmed by simulation"), "{text}");
    fs::remove_dir_all(dir).ok();
}

#[test]
fn report_with_no_bands() {
    let dir = tmp_dir("emptyreport");
    fs::write(
        dir.join("peaks.csv"),
        "output_id,f_center_hz,f_lo_hz,f_hi_hz,magnitude,r_m,stealth\n",
    )
    .unwrap();
    fs::write(
        dir.join("sev.csv"),
        "gen_id,segment,max_speed_diff,max_terminal_speed,r_omega,max_angle_diff,max_terminal_angle,r_theta\n",
    )
    .unwrap();
    let out = run(&[
        "report",
        "--peaks",
        dir.join("peaks.csv").to_str().unwrap(),
        "--severity",
        dir.join("sev.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no vulnerable bands found"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn eig_csv_row_count_matches_mode_pairs() {
    let dir = tmp_dir("eig");
    let out = run(&["eig", fixture_cfg(), "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("eig_modes.csv")).unwrap();
    // 40 states, all oscillatory: 20 conjugate-merged modes + header
    assert_eq!(csv.lines().count(), 21);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn freqscan_columns_resolve_through_index_maps() {
    let dir = tmp_dir("cols");
    let out = run(&[
        "freqscan",
        fixture_cfg(),
        "--fmin",
        "10",
        "--fmax",
        "11",
        "--step",
        "0.5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("freqscan_magnitudes.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 40 + 32);
    assert_eq!(header[0], "f_hz");
    assert!(header.contains(&"w_G1"));
    assert!(header.contains(&"th_G12_s4"));
    assert!(header.contains(&"dw_G11_s3_s4"));
    assert!(header.contains(&"dth_G2_g_s1"));
    fs::remove_dir_all(dir).ok();
}
