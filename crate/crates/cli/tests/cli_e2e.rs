//! End-to-end exercises of the compiled binary: every subcommand, both output
//! formats, the error paths with their exit codes, and file output.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EXE: &str = env!("CARGO_BIN_EXE_wellround");

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn wellround(args: &[&str]) -> Output {
    Command::new(EXE)
        .args(args)
        .env_remove("WELLROUND_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a json envelope")
}

fn expect_diagnostic(out: &Output, code: i32, tag: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is a json diagnostic");
    assert_eq!(v["error"], tag, "diagnostic: {v}");
}

#[test]
fn reduce_identity_is_already_reduced() {
    let out = wellround(&["reduce", "--in", &fixture("identity2.txt")]);
    let v = stdout_json(&out);
    assert_eq!(v["config"]["command"], "reduce");
    assert_eq!(v["report"]["member_of_F"], true);
    let a = v["report"]["a"].as_array().expect("diagonal profile");
    assert_eq!(a.len(), 2);
    for entry in a {
        assert!((entry.as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(v["report"]["active_inequalities"].as_array().is_some());
}

#[test]
fn reduce_finds_the_short_vector_of_a_sheared_basis() {
    // columns (1, 0) and (0.5, 0.1): the lattice contains (0, 0.2), which is
    // the shortest nonzero vector, so the reduced profile starts at 0.2
    let out = wellround(&["reduce", "--in", &fixture("basis_shear.txt")]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["member_of_F"], true);
    let a0 = v["report"]["a"][0].as_f64().expect("leading diagonal");
    assert!((a0 - 0.2).abs() <= 1e-9, "a[0] = {a0}, expected 0.2");
    // row-major entries of the 2x2 coefficient matrix; (0, 1) is index 1
    let n01 = v["report"]["n_coeffs"]["entries"][1].as_f64().expect("shear coefficient");
    assert!(n01.abs() <= 0.5 + 1e-9);
}

#[test]
fn reduce_handles_a_three_dimensional_basis() {
    let out = wellround(&["reduce", "--in", &fixture("basis3.txt")]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["member_of_F"], true);
    assert_eq!(v["report"]["a"].as_array().expect("profile").len(), 3);
    let t = v["report"]["transform"].as_object().expect("integer transform");
    assert!(t.contains_key("entries"), "transform: {t:?}");
}

#[test]
fn reduce_rejects_a_singular_basis() {
    let out = wellround(&["reduce", "--in", &fixture("singular.txt")]);
    expect_diagnostic(&out, 3, "SingularMatrix");
}

#[test]
fn reduce_rejects_a_missing_file() {
    let out = wellround(&["reduce", "--in", "/nonexistent/basis.txt"]);
    expect_diagnostic(&out, 2, "Io");
}

#[test]
fn kan_reconstructs_the_input() {
    let out = wellround(&["kan", "--in", &fixture("basis3.txt")]);
    let v = stdout_json(&out);
    assert_eq!(v["config"]["command"], "kan");
    let err = v["report"]["reconstruction_error"].as_f64().expect("error field");
    assert!(err <= 1e-9, "reconstruction error {err}");
    assert_eq!(v["report"]["a"].as_array().expect("diagonal").len(), 3);
}

#[test]
fn certify_exact_disk_matches_the_area_law() {
    let out = wellround(&[
        "--seed", "3", "certify", "--group", "R2", "--set", "disk:1", "--mode", "exact",
        "--points", "50000",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["mode"], "exact_euclidean");
    let fitted = v["report"]["fitted_C"].as_f64().expect("fitted constant");
    assert!((6.0..10.0).contains(&fitted), "fitted_C = {fitted}");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["config"]["eps_grid"], serde_json::json!([0.01, 0.02, 0.05]));
}

#[test]
fn certify_reads_a_family_document() {
    let out = wellround(&[
        "certify", "--family", &fixture("family_sine_disk.json"), "--points", "4000",
        "--perts", "8", "--eps-grid", "0.01,0.05",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["mode"], "sampled");
    let set = v["report"]["set"].as_str().expect("set name");
    assert!(set.contains("sine-disk"), "set name: {set}");
    let fitted = v["report"]["fitted_C"].as_f64().expect("fitted constant");
    assert!(fitted.is_finite() && fitted > 0.0);
}

#[test]
fn certify_rejects_conflicting_set_sources() {
    let out = wellround(&[
        "certify", "--family", &fixture("family_sine_disk.json"), "--group", "R2", "--set",
        "disk:1",
    ]);
    expect_diagnostic(&out, 2, "InvalidInput");
    let out = wellround(&["certify"]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn certify_rejects_an_epsilon_beyond_the_chart() {
    let out = wellround(&[
        "certify", "--group", "SO2", "--set", "ball:0.4", "--eps-grid", "0.9",
    ]);
    expect_diagnostic(&out, 2, "EpsilonTooLarge");
}

#[test]
fn certify_rejects_a_fattening_that_escapes_the_window() {
    let out = wellround(&[
        "certify", "--group", "R2", "--set", "disk:1", "--eps-grid", "0.9",
    ]);
    expect_diagnostic(&out, 4, "WindowTooSmall");
}

#[test]
fn certify_exact_mode_needs_a_signed_distance() {
    let out = wellround(&[
        "certify", "--group", "SL2", "--set", "ball:0.3", "--mode", "exact", "--points", "1000",
    ]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn certify_csv_lists_the_ratio_table() {
    let out = wellround(&[
        "--format", "csv", "certify", "--group", "R2", "--set", "disk:1", "--mode", "exact",
        "--points", "20000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).expect("utf8 csv");
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# wellround 0.1"), "header: {}", lines[0]);
    assert!(lines[1].starts_with("# seed:"));
    assert!(lines[2].starts_with("# config:"));
    assert_eq!(lines[3], "eps,ratio,stderr");
    assert_eq!(lines.len(), 4 + 3, "one row per epsilon");
    for row in &lines[4..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 3);
        fields.iter().for_each(|f| {
            f.parse::<f64>().expect("numeric csv field");
        });
    }
}

#[test]
fn blc_check_passes_the_shipped_family_documents() {
    for doc in ["family_sine_disk.json", "family_constant_disk.json", "family_affine_disk.json"] {
        let out = wellround(&[
            "blc-check", "--family", &fixture(doc), "--points", "4000", "--perts", "4",
            "--base-points", "4",
        ]);
        let v = stdout_json(&out);
        assert_eq!(v["report"]["passed"], true, "document {doc}: {}", v["report"]);
        let conditions = v["report"]["conditions"].as_array().expect("condition rows");
        assert!(!conditions.is_empty());
    }
}

#[test]
fn blc_check_rejects_unknown_document_fields() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"base_group": "R1", "surprise": 1}"#).expect("write doc");
    let out = wellround(&["blc-check", "--family", path.to_str().unwrap()]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn blc_check_is_json_only() {
    let out = wellround(&[
        "--format", "csv", "blc-check", "--family", &fixture("family_sine_disk.json"),
    ]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn count_integer_points_matches_known_values() {
    let out = wellround(&["count", "--kind", "integer_points", "--T-grid", "1,2,10"]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["kind"], "integer_points");
    assert_eq!(v["report"]["counts"].as_array().expect("counts"), &[
        Value::from(5u64),
        Value::from(13u64),
        Value::from(317u64)
    ]);
    // analytic reference volume is T^n, so the ratio estimates the disk area
    let ratio = v["report"]["ratios"][2].as_f64().expect("ratio at T = 10");
    assert!((ratio - std::f64::consts::PI).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn count_csv_includes_doubling_column() {
    let out = wellround(&[
        "--format", "csv", "count", "--kind", "integer_points", "--T-grid", "1,2,10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).expect("utf8 csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[3], "T,count,volume,ratio,doubling");
    assert!(lines[4].starts_with("1,5,"), "row: {}", lines[4]);
    assert!(lines[4].ends_with(",2.6"), "T = 1 doubles to T = 2: {}", lines[4]);
    // the largest grid point has no doubled partner, so the field is empty
    assert!(lines[6].ends_with(','), "row: {}", lines[6]);
}

#[test]
fn count_supports_a_monte_carlo_reference() {
    let out = wellround(&[
        "--seed", "5", "count", "--kind", "sl2z_ball", "--T-grid", "2,4", "--reference",
        "monte_carlo_volume", "--points", "20000",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["reference"], "monte_carlo_volume");
    for ratio in v["report"]["ratios"].as_array().expect("ratios") {
        let r = ratio.as_f64().expect("finite ratio");
        assert!(r > 0.1 && r < 10.0, "ratio {r}");
    }
}

#[test]
fn count_rejects_an_unknown_kind() {
    let out = wellround(&["count", "--kind", "gauss", "--T-grid", "1,2"]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn count_rejects_an_oversized_scale() {
    let out = wellround(&["count", "--kind", "integer_points", "--T-grid", "20000"]);
    expect_diagnostic(&out, 4, "ScaleTooLarge");
}

#[test]
fn version_reports_the_tool_identity() {
    let out = wellround(&["version"]);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["name"], "wellround");
    assert_eq!(v["report"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_flags_are_validation_errors() {
    let out = wellround(&["certify", "--bogus"]);
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn threads_must_be_positive() {
    let out = wellround(&["--threads", "0", "version"]);
    expect_diagnostic(&out, 2, "InvalidInput");
    let out = Command::new(EXE)
        .args(["version"])
        .env("WELLROUND_THREADS", "lots")
        .output()
        .expect("binary runs");
    expect_diagnostic(&out, 2, "InvalidInput");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("report.json");
    let path_str = path.to_str().unwrap();
    let args = [
        "--seed", "9", "--out", path_str, "count", "--kind", "integer_points", "--T-grid",
        "1,2",
    ];
    let out = wellround(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty(), "file output should leave stdout empty");
    let first = std::fs::read(&path).expect("report file");
    let v: Value = serde_json::from_slice(&first).expect("file holds the json envelope");
    assert_eq!(v["config"]["out"], path_str);
    let out = wellround(&args);
    assert_eq!(out.status.code(), Some(0));
    let second = std::fs::read(&path).expect("report file");
    assert_eq!(first, second, "same seed and path give identical bytes");
}
