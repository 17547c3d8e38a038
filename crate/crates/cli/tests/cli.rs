//! End-to-end tests of the `finsler` binary: exit codes, report formats,
//! and byte-level determinism of seeded runs.

use std::path::Path;
use std::process::{Command, Output};

fn finsler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exits")
}

#[test]
fn gallery_list_names_every_bundled_metric() {
    let out = finsler(&["gallery", "list"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in [
        "euclidean",
        "riemannian_diag",
        "sphere2",
        "funk_ball_randers",
        "shen_avec_randers",
        "killing_s3_alphabeta",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn gallery_export_round_trips_through_classify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metric.toml");
    let out = finsler(&["gallery", "export", "euclidean", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let exported = std::fs::read_to_string(&path).unwrap();
    let on_stdout = stdout(&finsler(&["gallery", "export", "euclidean"]));
    assert_eq!(exported, on_stdout, "file and stdout exports agree");

    let run = finsler(&[
        "classify",
        "--metric",
        path.to_str().unwrap(),
        "--points",
        "2",
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("13 of 13 classes pass"));
}

#[test]
fn gallery_export_rejects_unknown_names() {
    let out = finsler(&["gallery", "export", "flat_torus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn classify_json_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["classify", "--gallery", "euclidean", "--points", "2", "--format", "json"];
    let first = stdout(&finsler(&args));
    let second = stdout(&finsler(&args));
    assert_eq!(first, second, "same run twice");

    let mut with_threads: Vec<&str> = args.to_vec();
    with_threads.extend(["--threads", "1"]);
    let third = stdout(&finsler(&with_threads));
    assert_eq!(first, third, "thread count must not change the report");
}

#[test]
fn classify_json_has_the_documented_shape() {
    let out = finsler(&[
        "classify", "--gallery", "euclidean", "--points", "3", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let obj = doc.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["classes", "config", "identities", "metric", "points", "timing"]
    );
    assert_eq!(doc["metric"], "euclidean");
    assert!(doc["timing"].is_null(), "timing stays null for determinism");
    assert_eq!(doc["points"].as_array().unwrap().len(), 3);
    let classes = doc["classes"].as_object().unwrap();
    assert_eq!(classes.len(), 13);
    for (name, class) in classes {
        assert!(class["verdict"].is_boolean(), "{name} verdict");
        assert!(class["worst_residual"].is_number(), "{name} residual");
        assert_eq!(class["fits"].as_array().unwrap().len(), 3, "{name} fits");
    }
    for point in doc["points"].as_array().unwrap() {
        assert!(point["index"].is_number());
        assert_eq!(point["x"].as_array().unwrap().len(), 2);
        assert_eq!(point["y"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn classify_csv_has_one_row_per_point_and_class() {
    let out = finsler(&[
        "classify", "--gallery", "euclidean", "--points", "2", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "point_index,class,residual,verdict,lambda,mu_1,mu_2,sigma,c,k"
    );
    assert_eq!(lines.count(), 2 * 13);
    assert!(text.contains("0,berwald,"));
    assert!(text.contains("1,scalar_flag_curvature,"));
}

#[test]
fn classify_rejects_a_malformed_metric_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "not a metric file").unwrap();
    let out = finsler(&["classify", "--metric", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let missing = dir.path().join("absent.toml");
    let out = finsler(&["classify", "--metric", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn classify_rejects_unknown_gallery_names() {
    let out = finsler(&["classify", "--gallery", "nosuch"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn classify_requires_exactly_one_metric_source() {
    let none = finsler(&["classify"]);
    assert_eq!(code(&none), 2, "no source is a usage error");
    let both = finsler(&["classify", "--gallery", "euclidean", "--metric", "x.toml"]);
    assert_eq!(code(&both), 2, "two sources are a usage error");
}

#[test]
fn classify_reports_numeric_failures_with_exit_three() {
    let out = finsler(&["classify", "--gallery", "euclidean", "--points", "2", "--order", "3"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn tensor_prints_components_and_norms() {
    let out = finsler(&[
        "tensor", "--gallery", "euclidean", "--name", "riemann",
        "--at", "x=0.1,0.2;y=1,0.5",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("riemann[1,1] ="));
    assert!(text.contains("riemann[2,2] ="));
    assert!(text.contains("frobenius norm ="));
    assert!(text.contains("max |component| ="));
}

#[test]
fn tensor_json_carries_shape_and_components() {
    let out = finsler(&[
        "tensor", "--gallery", "euclidean", "--name", "berwald",
        "--at", "x=0.1,0.2;y=1,0.5", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["tensor"]["name"], "berwald");
    assert_eq!(doc["tensor"]["rank"], 4);
    assert_eq!(doc["tensor"]["shape"].as_array().unwrap().len(), 4);
    assert_eq!(doc["tensor"]["components"].as_array().unwrap().len(), 16);
    assert!(doc["tensor"]["frobenius"].is_number());
}

#[test]
fn tensor_rejects_unknown_names_and_malformed_points() {
    let unknown = finsler(&[
        "tensor", "--gallery", "euclidean", "--name", "nosuch", "--at", "x=0,0;y=1,0",
    ]);
    assert_eq!(code(&unknown), 2);

    for bad_at in ["x=0.1;y=1,0.5", "x=0,0", "x=a,b;y=1,0", "z=0,0;y=1,0"] {
        let out = finsler(&[
            "tensor", "--gallery", "euclidean", "--name", "riemann", "--at", bad_at,
        ]);
        assert_eq!(code(&out), 2, "`{bad_at}` must be an input error");
    }
}

#[test]
fn identities_pass_on_the_flat_plane() {
    let out = finsler(&[
        "identities", "--gallery", "euclidean", "--suite", "lemma_wdtheta", "--points", "3",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("weyl_douglas_theta"));
    assert!(text.contains("douglas_two_routes"));
    assert!(text.contains("0 fail"));
}

#[test]
fn identities_json_lists_rows_with_bounds() {
    let out = finsler(&[
        "identities", "--gallery", "riemannian_diag", "--suite", "riemann_berwald",
        "--points", "2", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = doc["identities"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["name"], "riemann_berwald_exchange");
    assert!(rows[0]["residual"].is_number());
    assert!(rows[0]["bound"].is_number());
    assert_eq!(rows[0]["verdict"], true);
    assert!(doc["classes"].as_object().unwrap().is_empty());
}

#[test]
fn killing_suite_needs_a_qualifying_one_form() {
    let on_general = finsler(&[
        "identities", "--gallery", "euclidean", "--suite", "killing", "--points", "2",
    ]);
    assert_eq!(code(&on_general), 2, "no 1-form at all");

    let on_non_killing = finsler(&[
        "identities", "--gallery", "funk_ball_randers", "--suite", "killing", "--points", "2",
    ]);
    assert_eq!(code(&on_non_killing), 2, "1-form is not Killing");

    let on_killing = finsler(&[
        "identities", "--gallery", "killing_s3_alphabeta", "--suite", "killing",
        "--points", "2",
    ]);
    assert_eq!(code(&on_killing), 0);
    assert!(stdout(&on_killing).contains("killing s|0"));
}

#[test]
fn projective_gates_on_one_homogeneity() {
    let good = finsler(&[
        "projective", "--gallery", "euclidean", "--factor", "y1", "--points", "2",
    ]);
    assert_eq!(code(&good), 0, "linear factors are 1-homogeneous");

    let bad = finsler(&[
        "projective", "--gallery", "euclidean", "--factor", "y1^2", "--points", "2",
    ]);
    assert_eq!(code(&bad), 2, "quadratic factors are rejected");

    let unparsable = finsler(&[
        "projective", "--gallery", "euclidean", "--factor", "y1 +* 3", "--points", "2",
    ]);
    assert_eq!(code(&unparsable), 2);
}

#[test]
fn projective_reports_invariance_rows() {
    let out = finsler(&[
        "projective", "--gallery", "sphere2", "--factor", "0.1*F", "--points", "2",
        "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["config"]["factor"], "0.1 * F");
    let rows = doc["identities"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["name"].as_str().unwrap()).collect();
    for expected in [
        "douglas_invariance",
        "riemann_law",
        "berwald_expansion",
        "douglas_transport",
        "weyl_invariance",
        "gdw_invariance",
        "wgdw_verdict_preserved",
    ] {
        assert!(
            names.iter().any(|n| n.contains(expected)),
            "missing row {expected} in {names:?}"
        );
    }
    for row in rows {
        assert_eq!(row["verdict"], true, "row {} failed", row["name"]);
    }
}

#[test]
fn reports_can_be_written_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = finsler(&[
        "classify", "--gallery", "euclidean", "--points", "2", "--format", "json",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).is_empty(), "report goes to the file, not stdout");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["metric"], "euclidean");
}

#[test]
fn float_formatting_keeps_seventeen_significant_digits() {
    let out = finsler(&[
        "tensor", "--gallery", "sphere2", "--name", "g",
        "--at", "x=0.1,0.2;y=0.3,0.7", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    // Every float is printed as d.dddddddddddddddde[+-]?exp.
    let sample = text
        .split("\"components\":[")
        .nth(1)
        .and_then(|rest| rest.split(']').next())
        .expect("components array present");
    for number in sample.split(',') {
        let mantissa = number.split('e').next().unwrap();
        let digits: usize = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits, 17, "expected 17 significant digits in `{number}`");
    }
}

#[test]
fn help_and_export_work_without_a_metric() {
    let help = finsler(&["--help"]);
    assert_eq!(code(&help), 0);
    for sub in ["classify", "tensor", "identities", "projective", "gallery"] {
        assert!(stdout(&help).contains(sub));
    }
}

#[test]
fn exported_gallery_files_stay_inside_the_declared_region() {
    // The exported file must evaluate cleanly when fed back through the
    // sampler: a quick end-to-end sanity pass over every bundled metric.
    let dir = tempfile::tempdir().unwrap();
    for name in ["riemannian_diag", "sphere2"] {
        let path = dir.path().join(format!("{name}.toml"));
        let export = finsler(&["gallery", "export", name, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&export), 0);
        assert!(Path::new(&path).exists());
        let run = finsler(&[
            "identities", "--metric", path.to_str().unwrap(), "--suite", "riemann_berwald",
            "--points", "2",
        ]);
        assert_eq!(code(&run), 0, "{name} exported file runs");
    }
}
