//! End-to-end CLI coverage: one process per invocation, asserting on exit
//! codes, emitted files and diagnostics.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wcfa")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn wcfa")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "wcfa {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    scores: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let truth = root.join("gt.json");
    std::fs::write(
        &truth,
        r#"{"family":"plda","d":[0.5,1.0,1.5,2.0],"n_speakers":25,"scores_per_pair":6,"seed":0}"#,
    )
    .unwrap();
    let scores = root.join("scores.csv");
    run_ok(&[
        "simulate",
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]);
    Fixture {
        _dir: dir,
        root,
        scores,
    }
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn estimate_writes_one_row_per_grid_point() {
    let fx = fixture();
    let out = fx.root.join("curve.csv");
    run_ok(&[
        "estimate",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--n-grid",
        "1,10,24",
        "--tau",
        "0.0",
        "--trials",
        "200",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = lines(&out);
    assert_eq!(rows.len(), 4, "{rows:?}");
    assert_eq!(rows[0], "N,tau,p_fa,ci_lo,ci_hi");
    assert!(rows[1].starts_with("1,"));
    assert!(rows[3].starts_with("24,"));
}

#[test]
fn estimate_emits_optional_json_and_svg() {
    let fx = fixture();
    let csv = fx.root.join("c.csv");
    let json = fx.root.join("c.json");
    let svg = fx.root.join("c.svg");
    run_ok(&[
        "estimate",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--n-grid",
        "1,8",
        "--tau",
        "-0.5,0.5",
        "--trials",
        "100",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg_text.matches("<polyline").count(), 2);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 4);
}

#[test]
fn estimate_supports_dcf_thresholds() {
    let fx = fixture();
    let targets = fx.root.join("targets.txt");
    std::fs::write(&targets, "score\n5.0\n5.5\n6.0\n6.5\n").unwrap();
    let out = fx.root.join("dcf.csv");
    run_ok(&[
        "estimate",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--n-grid",
        "1",
        "--dcf-target-scores",
        targets.to_str().unwrap(),
        "--dcf-costs",
        "1,1,0.5",
        "--dcf-costs",
        "1,10,0.5",
        "--trials",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    // two cost triples produce two threshold rows
    assert_eq!(lines(&out).len(), 3);
}

#[test]
fn fit_writes_model_and_log_with_defaults() {
    let fx = fixture();
    let model = fx.root.join("model.json");
    run_ok(&[
        "fit",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--family",
        "plda",
        "--steps",
        "4",
        "--t-train",
        "20",
        "--batch-size",
        "3",
        "--n-train-max",
        "10",
        "--scores-per-pair",
        "4",
        "--out",
        model.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(parsed["family"], "plda");
    // default latent dimension is 10
    assert_eq!(parsed["structure"]["dim"], 10);
    assert_eq!(parsed["params"].as_array().unwrap().len(), 10);
    assert_eq!(parsed["provenance"]["seed"], 0);
    assert!(!parsed["provenance"]["config_hash"]
        .as_str()
        .unwrap()
        .is_empty());

    let log = fx.root.join("model.log.jsonl");
    let log_lines = lines(&log);
    assert_eq!(log_lines.len(), 4);
    let first: serde_json::Value = serde_json::from_str(&log_lines[0]).unwrap();
    assert!(first["loss"].as_f64().unwrap().is_finite());
    assert!(first["grad_norm"].as_f64().unwrap().is_finite());
}

#[test]
fn fit_with_warp_records_warp_knots() {
    let fx = fixture();
    let model = fx.root.join("warped.json");
    run_ok(&[
        "fit",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--family",
        "gaussian-ls",
        "--warp",
        "--warp-segments",
        "8",
        "--steps",
        "3",
        "--t-train",
        "15",
        "--batch-size",
        "2",
        "--n-train-max",
        "8",
        "--scores-per-pair",
        "3",
        "--out",
        model.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(parsed["family"], "gaussian-ls");
    assert_eq!(
        parsed["structure"]["warp_knots"].as_array().unwrap().len(),
        9
    );
    // 5 core + 9 warp raw values
    assert_eq!(parsed["params"].as_array().unwrap().len(), 14);
}

#[test]
fn extrapolate_and_validate_roundtrip() {
    let fx = fixture();
    let model = fx.root.join("model.json");
    run_ok(&[
        "fit",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--family",
        "plda",
        "--dim",
        "4",
        "--steps",
        "4",
        "--t-train",
        "20",
        "--batch-size",
        "3",
        "--n-train-max",
        "10",
        "--scores-per-pair",
        "4",
        "--out",
        model.to_str().unwrap(),
    ]);
    let curve = fx.root.join("extrap.csv");
    run_ok(&[
        "extrapolate",
        "--model",
        model.to_str().unwrap(),
        "--n-grid",
        "1,100,100000",
        "--tau",
        "0.0",
        "--trials",
        "200",
        "--seed",
        "5",
        "--out",
        curve.to_str().unwrap(),
    ]);
    let rows = lines(&curve);
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("100000,"));

    let out = run_ok(&[
        "validate",
        "--model",
        model.to_str().unwrap(),
        "--scores",
        fx.scores.to_str().unwrap(),
        "--n-lo",
        "12",
        "--n-hi",
        "24",
        "--queries",
        "5",
        "--trials",
        "200",
        "--seed",
        "3",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("MAE"), "stdout was: {stdout}");
    assert!(stdout.contains('%'));
}

#[test]
fn gradcheck_reports_pass() {
    let out = run_ok(&["gradcheck", "--family", "pwl-ls"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.starts_with("PASS max_rel_err"),
        "stdout was: {stdout}"
    );
}

#[test]
fn gradcheck_covers_warped_plda() {
    let out = run_ok(&["gradcheck", "--family", "plda", "--dim", "3", "--warp"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
}

#[test]
fn missing_file_gives_nonzero_exit_and_diagnostic() {
    let out = run(&[
        "estimate",
        "--scores",
        "/definitely/not/here.csv",
        "--n-grid",
        "1",
        "--tau",
        "0.0",
        "--out",
        "/tmp/unused.csv",
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr was: {stderr}");
}

#[test]
fn unknown_flag_is_rejected() {
    let out = run(&["estimate", "--frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn invariant_violation_surfaces_module_error() {
    let fx = fixture();
    let out = run(&[
        "estimate",
        "--scores",
        fx.scores.to_str().unwrap(),
        "--n-grid",
        "500", // more impostors than speakers
        "--tau",
        "0.0",
        "--trials",
        "50",
        "--out",
        fx.root.join("x.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("impostors"),
        "stderr should name the failed invariant, was: {stderr}"
    );
}

#[test]
fn simulate_rejects_bad_truth_file() {
    let fx = fixture();
    let bad = fx.root.join("bad.json");
    std::fs::write(&bad, r#"{"family":"unknown"}"#).unwrap();
    let out = run(&[
        "simulate",
        "--truth",
        bad.to_str().unwrap(),
        "--out",
        fx.root.join("y.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn loc_scale_truth_simulation_works() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("ls.json");
    std::fs::write(
        &truth,
        r#"{"family":"gaussian-ls","hyper_mean":[0.0,-0.5],"hyper_chol":[1.0,0.1,0.5],"n_speakers":8,"scores_per_pair":4,"seed":2}"#,
    )
    .unwrap();
    let out_csv = dir.path().join("ls_scores.csv");
    run_ok(&[
        "simulate",
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    // 8 speakers -> 56 ordered pairs x 4 scores + header
    assert_eq!(lines(&out_csv).len(), 56 * 4 + 1);
}
