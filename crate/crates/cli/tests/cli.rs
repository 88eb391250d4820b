//! End-to-end tests against the compiled `quant8` binary.

use std::path::Path;
use std::process::{Command, Output};

use quant8::tensor::{AxisRole, Tensor};

fn quant8(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quant8"))
        .args(args)
        .env_remove("QUANT8_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn save_matrix(path: &Path, rows: usize, cols: usize, data: Vec<f64>) {
    Tensor::matrix(rows, cols, [AxisRole::Other, AxisRole::Channel], data)
        .unwrap()
        .save(path)
        .unwrap();
}

#[test]
fn formats_table_lists_reference_constants() {
    let out = quant8(&["formats"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("448"), "missing e4m3 max: {text}");
    assert!(text.contains("57344"), "missing e5m2 max: {text}");
    assert!(text.contains("127"), "missing int8 max: {text}");
}

#[test]
fn unknown_format_exits_nonzero_with_machine_code() {
    let out = quant8(&["formats", "nosuch"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(
        err.lines().any(|l| l.starts_with("error[UNKNOWN_FORMAT]")),
        "stderr: {err}"
    );
}

#[test]
fn quantize_roundtrip_produces_grid_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.qt");
    let output = dir.path().join("decoded.qt");
    let data: Vec<f64> = (0..64).map(|i| (i as f64 - 31.5) * 0.37).collect();
    save_matrix(&input, 8, 8, data);

    let out = quant8(&[
        "quantize",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
        "--format",
        "e4m3",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("quantized 64 values into 1 scale groups"));

    // Values already on the grid are fixed points: re-quantizing the decoded
    // tensor must reproduce the same codes, and (up to the f32 precision of
    // the file format) the same values.
    let decoded = Tensor::load(&output).unwrap();
    let cfg = quant8::quantizer::QuantConfig::parse("e4m3/tensor/rtne").unwrap();
    let stream = quant8::rng::RandomStream::new(0);
    let q1 = quant8::quantizer::quantize(&decoded, &cfg, &stream).unwrap();
    let again = quant8::quantizer::dequantize(&q1).unwrap();
    let q2 = quant8::quantizer::quantize(&again, &cfg, &stream).unwrap();
    assert_eq!(q1.codes, q2.codes);
    for (a, b) in decoded.data().iter().zip(again.data()) {
        assert!((a - b).abs() <= 2e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn quantize_missing_input_fails_cleanly() {
    let out = quant8(&["quantize", "--in", "/nonexistent.qt", "--out", "/tmp/x.qt"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(
        err.lines().any(|l| l.starts_with("error[")),
        "stderr: {err}"
    );
}

#[test]
fn sweep_is_deterministic_for_a_fixed_seed() {
    let args = [
        "sweep-be",
        "--size",
        "8",
        "--trials",
        "2",
        "--nu-list",
        "3",
        "--formats",
        "int8",
        "--granularity",
        "tensor",
        "--seed",
        "5",
    ];
    let first = quant8(&args);
    let second = quant8(&args);
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    assert_eq!(
        quant8_cli::strip_timestamps(&stdout(&first)),
        quant8_cli::strip_timestamps(&stdout(&second)),
    );
}

#[test]
fn env_seed_is_resolved_into_the_manifest() {
    let out = Command::new(env!("CARGO_BIN_EXE_quant8"))
        .args(["error-profile", "--format", "int8", "--points", "4"])
        .env("QUANT8_SEED", "123")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("\"--seed\",\"123\""),
        "manifest should pin the env seed: {text}"
    );
    // An explicit flag still wins over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_quant8"))
        .args(["error-profile", "--format", "int8", "--points", "4", "--seed", "9"])
        .env("QUANT8_SEED", "123")
        .output()
        .unwrap();
    assert!(stdout(&out).contains("\"--seed\",\"9\""));
}

#[test]
fn report_goes_to_stdout_when_out_is_omitted() {
    let out = quant8(&["error-profile", "--format", "e5m2", "--points", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    assert_eq!(lines.next().unwrap(), "value,rel_error");
}

#[test]
fn train_demo_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "stepz = 10\n").unwrap();
    let out = quant8(&["train-demo", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error["), "stderr: {}", stderr(&out));
}

#[test]
fn train_demo_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "steps = 10\nseed = 3\n[quant]\ngradient = \"int8/tensor/rtne\"\n",
    )
    .unwrap();
    let out = quant8(&[
        "train-demo",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "5",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("\"--steps\",\"5\""), "flag should win: {text}");
    assert!(text.contains("\"--seed\",\"3\""), "file should fill the rest: {text}");
    assert!(text.contains("\"--gradient\",\"int8/tensor/rtne\""), "{text}");
}

#[test]
fn profile_reports_moments_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.qt");
    save_matrix(&input, 2, 2, vec![0.0, 1.0, 2.0, 3.0]);
    let out = quant8(&["profile", "--tensor-file", input.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["moments"]["count"], 4);
    assert!((json["moments"]["mean"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(json["manifest"]["command"], "profile");
}

#[test]
fn recommend_puts_gradients_on_the_wide_range_format() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.qt");
    let data: Vec<f64> = (0..256).map(|i| ((i * 37 + 11) % 97) as f64 / 97.0 - 0.5).collect();
    save_matrix(&input, 16, 16, data);
    let out = quant8(&[
        "recommend",
        "--tensor-file",
        input.to_str().unwrap(),
        "--category",
        "gradient",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["recommendation"]["format"], "e5m2");

    // The integer-only override redirects to finer scaling instead.
    let out = quant8(&[
        "recommend",
        "--tensor-file",
        input.to_str().unwrap(),
        "--category",
        "gradient",
        "--force-int8",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["recommendation"]["format"], "int8");
    assert_eq!(json["recommendation"]["granularity"], "fine");
}

#[test]
fn written_report_regenerates_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = quant8(&[
        "sweep-be",
        "--size",
        "6",
        "--trials",
        "1",
        "--nu-list",
        "5",
        "--formats",
        "e4m3",
        "--granularity",
        "tensor",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let original = std::fs::read_to_string(&path).unwrap();
    let again = quant8_cli::regenerate(&original).unwrap();
    let regenerated = String::from_utf8(again.report.unwrap()).unwrap();
    assert_eq!(
        quant8_cli::strip_timestamps(&original),
        quant8_cli::strip_timestamps(&regenerated),
    );
}
