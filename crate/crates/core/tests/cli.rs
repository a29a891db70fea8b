use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_flowcl");

fn flowcl(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env("FLOWCL_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = flowcl(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Synthetic data plus a config pointing at it.
fn setup(dir: &Path) {
    ok(
        dir,
        &[
            "--seed",
            "3",
            "generate-synthetic",
            "--out-dir",
            "data",
            "--samples",
            "400",
            "--drop",
            "2",
        ],
    );
    std::fs::write(
        dir.join("run.toml"),
        r#"seed = 3
workdir = "work"

[preprocess]
schema = "data/synthetic.schema.toml"
encoder_csv = "data/synthetic-encoder.csv"
head_csv = "data/synthetic-head.csv"

[pretrain]
preset = "compact"
epochs = 2

[head]
epochs = 5
"#,
    )
    .unwrap();
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowcl(dir.path(), &["--config", "absent.toml", "show-config"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn invalid_config_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "version = 1\nbogus = 1\n").unwrap();
    assert_eq!(code(&flowcl(dir.path(), &["--config", "bad.toml", "show-config"])), 2);
    assert_eq!(code(&flowcl(dir.path(), &["no-such-command"])), 2);
    let out = flowcl(dir.path(), &["pretrain", "--preset", "huge"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--seed", "11", "show-config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    std::fs::write(dir.path().join("echo.toml"), &text).unwrap();
    let again = ok(dir.path(), &["--config", "echo.toml", "show-config"]);
    assert_eq!(text, String::from_utf8(again.stdout).unwrap());
    assert!(text.contains("seed = 11"));
}

#[test]
fn preprocess_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let files = ["preprocessor.json", "encoder-set.bin", "head-set.bin"];
    ok(dir.path(), &["--config", "run.toml", "preprocess"]);
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|f| std::fs::read(dir.path().join("work").join(f)).unwrap())
        .collect();
    ok(dir.path(), &["--config", "run.toml", "preprocess"]);
    let second: Vec<Vec<u8>> = files
        .iter()
        .map(|f| std::fs::read(dir.path().join("work").join(f)).unwrap())
        .collect();
    assert_eq!(first, second);
    assert!(dir.path().join("work/preprocessor.json.manifest.json").exists());
}

#[test]
fn full_pipeline_and_disjoint_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d);
    ok(d, &["--config", "run.toml", "preprocess"]);
    ok(d, &["--config", "run.toml", "pretrain"]);
    ok(d, &["--config", "run.toml", "train-head"]);
    let report = ok(d, &["--config", "run.toml", "evaluate"]);
    let json: serde_json::Value = serde_json::from_slice(&report.stdout).unwrap();
    let acc = json["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(
        json,
        serde_json::from_slice::<serde_json::Value>(&std::fs::read(d.join("work/report.json")).unwrap()).unwrap()
    );

    let reduced = ok(
        d,
        &[
            "--config",
            "run.toml",
            "transfer-eval",
            "--target-schema",
            "data/synthetic-reduced.schema.toml",
            "--target-csv",
            "data/synthetic-reduced.csv",
        ],
    );
    let json: serde_json::Value = serde_json::from_slice(&reduced.stdout).unwrap();
    assert_eq!(json["alignment"]["masked"], 2);

    // Rename every feature so nothing lines up.
    let schema = std::fs::read_to_string(d.join("data/synthetic.schema.toml")).unwrap();
    std::fs::write(
        d.join("data/foreign.schema.toml"),
        schema.replace("name = \"f", "name = \"g"),
    )
    .unwrap();
    let csv = std::fs::read_to_string(d.join("data/synthetic-head.csv")).unwrap();
    let (header, body) = csv.split_once('\n').unwrap();
    std::fs::write(
        d.join("data/foreign.csv"),
        format!("{}\n{body}", header.replace('f', "g")),
    )
    .unwrap();
    let out = flowcl(
        d,
        &[
            "--config",
            "run.toml",
            "transfer-eval",
            "--target-schema",
            "data/foreign.schema.toml",
            "--target-csv",
            "data/foreign.csv",
        ],
    );
    assert_eq!(code(&out), 7, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_without_a_head_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    ok(dir.path(), &["--config", "run.toml", "preprocess"]);
    assert_eq!(code(&flowcl(dir.path(), &["--config", "run.toml", "evaluate"])), 3);
}
