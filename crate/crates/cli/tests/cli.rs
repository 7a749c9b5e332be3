use std::path::Path;
use std::process::{Command, Output};

fn rgx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgx")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let path = dir.join("d.csv");
    let path = path.to_str().unwrap().to_string();
    let mut args = vec!["synth", "--n", "80", "--output", &path];
    args.extend_from_slice(extra);
    stdout(&rgx(&args));
    path
}

#[test]
fn scalar_commands_print_known_values() {
    let g = stdout(&rgx(&["gini", "--values", "1,2,3"]));
    assert!((field(&g, "gini") - 2.0 / 9.0).abs() < 1e-15);
    assert!((field(&g, "s_p") - 2.0 / 9.0).abs() < 1e-15);

    let r = stdout(&rgx(&["rgx", "--y", "1,2,3", "--z", "2,1,3"]));
    assert_eq!(field(&r, "rgx"), 0.75);

    let s = stdout(&rgx(&["spearman", "--a", "1,2,3", "--b", "2,1,3"]));
    assert_eq!(field(&s, "spearman"), 0.5);

    let c = stdout(&rgx(&["cvm", "--x", "0,1,2", "--y", "0,1,2"]));
    assert_eq!(field(&c, "cvm_p"), 0.0);
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(rgx(&["gini", "--values", "1,x,3"]).status.code(), Some(2));
    assert_eq!(rgx(&["gini"]).status.code(), Some(2));
    assert_eq!(rgx(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rgx(&["rgx", "--y", "2,2,2", "--z", "1,2,3"]).status.code(), Some(4));
    assert_eq!(rgx(&["gini", "--input", "/nonexistent/d.csv", "--column", "y"]).status.code(), Some(6));

    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), &[]);
    assert_eq!(rgx(&["gini", "--input", &csv, "--column", "nope"]).status.code(), Some(3));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "folds = \"five\"\n").unwrap();
    assert_eq!(rgx(&["--config", bad.to_str().unwrap(), "gini", "--values", "1,2"]).status.code(), Some(3));
}

#[test]
fn config_file_supplies_pipeline_settings() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), &["--noise", "0.3"]);
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!("input = {csv:?}\ntargets = [\"y1\"]\nfeatures = [\"x1\", \"x2\"]\nmodels = [\"ols\"]\nfolds = 4\nformats = [\"json\"]\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    stdout(&rgx(&["--config", config.to_str().unwrap(), "safe-eval", "--out-dir", out.to_str().unwrap()]));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("safe.json")).unwrap()).unwrap();
    assert_eq!(json[0]["metadata"]["folds"], 4);
    assert!(!out.join("safe.txt").exists());

    // flags win over the file
    let out = dir.path().join("out2");
    stdout(&rgx(&["--config", config.to_str().unwrap(), "--folds", "3", "safe-eval", "--out-dir", out.to_str().unwrap()]));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("safe.json")).unwrap()).unwrap();
    assert_eq!(json[0]["metadata"]["folds"], 3);
}

#[test]
fn whiten_reports_weights_and_writes_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path(), &["--targets", "3", "--noise", "0.2"]);
    let white = dir.path().join("w.csv");
    let text = stdout(&rgx(&[
        "whiten", "--input", &csv, "--columns", "y1,y2,y3", "--scheme", "cholesky",
        "--output", white.to_str().unwrap(),
    ]));
    let lambdas: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("lambda\t"))
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(lambdas.len(), 3);
    assert!((lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let g = field(&text, "multivariate_gini");
    assert!((0.0..1.0).contains(&g));
    let written = std::fs::read_to_string(white).unwrap();
    assert!(written.starts_with("y1_white,y2_white,y3_white"));
    assert_eq!(written.lines().count(), 81);
}
