use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn folkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_folkm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy/problem.toml")
}

/// Four orthonormal samples and one unary learnable predicate `A` with a
/// linear kernel, so a model with weight `w_i` on sample `i` has `f(i) = w_i`.
fn unary_problem(dir: &Path, clauses: &str, extra: &str) -> PathBuf {
    std::fs::write(dir.join("samples.csv"), "0,1,0,0,0\n1,0,1,0,0\n2,0,0,1,0\n3,0,0,0,1\n").unwrap();
    std::fs::write(dir.join("a.csv"), "0,1\n3,0\n").unwrap();
    std::fs::write(dir.join("clauses.txt"), clauses).unwrap();
    let config = format!(
        r#"[data]
samples = "samples.csv"
clauses = "clauses.txt"

[[predicates]]
name = "A"
arity = 1
kernel = "linear"
labels = "a.csv"

[[predicates]]
name = "R"
arity = 2
kind = "known"
{extra}"#
    );
    let path = dir.join("problem.toml");
    std::fs::write(&path, config).unwrap();
    path
}

fn unary_model(dir: &Path, weights: [f64; 4]) -> PathBuf {
    let mut text = String::from("folkm-model 1\npredicate\tA\t1\tlinear\t4\n");
    for (i, w) in weights.iter().enumerate() {
        text.push_str(&format!("{i}\t{w:?}\n"));
    }
    let path = dir.join("model.txt");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_accepts_the_toy_problem() {
    let o = folkm(&["check", "--config", s(&toy_config())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("clause=a_implies_b groundings=60"));
    assert_eq!(out.lines().last(), Some("OK"));
}

#[test]
fn check_dumps_graphs() {
    let o = folkm(&["check", "--config", s(&toy_config()), "--dump-graph"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("# clause a_implies_b"));
    assert!(out.contains("forall_mean"));
    assert!(out.contains("one_minus"));
}

#[test]
fn check_names_unbound_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "forall x: A(zeta)\n", "");
    let o = folkm(&["check", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zeta"), "{}", stderr(&o));
}

#[test]
fn check_reports_grounding_count_over_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "forall x, y: A(x) -> A(y)\n", "\n[grounding]\nmax_groundings = 10\n");
    let o = folkm(&["check", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("16") && err.contains("10"), "{err}");
}

#[test]
fn missing_config_is_a_runtime_failure() {
    let o = folkm(&["check", "--config", "/nonexistent/problem.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flags_are_validation_failures() {
    let o = folkm(&["train", "--config", s(&toy_config()), "--lambda-v", "a_implies_b"]);
    assert_eq!(o.status.code(), Some(2));
    let o = folkm(&["train", "--config", s(&toy_config()), "--lambda-v", "missing=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = folkm(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_without_clauses_has_zero_penalty_every_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "# no clauses\n", "");
    let out = dir.path().join("run");
    let o = folkm(&["train", "--config", s(&cfg), "--out", s(&out), "--max-epochs", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("V=0.0"));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut rows = trace.lines().skip(1).peekable();
    assert!(rows.peek().is_some());
    for row in rows {
        assert_eq!(row.split(',').nth(4), Some("0.0"), "{row}");
    }
}

#[test]
fn toy_training_switches_stage_once_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("trace.csv"), "stale\n".repeat(100_000)).unwrap();
    let args = |o: &Path| {
        vec![
            "train".to_string(),
            "--config".into(),
            s(&toy_config()).into(),
            "--out".into(),
            s(o).into(),
            "--seed".into(),
            "3".into(),
            "--max-epochs".into(),
            "300".into(),
        ]
    };
    let o = Command::new(env!("CARGO_BIN_EXE_folkm")).args(args(&out)).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(!trace.contains("stale"));
    let stages: Vec<&str> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let switches = stages.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(switches, 1);
    assert_eq!(stages.first(), Some(&"labeled"));
    assert_eq!(stages.last(), Some(&"abstraction"));

    let out2 = dir.path().join("again");
    let o = Command::new(env!("CARGO_BIN_EXE_folkm")).args(args(&out2)).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("trace.csv")).unwrap(), std::fs::read(out2.join("trace.csv")).unwrap());
    assert_eq!(std::fs::read(out.join("model.txt")).unwrap(), std::fs::read(out2.join("model.txt")).unwrap());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    for key in ["R=", "N=", "V=", "E=", "penalty.a_implies_b="] {
        assert!(summary.lines().any(|l| l.starts_with(key)), "missing {key}");
    }

    let o = folkm(&[
        "predict",
        "--config",
        s(&toy_config()),
        "--model",
        s(&out.join("model.txt")),
        "--predicate",
        "B",
        "--args",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("predicate=B args=0 raw="));
}

#[test]
fn penalty_report_for_satisfied_clause_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "[name=all] forall x: A(x)\n", "");
    let model = unary_model(dir.path(), [1.0, 1.0, 1.0, 1.0]);
    let o = folkm(&["penalty-report", "--config", s(&cfg), "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("clause=all weight=1.0 penalty=0.0 groundings=4"), "{out}");
    assert!(!out.contains("worst="));
}

#[test]
fn penalty_report_lists_the_violated_grounding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "[name=all] forall x: A(x)\n", "");
    let model = unary_model(dir.path(), [1.0, 1.0, 1.0, 0.0]);
    let report_dir = dir.path().join("report");
    let o = folkm(&["penalty-report", "--config", s(&cfg), "--model", s(&model), "--out", s(&report_dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("penalty=0.25"), "{out}");
    assert!(out.contains("worst=1 x=3 value=0.0"), "{out}");
    assert_eq!(std::fs::read_to_string(report_dir.join("penalty_report.txt")).unwrap(), out);
}

#[test]
fn penalty_report_for_unsatisfied_existential_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "[name=some] exists x: A(x)\n", "");
    let model = unary_model(dir.path(), [0.0; 4]);
    let o = folkm(&["penalty-report", "--config", s(&cfg), "--model", s(&model), "--top-k", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("penalty=1.0"), "{out}");
    assert_eq!(out.matches("worst=").count(), 2);
}

#[test]
fn mismatched_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "forall x: A(x)\n", "");
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "folkm-model 1\npredicate\tA\t1\trbf(gamma=1)\t1\n0\t1.0\n").unwrap();
    let o = folkm(&["penalty-report", "--config", s(&cfg), "--model", s(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel"), "{}", stderr(&o));
}

#[test]
fn predict_defaults_to_every_pooled_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unary_problem(dir.path(), "forall x: A(x)\n", "");
    let model = unary_model(dir.path(), [0.25, 1.7, -0.5, 0.42]);
    let o = folkm(&["predict", "--config", s(&cfg), "--model", s(&model), "--predicate", "A"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.contains("args=1 raw=1.7 truth=1.0"));
    assert!(out.contains("args=2 raw=-0.5 truth=0.0"));
    assert!(out.contains("args=3 raw=0.42 truth=0.42"));
    let o = folkm(&["predict", "--config", s(&cfg), "--model", s(&model), "--predicate", "Nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn guarded_fixture_checks_and_trains() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/citations/problem.toml");
    let o = folkm(&["check", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("clause=cites_same_topic groundings=6"));
    let dir = tempfile::tempdir().unwrap();
    let o = folkm(&["train", "--config", s(&cfg), "--out", s(dir.path()), "--max-epochs", "300"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = folkm(&["penalty-report", "--config", s(&cfg), "--model", s(&dir.path().join("model.txt"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("clause=some_topic"));
}
