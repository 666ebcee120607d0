use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn vrn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn vrn")
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn pipeline(out: &Path) {
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();
    ok(vrn(&["gen-data", "--config", cfg], out));
    ok(vrn(&["train", "--config", cfg, "--workers", "1"], out));
    ok(vrn(&["eval", "--config", cfg], out));
}

fn first_test_question(out: &Path) -> String {
    let text = std::fs::read_to_string(out.join("qa_test_1hop.txt")).unwrap();
    text.lines().next().unwrap().split('\t').next().unwrap().to_owned()
}

#[test]
fn end_to_end_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    pipeline(out);
    for f in [
        "kg.tsv",
        "qa_train_1hop.txt",
        "qa_test_1hop.txt",
        "qa_types_valid_1hop.txt",
        "checkpoint_1hop_pretrain.bin",
        "checkpoint_1hop_final.bin",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("dataset,hop,regime,hits_at_1,entity_accuracy"));
    assert!(lines.next().unwrap().starts_with("synthetic,1,eu,"));
    let log = std::fs::read_to_string(out.join("trainlog.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("step,total_loss,mean_signal,elbo,probe_entity_accuracy"));
    assert!(log.lines().count() > 2);

    let q = first_test_question(out);
    let cfg = smoke_config();
    let stdout = ok(vrn(&["infer", "--config", cfg.to_str().unwrap(), &q], out));
    assert!(stdout.starts_with("question: "));
    assert!(stdout.contains("\nanswer: "));
    // greedy: one candidate row between header and answer
    let rows = stdout.lines().skip(2).take_while(|l| !l.starts_with("answer:")).count();
    assert_eq!(rows, 1);

    let stdout = ok(vrn(&["infer", "--config", cfg.to_str().unwrap(), "--beam", "3", "--explain", &q], out));
    let rows = stdout.lines().skip(2).take_while(|l| !l.starts_with("answer:")).count();
    assert_eq!(rows, 3);
    let path = stdout.lines().find(|l| l.starts_with("path: ")).expect("path line");
    assert!(path.contains(" -[") && path.contains("]-> "), "{path}");
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs");
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\ndim = 8\nbogus_knob = 3\n").unwrap();
    let o = vrn(&["gen-data", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("bogus_knob"));
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "config");
    assert_eq!(v["key"], "bogus_knob");
}

#[test]
fn runtime_errors_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrn(&["infer", "anything"], &dir.path().join("missing"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(!dir.path().join("missing").exists());
}

#[test]
fn bad_hops_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrn(&["gen-data", "--hops", "4"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8(o.stderr).unwrap().trim_end().lines().count(), 1);
}

#[test]
fn inspect_scope_lists_source_first() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config();
    ok(vrn(&["gen-data", "--config", cfg.to_str().unwrap()], dir.path()));
    let entity = std::fs::read_to_string(dir.path().join("entities.txt")).unwrap().lines().next().unwrap().to_owned();
    let stdout = ok(vrn(&["inspect-scope", "--hops", "2", &entity], dir.path()));
    let mut lines = stdout.lines().skip(2);
    assert_eq!(lines.next().unwrap(), format!("0\t{entity}\t0"));
    assert!(lines.all(|l| l.starts_with('1') || l.starts_with('2')));
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(vrn(&["oracle-check", "--seed", "2"], dir.path()));
    assert!(stdout.lines().count() >= 6);
    assert!(stdout.lines().all(|l| l.contains(": pass")), "{stdout}");
}
