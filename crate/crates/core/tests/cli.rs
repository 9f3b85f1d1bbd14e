use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gnqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnqa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gnqa(args);
    assert!(
        out.status.success(),
        "gnqa {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&[
        "synth",
        "--out",
        s(dir),
        "--n-train",
        "200",
        "--n-val",
        "50",
        "--n-test",
        "50",
        "--seed",
        seed,
    ]);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    synth(&a, "4");
    synth(&b, "4");
    synth(&c, "5");
    for f in [
        "train.jsonl",
        "scene_graphs.jsonl",
        "embeddings.txt",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        fs::read(a.join("train.jsonl")).unwrap(),
        fs::read(c.join("train.jsonl")).unwrap()
    );
}

#[test]
fn train_eval_explain_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    let run = t.path().join("run");
    synth(&data, "1");
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--epochs",
        "2",
        "--hidden",
        "16",
    ]);
    assert_eq!(
        fs::read_to_string(run.join("train_log.jsonl"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    let ckpt = run.join("model.json");
    let stdout = ok(&[
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ckpt),
        "--split",
        "val",
    ]);
    assert!(stdout.contains("overall_accuracy"), "{stdout}");

    let ex = t.path().join("ex");
    ok(&[
        "explain",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ckpt),
        "--sample",
        "0",
        "--q",
        "1.0",
        "--out",
        s(&ex),
    ]);
    let dot = fs::read_dir(&ex)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "dot"))
        .expect("a .dot file");
    let text = fs::read_to_string(dot).unwrap();
    assert!(text.starts_with("digraph scene {"));
    assert!(!text.contains("dashed"));

    let missing = gnqa(&[
        "explain",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ckpt),
        "--sample",
        "no-such-id",
        "--out",
        s(&ex),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn config_file_supplies_flags() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    synth(&data, "2");
    let cfg = t.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"data": "{}", "epochs": 1, "head": "ugn", "no_edges": true}}"#,
            s(&data)
        ),
    )
    .unwrap();
    let run = t.path().join("run");
    ok(&["--config", s(&cfg), "train", "--out", s(&run)]);
    let model = fs::read_to_string(run.join("model.json")).unwrap();
    assert!(model.contains("\"no_edges\": true") || model.contains("\"no_edges\":true"));
    assert_eq!(
        fs::read_to_string(run.join("train_log.jsonl"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn exit_codes() {
    assert_eq!(gnqa(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(gnqa(&["--help"]).status.code(), Some(0));
    assert_eq!(
        gnqa(&["eval", "--checkpoint", "/nonexistent/m.json"])
            .status
            .code(),
        Some(2)
    );
    let t = tempfile::tempdir().unwrap();
    let bad = t.path().join("g.json");
    fs::write(&bad, r#"{"nodes":[{"id":1,"name":"a"}],"edges":[{"subject_id":1,"predicate":"on","object_id":2}]}"#).unwrap();
    let out = gnqa(&["validate", s(&bad)]);
    assert_ne!(out.status.code(), Some(0));
}
