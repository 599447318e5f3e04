use std::path::Path;
use std::process::{Command, Output};

#[rustfmt::skip]
const SMALL: [&str; 10] = [
    "--set", "hidden=16",
    "--set", "embed_dim=8",
    "--set", "attention_dim=8",
    "--set", "term_epochs=2",
    "--set", "sent_epochs=2",
];

fn more(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_more"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

#[test]
fn full_toy_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: Vec<&str>| {
        let o = more(d, &args);
        assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
        o
    };
    ok(vec!["prepare", "--toy"]);
    for f in [
        "config.txt",
        "train.jsonl",
        "test.jsonl",
        "descriptive.txt",
        "story.txt",
    ] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let corpora = [
        "--config",
        "config.txt",
        "--corpus",
        "descriptive.txt",
        "--style",
        "DESCRIPTIVE",
        "--corpus",
        "story.txt",
        "--style",
        "STORY",
    ];
    let train = ok(with_small(&[
        "train-term",
        "--config",
        "config.txt",
        "--data",
        "train.jsonl",
    ]));
    assert!(stderr(&train).contains("term epoch 2"), "logs go to stderr");
    assert!(train.stdout.is_empty());
    ok(with_small(&[&["train-sent"][..], &corpora].concat()));
    let clf = ok(with_small(&[&["train-clf"][..], &corpora].concat()));
    assert!(String::from_utf8_lossy(&clf.stdout).contains("precision"));
    let gen = ok(with_small(&[
        "generate",
        "--config",
        "config.txt",
        "--data",
        "test.jsonl",
    ]));
    assert!(String::from_utf8_lossy(&gen.stdout).contains("captions"));
    let eval = ok(with_small(&[
        "evaluate",
        "--config",
        "config.txt",
        "--data",
        "test.jsonl",
        "--clf",
        "clf.json",
    ]));
    assert!(String::from_utf8_lossy(&eval.stdout).contains("full model"));
    let report = ok(with_small(&["report", "--config", "config.txt"]));
    assert!(String::from_utf8_lossy(&report.stdout).contains("wps_std"));
}

#[test]
fn missing_checkpoint_fails_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    assert!(more(dir.path(), &["prepare", "--toy"]).status.success());
    let o = more(
        dir.path(),
        &["generate", "--config", "config.txt", "--data", "test.jsonl"],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("train-term"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "hidden = 8\nhiddne = 9\n").unwrap();
    let o = more(dir.path(), &["train-term", "--config", "bad.txt", "--data", "x.jsonl"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("hiddne"), "{}", stderr(&o));
}

#[test]
fn bad_override_syntax_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(more(dir.path(), &["prepare", "--toy"]).status.success());
    let o = more(
        dir.path(),
        &[
            "train-term",
            "--config",
            "config.txt",
            "--data",
            "train.jsonl",
            "--set",
            "hidden",
        ],
    );
    assert!(!o.status.success());
}
