use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn corpusforge(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corpusforge"));
    cmd.args(args).env("RUST_LOG", "error");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn fixture_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        serde_json::json!({
            "inputs": {
                "atomic_dir": fixture("atomic"),
                "glucose": fixture("glucose.csv"),
                "copa": {"test": fixture("copa.xml")},
                "tcr": {"test": fixture("tcr.jsonl")},
                "vocab": fixture("tokenizer/wordpiece_vocab.txt")
            },
            "seed": 5
        }),
    )
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_lists_subcommands_and_flags() {
    let o = corpusforge(&["--help"], &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for word in [
        "ingest", "verbalize", "grammar", "mlm-prep", "convert-copa", "convert-tcr", "stats", "overlap", "all",
        "--config", "--seed", "--workers", "--out",
    ] {
        assert!(text.contains(word), "missing {word}");
    }
    let o = corpusforge(&["convert-copa", "--help"], &[]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("--prompt") && text.contains("--easy-hard-index"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&corpusforge(&["nonsense"], &[])), 2);
    assert_eq!(code(&corpusforge(&["verbalize", "--bogus"], &[])), 2);
    assert_eq!(code(&corpusforge(&["convert-copa", "--copa", "no-equals"], &[])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({"sed": 1}));
    assert_eq!(code(&corpusforge(&["verbalize", "--config", cfg.to_str().unwrap()], &[])), 2);
    assert_eq!(code(&corpusforge(&["verbalize"], &[("CORPUSFORGE_SEED", "\"x\"")])), 2);
}

#[test]
fn bad_input_exits_3_and_missing_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<copa-corpus>\n<item id=\"1\">\n</copa-corpus>").unwrap();
    let out = dir.path().join("out");
    let spec = format!("test={}", bad.display());
    let o = corpusforge(&["convert-copa", "--copa", &spec, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.xml:3"));

    let missing = dir.path().join("missing");
    let o = corpusforge(
        &["verbalize", "--atomic-dir", missing.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 4);
    assert!(!out.exists());
}

#[test]
fn precedence_is_file_then_env_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let out = dir.path().join("out");
    let base = ["verbalize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let seed_of = || {
        let text = std::fs::read_to_string(out.join("verbalize/config.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()["seed"].as_u64().unwrap()
    };

    assert_eq!(code(&corpusforge(&base, &[])), 0);
    assert_eq!(seed_of(), 5);
    assert_eq!(code(&corpusforge(&base, &[("CORPUSFORGE_SEED", "6")])), 0);
    assert_eq!(seed_of(), 6);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "7"]);
    assert_eq!(code(&corpusforge(&with_flag, &[("CORPUSFORGE_SEED", "6")])), 0);
    assert_eq!(seed_of(), 7);
}

#[test]
fn all_twice_gives_identical_trees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let mut trees = Vec::new();
    for (i, workers) in ["1", "8"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let o = corpusforge(
            &["all", "--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap(), "--prompt"],
            &[],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8(o.stdout).unwrap();
        assert!(stdout.lines().any(|l| l.starts_with("mlm-prep\t")));
        trees.push(read_tree(&out));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn stats_writes_distribution_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let out = dir.path().join("out");
    let o = corpusforge(&["stats", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let relations = std::fs::read_to_string(out.join("stats/relations.tsv")).unwrap();
    assert!(relations.lines().any(|l| l.starts_with("AtLocation\tphysical\t1")), "{relations}");
    let lengths = std::fs::read_to_string(out.join("stats/lengths.tsv")).unwrap();
    assert!(lengths.lines().count() > 1);
}
