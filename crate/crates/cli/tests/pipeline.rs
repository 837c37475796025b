use std::path::Path;
use std::process::{Command, Output};

fn qbe(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_qbe"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("qbe runs");
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qbe(dir, args);
    assert!(
        out.status.success(),
        "qbe {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn batch_subcommands_chain_through_the_data_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["generate-corpus", "--members", "600", "--seed", "3"]);
    for f in ["corpus.jsonl", "priors.csv", "dictionaries"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    ok(dir, &["build-expertise", "--rank", "8", "--threshold", "0.3", "--seed", "3"]);
    assert!(dir.join("expertise.tsv").exists());
    let sim = ok(dir, &["simulate-logs", "--sessions", "200", "--example-sessions", "40", "--seed", "3"]);
    assert!(sim.contains("keyword"), "{sim}");
    let labels = ok(dir, &["make-labels", "--min-inmails", "2", "--ic", "1..3"]);
    assert!(labels.contains("randomized test"), "{labels}");
    let trained = ok(dir, &["train", "--cutoff", "15", "--seed", "3"]);
    assert_eq!(trained.lines().count(), 3, "{trained}");

    let models = ["baseline-1", "baseline-2", "full"].map(|m| dir.join("models").join(format!("{m}.json")));
    let list = models.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    let test = dir.join("labels").join("randomized_test.jsonl");
    let report = dir.join("out.json");
    let eval = ok(
        dir,
        &[
            "evaluate",
            "--test",
            test.to_str().unwrap(),
            "--models",
            &list,
            "--report",
            report.to_str().unwrap(),
        ],
    );
    assert!(eval.contains("NDCG@5") && eval.contains("full"), "{eval}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["comparison"]["models"].as_array().unwrap().len(), 3);
    assert_eq!(json["correlations"].as_array().unwrap().len(), 9);

    let skills = ok(dir, &["skill-selection", "--k", "10"]);
    assert!(skills.contains("Top-10") && skills.contains("Rand-10"), "{skills}");
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qbe(tmp.path(), &["make-labels", "--ic", "3..1"]);
    assert!(!out.status.success());
    let out = qbe(tmp.path(), &["serve", "--port", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    let out = qbe(tmp.path(), &["train"]);
    assert!(!out.status.success());
}
