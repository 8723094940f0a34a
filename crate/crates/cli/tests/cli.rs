use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prefcorpus"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stats_line(out: &Output, stage: &str) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let prefix = format!("{stage}: ");
    let line = err
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{stage}` stats in:\n{err}"));
    serde_json::from_str(line).unwrap()
}

fn line(src: &str, tgt: &str) -> String {
    json!({"src_lang": "en", "tgt_lang": "de", "src": src, "tgt": tgt}).to_string()
}

const GOOD: [(&str, &str); 4] = [
    ("Can you send order 62334 today?", "Können Sie die Bestellung 62334 heute senden?"),
    ("Your refund of 32348 dollars has been processed.", "Ihre Rückerstattung von 32348 Dollar wurde bearbeitet."),
    ("We have 28794 units of jacket in stock.", "Wir haben 28794 Stück Jacke auf Lager."),
    ("Thank you for your purchase 😊", "Danke für Ihren Einkauf 😊"),
];

/// Four clean pairs, one defect per filter and one malformed line.
fn mixed_fixture(dir: &Path) -> PathBuf {
    let send = GOOD[0].1;
    let mut lines: Vec<String> = GOOD.iter().map(|(s, t)| line(s, t)).collect();
    lines.push(line(GOOD[0].0, &[send, send, send].join(" ")));
    lines.push(line(GOOD[0].0, "¿Puede enviar el pedido 62334 hoy?"));
    lines.push(line(GOOD[0].0, &format!("Mein Satz ist: {send}")));
    lines.push(line("Thank you for your purchase 🙂", "Danke für Ihren Einkauf 😊"));
    lines.push(line(GOOD[0].0, "Können Sie die Bestellung 62335 heute senden?"));
    lines.push(line(GOOD[0].0, "Ihre Rückerstattung von 62334 Dollar wurde bearbeitet."));
    lines.push("{not json".into());
    let p = dir.join("mixed.jsonl");
    fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

#[test]
fn clean_counts_balance_and_streams_split() {
    let dir = tempfile::tempdir().unwrap();
    mixed_fixture(dir.path());
    let out = ok(
        dir.path(),
        &["clean", "--in", "mixed.jsonl", "--out", "good.jsonl", "--rejects", "bad.jsonl", "--quarantine", "q.jsonl"],
    );
    let s = stats_line(&out, "clean");
    assert_eq!(s["input"], 10);
    assert_eq!(s["passed"], 4);
    assert_eq!(s["malformed"], 1);
    assert_eq!(s["quarantined"], 0);
    assert_eq!(s["balanced"], true);
    let failed: BTreeMap<String, u64> = serde_json::from_value(s["failed"].clone()).unwrap();
    for f in ["length", "language", "danger_words", "emoji", "number", "similarity"] {
        assert_eq!(failed.get(f), Some(&1), "{f}: {failed:?}");
    }
    let count = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count();
    assert_eq!(count("good.jsonl"), 4);
    assert_eq!(count("bad.jsonl"), 6);
    assert_eq!(count("q.jsonl"), 0);
    // the last verdict of each reject names the filter that stopped it
    let stopped: Vec<String> = fs::read_to_string(dir.path().join("bad.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let trail = v["trail"].as_array().unwrap();
            assert!(trail[..trail.len() - 1].iter().all(|t| t["passed"] == true));
            trail.last().unwrap()["filter"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(stopped, ["length", "language", "danger_words", "emoji", "number", "similarity"]);
    assert!(out.stdout.is_empty());
}

#[test]
fn clean_strict_names_stage_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    mixed_fixture(dir.path());
    let out = run(dir.path(), &["clean", "--in", "mixed.jsonl", "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error: clean: mixed.jsonl: line 11: malformed JSON"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["clean", "--bogus"][..], &["frobnicate"], &["clean"], &["--jobs", "0", "ablate"]] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
    let bare = run(dir.path(), &[]);
    assert_eq!(bare.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bare.stderr).contains("Usage"));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_is_an_operational_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[filters]\nalpha = 2\n").unwrap();
    let out = run(dir.path(), &["--config", "c.toml", "ablate", "--sizes", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config: "));
}

fn with<'a>(c: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    [c, rest].concat()
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.insert(p.clone(), Vec::new());
                stack.push(p);
            } else {
                out.insert(p.clone(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Sources, pairs, params and a cold-started store in `dir`.
fn prepared(dir: &Path) {
    fs::write(dir.join("c.toml"), "[store]\nroot = \"store\"\n").unwrap();
    let c = ["--config", "c.toml", "--no-timestamps"];
    ok(dir, &with(&c, &["sources", "--lang", "en", "--targets", "de,ja", "--count", "8", "--out", "src.jsonl"]));
    ok(dir, &with(&c, &["generate", "--sources", "src.jsonl", "--out", "sets.jsonl"]));
    ok(dir, &with(&c, &["label", "--in", "sets.jsonl", "--out", "pairs.jsonl"]));
    ok(dir, &with(&c, &["train-rm", "--pairs", "pairs.jsonl", "--out", "params.json"]));
    ok(dir, &with(&c, &["pipeline", "cold-start", "--sources", "src.jsonl"]));
}

#[test]
fn dry_run_leaves_the_filesystem_alone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    mixed_fixture(d);
    let before = snapshot(d);
    let c = ["--config", "c.toml", "--dry-run"];

    let out = ok(d, &with(&c, &["pipeline", "update", "--sources", "src.jsonl", "--params", "params.json"]));
    let manifest: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["stage"], "regular_update");
    assert_eq!(manifest["dry_run"], true);
    assert!(manifest["selected_count"].as_u64().unwrap() > 0);

    ok(d, &with(&c, &["pipeline", "cold-start", "--sources", "src.jsonl"]));
    ok(d, &with(&c, &["clean", "--in", "mixed.jsonl", "--out", "g.jsonl", "--rejects", "r.jsonl"]));
    ok(d, &with(&c, &["export", "--direction", "en-de", "--out", "train.jsonl"]));
    ok(d, &with(&c, &["train-rm", "--pairs", "pairs.jsonl", "--out", "p2.json"]));
    ok(d, &with(&c, &["langid", "train", "--out-a", "a.json", "--out-b", "b.json"]));
    assert_eq!(snapshot(d), before);
}

#[test]
fn same_argv_same_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let mut all = Vec::new();
            for args in [
                &["--seed", "7", "sources", "--lang", "en", "--targets", "fr,zh", "--count", "5"][..],
                &["generate", "--sources", "src.jsonl"],
                &["select", "--in", "sets.jsonl", "--params", "params.json"],
                &["ablate", "--sizes", "20,40", "--trials", "2", "--epochs", "50"],
                &["--config", "c.toml", "--no-timestamps", "--dry-run", "pipeline", "update", "--sources", "src.jsonl", "--params", "params.json"],
            ] {
                all.extend(ok(d, args).stdout);
            }
            all
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert!(!runs[0].is_empty());
}

#[test]
fn second_cold_start_adds_nothing_and_export_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    let c = ["--config", "c.toml", "--no-timestamps"];
    ok(d, &with(&c, &["export", "--direction", "en-ja", "--out", "first.jsonl"]));
    let out = ok(d, &with(&c, &["pipeline", "cold-start", "--sources", "src.jsonl"]));
    let m: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["selected_count"], 0);
    assert_eq!(m["dedup_skipped"], m["input_count"]);
    ok(d, &with(&c, &["export", "--direction", "en-ja", "--out", "second.jsonl"]));
    let first = fs::read(d.join("first.jsonl")).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, fs::read(d.join("second.jsonl")).unwrap());

    let due = ok(d, &with(&c, &["pipeline", "retrain-due", "--languages", "en,de"]));
    assert_eq!(String::from_utf8_lossy(&due.stdout).trim(), "false");
    let due = ok(d, &with(&c, &["pipeline", "retrain-due", "--languages", "en,fr"]));
    assert_eq!(String::from_utf8_lossy(&due.stdout).trim(), "true");
}

#[test]
fn langid_round_trip_through_profile_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["langid", "train", "--out-a", "a.json", "--out-b", "b.json"]);
    fs::write(d.join("c.toml"), "[langid]\nprofiles = [\"a.json\", \"b.json\"]\n").unwrap();
    let out = ok(d, &["--config", "c.toml", "langid", "detect", "--text", "Wir haben 28794 Stück Jacke auf Lager."]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["a"], "de");
    assert_eq!(v["b"], "de");
}

#[test]
fn eval_json_report_and_golden_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lines: Vec<String> = GOOD.iter().map(|(s, t)| line(s, t)).collect();
    fs::write(d.join("test.jsonl"), lines.join("\n")).unwrap();
    let args = ["eval", "--testset", "test.jsonl", "--system", "mock", "--metrics", "chrf,number_accuracy", "--format", "json"];
    let out = ok(d, &args);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["entry_count"], 4);
    assert!((report["aggregate"]["chrf"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    fs::write(d.join("golden.json"), &out.stdout).unwrap();
    ok(d, &[&args[..], &["--golden", "golden.json"]].concat());

    fs::write(d.join("c.toml"), "[reward]\nlr = 0.2\n").unwrap();
    let stale = run(d, &[&args[..], &["--golden", "golden.json", "--config", "c.toml"]].concat());
    assert_eq!(stale.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&stale.stderr).contains("golden was produced under config"));
}

#[test]
fn config_fuzz_seeds_parse_or_fail_cleanly() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/cli_config");
    let mut parsed = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        parsed += usize::from(toml::from_str::<prefcorpus_cli::config::CliConfig>(&text).is_ok());
    }
    assert!(parsed >= 1);
}
