use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn memsim(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_memsim")).args(args).output().unwrap();
    if !out.status.success() {
        panic!("memsim {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn tree(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, fs::read_to_string(&p).unwrap());
            }
        }
    }
    files
}

const CONFIG: &str = r#"
seed = 21
trials = 2
tasks = ["digit_span", "n_back", "factual_qa", "narrative_free_recall"]
conditions = ["task_pr", "compactor", "task_sum"]
parallel = 4

[participant]
kind = "scripted"

[compactor]
capacity = 4
"#;

#[test]
fn two_runs_of_one_config_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        memsim(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        memsim(&["report", "--runs", out.to_str().unwrap(), "--resamples", "200"]);
    }
    let ta = tree(&a);
    assert!(ta.contains_key("scores.csv"));
    assert!(ta.contains_key("report.json"));
    assert_eq!(ta.keys().filter(|k| k.ends_with(".jsonl")).count(), 4 * 3 * 2);
    assert_eq!(ta, tree(&b));
}

#[test]
fn flags_override_the_config_and_runs_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("o");
    let args = [
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--participant",
        "oracle:capacity:5",
        "--tasks",
        "digit_span,word_recognition",
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    let first = String::from_utf8(memsim(&args).stdout).unwrap();
    assert!(first.starts_with("6 sessions (0 reused)"), "{first}");
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.lines().skip(1).filter(|l| l.starts_with("digit_span")).all(|l| l.contains(",5.0,") || l.contains(",5,")));
    let second = String::from_utf8(memsim(&args).stdout).unwrap();
    assert!(second.starts_with("6 sessions (6 reused)"), "{second}");
}

#[test]
fn replay_confirms_recorded_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    memsim(&["run", "--participant", "oracle:capacity:4", "--trials", "2", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8(memsim(&["replay", out.join("transcripts").to_str().unwrap()]).stdout).unwrap();
    assert!(stdout.contains("20 sessions replayed, all scores match"), "{stdout}");
}

#[test]
fn ablation_runs_the_memory_agent_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    memsim(&["ablate", "--tasks", "digit_span", "--out", out.to_str().unwrap()]);
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    for c in ["compactor", "task_sum", "hum_sum"] {
        assert!(scores.contains(&format!(",{c},")), "{scores}");
    }
}

#[test]
fn rerank_writes_tables_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let human = dir.path().join("human");
    memsim(&["rerank", "--participant", "oracle:capacity:6", "--trials", "3", "--out", human.to_str().unwrap()]);
    let table = human.join("table_oracle.json");
    assert!(table.exists());
    let model = dir.path().join("model");
    let stdout = String::from_utf8(
        memsim(&[
            "rerank",
            "--participant",
            "oracle:capacity:6",
            "--trials",
            "3",
            "--human-table",
            table.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
        ])
        .stdout,
    )
    .unwrap();
    assert!(stdout.contains("oracle: accuracy"), "{stdout}");
    assert!(stdout.contains("humanlikeness 1.000"), "{stdout}");
}

#[test]
fn unknown_participant_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_memsim"))
        .args(["run", "--participant", "genius", "--out", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown participant"));
}
