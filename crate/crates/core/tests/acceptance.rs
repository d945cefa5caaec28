//! Acceptance checks. Prints one PASS, FAIL or SKIP line per criterion and
//! exits non-zero when any check fails.
//!
//! Checks that need recorded human sessions read them from the directory
//! or file named by `MEMSIM_HUMAN_DATA` and are skipped without it.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde_json::{json, Value};

use memsim_core::compactor::{self, EncodeTrace, MemoryStore, Outcome};
use memsim_core::harness::{run_benchmark, ParticipantSpec, RunConfig};
use memsim_core::metrics::{
    bootstrap_ci, digit_alignment, error_pattern_stats, humanlikeness, pairwise_reranking_accuracy, wasserstein_1d,
    DigitAlignment, DocAccuracyTable, DocRow, MetricError, ScoreDistribution, Variant,
};
use memsim_core::participants::{
    replay_transcript, run_session, ChatMessage, ChatRequest, Condition, OracleParticipant, OracleProfile,
    ScriptedModel, ToolCall,
};
use memsim_core::report::{build_report, write_report, ReportOptions};
use memsim_core::response::ParsedResponse;
use memsim_core::rng::{derive_seed, substream, SimRng};
use memsim_core::stimulus::builtin_pack;
use memsim_core::tasks::scoring::score_event_log;
use memsim_core::tasks::{Event, Expected, SessionBuilder};
use memsim_core::transcript::{load_transcripts, Transcript};
use memsim_core::{TaskConfig, TaskId, TaskParams};

enum Verdict {
    Pass(String),
    Skip(String),
}

type Check = fn() -> Result<Verdict, String>;

fn pass(detail: impl Into<String>) -> Result<Verdict, String> {
    Ok(Verdict::Pass(detail.into()))
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("ceilings", ceilings),
        ("capacity oracle", capacity_oracle),
        ("metric exactness", metric_exactness),
        ("bootstrap", bootstrap),
        ("forgetting stats", forgetting_stats),
        ("forgetting stats on human data", forgetting_human),
        ("compactor invariants", compactor_invariants),
        ("reranking", reranking),
        ("determinism", determinism),
        ("human replay", human_replay),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(Verdict::Pass(d)) => println!("PASS {name}: {d} ({secs:.1} s)"),
            Ok(Verdict::Skip(d)) => println!("SKIP {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}

fn run_oracle(task: TaskId, seed: u64, profile: OracleProfile, params: &TaskParams) -> f64 {
    let mut config = TaskConfig::new(task, seed);
    config.params = params.clone();
    let mut builder = SessionBuilder::new(config);
    if let Some(p) = builtin_pack(task) {
        builder = builder.pack(p);
    }
    let mut session = builder.build().expect("session builds");
    let mut oracle = OracleParticipant::new(profile, seed);
    run_session(&mut session, &mut oracle).expect("oracle completes").value
}

fn ceilings() -> Result<Verdict, String> {
    let start = Instant::now();
    let expected = [
        (TaskId::DigitSpan, 20.0),
        (TaskId::ReverseDigitSpan, 20.0),
        (TaskId::NBack, 1.0),
        (TaskId::WordRecognition, 100.0),
        (TaskId::VariableMapping, 10.0),
        (TaskId::MapTask, 15.0),
        (TaskId::CraftTask, 15.0),
        (TaskId::FactualQa, 10.0),
        (TaskId::NarrativeQa, 10.0),
        (TaskId::NarrativeFreeRecall, 1.0),
    ];
    let params = TaskParams::default();
    for (task, want) in expected {
        for seed in 0..3 {
            let got = run_oracle(task, seed, OracleProfile::Perfect, &params);
            ensure!(got == want, "{task} seed {seed}: {got} != {want}");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    pass("perfect oracle at the ceiling on all ten tasks, three seeds each")
}

fn capacity_oracle() -> Result<Verdict, String> {
    let params = TaskParams::default();
    for task in [TaskId::DigitSpan, TaskId::ReverseDigitSpan] {
        for seed in 0..100 {
            let got = run_oracle(task, seed, OracleProfile::Capacity(7), &params);
            ensure!(got == 7.0, "{task} seed {seed}: capacity 7 gave {got}");
        }
    }
    let from_one = TaskParams { start_span: 1, ..TaskParams::default() };
    for c in 1..=25usize {
        for task in [TaskId::DigitSpan, TaskId::ReverseDigitSpan] {
            for seed in 0..5 {
                let got = run_oracle(task, seed, OracleProfile::Capacity(c), &from_one);
                ensure!(got == c.min(20) as f64, "{task} seed {seed}: capacity {c} gave {got}");
            }
        }
    }
    pass("capacity 7 spans 7 on 100 seeds; span = min(c, 20) for c in 1..=25")
}

/// Area between the empirical CDFs on the grid of all sample points, with
/// each CDF evaluated by counting.
fn cdf_grid_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut grid: Vec<f64> = x.iter().chain(y).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let cdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
    grid.windows(2)
        .map(|w| (cdf(x, w[0]) - cdf(y, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

fn metric_exactness() -> Result<Verdict, String> {
    let mut rng = substream(11, "acceptance/wasserstein");
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let draw = |rng: &mut SimRng| {
            let n = rng.gen_range(1..=50);
            let coarse = rng.gen_bool(0.5);
            (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(-5.0..5.0);
                    if coarse {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect::<Vec<f64>>()
        };
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let got = wasserstein_1d(&x, &y).map_err(|e| e.to_string())?;
        let want = cdf_grid_distance(&x, &y);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "pair {i}: {got} vs {want}");
    }
    for task in TaskId::ALL {
        let (lo, hi) = task.score_range();
        let samples: Vec<f64> = (0..40).map(|_| rng.gen_range(lo..=hi)).collect();
        let d = ScoreDistribution::for_task(task, samples, "x").map_err(|e| e.to_string())?;
        let self_h = humanlikeness(&d, &d).map_err(|e| e.to_string())?;
        ensure!(self_h == 1.0, "{task}: humanlikeness(X, X) = {self_h}");
        let low = ScoreDistribution::for_task(task, vec![lo; 7], "low").map_err(|e| e.to_string())?;
        let high = ScoreDistribution::for_task(task, vec![hi; 3], "high").map_err(|e| e.to_string())?;
        for (a, b) in [(&low, &high), (&high, &low)] {
            let h = humanlikeness(a, b).map_err(|e| e.to_string())?;
            ensure!(h == 0.0, "{task}: extreme point masses gave {h}");
        }
    }
    pass(format!("1000 pairs, max deviation {worst:.1e}; identity and extremes exact"))
}

fn bootstrap() -> Result<Verdict, String> {
    let start = Instant::now();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let mut rng = substream(5, "acceptance/bootstrap-constant");
    let (lo, hi) = bootstrap_ci(&[3.25; 30], mean, 0.95, 1000, &mut rng).map_err(|e| e.to_string())?;
    ensure!(lo == hi, "constant sample gave [{lo}, {hi}]");
    let covered: usize = (0..1000u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(rep, "acceptance/bootstrap-coverage");
            let sample: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
            let (lo, hi) = bootstrap_ci(&sample, mean, 0.95, 1000, &mut rng).expect("non-empty sample");
            usize::from(lo <= 0.5 && 0.5 <= hi)
        })
        .sum();
    let rate = covered as f64 / 1000.0;
    let secs = start.elapsed().as_secs_f64();
    ensure!((0.93..=0.97).contains(&rate), "coverage {rate:.3}");
    ensure!(secs < 60.0, "took {secs:.1} s");
    pass(format!("constant sample has zero width; coverage {:.1}% over 1000 repetitions", rate * 100.0))
}

fn marks(s: &str, length_match: bool) -> DigitAlignment {
    DigitAlignment { errors: s.chars().map(|c| c == 'W').collect(), length_match }
}

fn forgetting_stats() -> Result<Verdict, String> {
    let cases: [(Vec<DigitAlignment>, f64, f64); 6] = [
        (vec![marks("CWWC", true)], 0.5, 1.0),
        (vec![marks("WWW", true)], 1.0, 1.0),
        (vec![marks("CWCW", false)], 0.0, 0.0),
        (vec![marks("CWWC", true), marks("WC", false)], 1.0 / 3.0, 0.5),
        (vec![marks("CWWC", true), marks("WC", false), marks("CCCC", true)], 1.0 / 3.0, 0.5),
        (vec![marks("WWCW", true), marks("CCCW", false), marks("WWWW", true)], 4.0 / 5.0, 2.0 / 3.0),
    ];
    for (i, (alignments, cond, length)) in cases.iter().enumerate() {
        let s = error_pattern_stats(alignments).map_err(|e| e.to_string())?;
        ensure!(s.conditional_error_rate == *cond, "case {i}: conditional {} != {cond}", s.conditional_error_rate);
        ensure!(s.length_match_rate == *length, "case {i}: length match {} != {length}", s.length_match_rate);
    }
    ensure!(
        matches!(error_pattern_stats(&[marks("CCC", true)]), Err(MetricError::NoErrors)),
        "all-correct trials must be rejected"
    );
    ensure!(digit_alignment(&[1, 2, 3, 4], &[1, 2]) == marks("CCWW", false), "short answer alignment");
    ensure!(digit_alignment(&[1, 2, 3], &[1, 3, 3]) == marks("CWC", true), "substitution alignment");
    ensure!(digit_alignment(&[1, 2], &[1, 2, 5]) == marks("CCW", false), "extra digit alignment");
    pass("six hand-computed cases and three alignments match")
}

fn human_data() -> Option<PathBuf> {
    std::env::var_os("MEMSIM_HUMAN_DATA").map(PathBuf::from).filter(|p| !p.as_os_str().is_empty())
}

fn load_humans(path: &Path) -> Result<Vec<Transcript>, String> {
    let all = load_transcripts(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    ensure!(!all.is_empty(), "no transcripts under {}", path.display());
    Ok(all)
}

fn forgetting_human() -> Result<Verdict, String> {
    let Some(path) = human_data() else {
        return Ok(Verdict::Skip("MEMSIM_HUMAN_DATA not set".into()));
    };
    let humans = load_humans(&path)?;
    let alignments: Vec<DigitAlignment> = humans
        .iter()
        .filter(|t| t.task() == Some(TaskId::DigitSpan) && t.recorded_score().is_some())
        .flat_map(|t| {
            t.responses()
                .filter_map(|r| match (&r.expected, &r.response) {
                    (Expected::Digits(truth), ParsedResponse::Digits(pred)) => Some(digit_alignment(truth, pred)),
                    (Expected::Digits(truth), _) => Some(digit_alignment(truth, &[])),
                    _ => None,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let s = error_pattern_stats(&alignments).map_err(|e| e.to_string())?;
    let cond = format!("{:.1}", s.conditional_error_rate * 100.0);
    let length = format!("{:.1}", s.length_match_rate * 100.0);
    ensure!(cond == "71.2" && length == "55.0", "conditional {cond}%, length match {length}%");
    pass(format!("conditional {cond}%, length match {length}% over {} error trials", s.n_trials))
}

/// A chat model that makes random but reproducible memory tool calls.
fn random_tool_model(seed: u64) -> ScriptedModel {
    const KEYS: [&str; 7] = ["alpha", "beta", "gamma", "delta", "eps", "zeta", ""];
    const WORDS: [&str; 8] = ["river", "seven", "blue", "north", "clock", "paper", "stone", "ember"];
    ScriptedModel::from_fn(move |req: &ChatRequest| {
        let label = serde_json::to_string(req).expect("request serializes");
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, &label));
        let material: Vec<char> = req.messages[1]
            .content_str()
            .split_once("New material:\n")
            .map_or("", |(_, m)| m)
            .chars()
            .collect();
        if req.messages.len() > 2 && rng.gen_bool(0.25) {
            return Ok(ChatMessage::assistant("Done."));
        }
        let calls = (0..rng.gen_range(1..=4))
            .map(|i| {
                let key = KEYS[rng.gen_range(0..KEYS.len())];
                let (name, arguments) = if rng.gen_bool(0.7) {
                    let value: String = match rng.gen_range(0..10) {
                        0..=4 if !material.is_empty() => {
                            let a = rng.gen_range(0..material.len());
                            let b = (a + rng.gen_range(1..=80)).min(material.len());
                            material[a..b].iter().collect()
                        }
                        5 => material.iter().collect(),
                        _ => (0..rng.gen_range(1..=4)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" "),
                    };
                    ("write_memory", json!({ "key": key, "value": value }))
                } else {
                    ("delete_key", json!({ "key": key }))
                };
                ToolCall { id: format!("call-{i}"), name: name.into(), arguments }
            })
            .collect();
        Ok(ChatMessage::tool_calls(calls))
    })
}

fn random_material(rng: &mut SimRng, passages: &[String]) -> String {
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(12..=30);
        (0..n).map(|_| rng.gen_range(0..10).to_string()).collect::<Vec<_>>().join(" ")
    } else {
        let text: Vec<char> = passages[rng.gen_range(0..passages.len())].chars().collect();
        let a = rng.gen_range(0..text.len().saturating_sub(200).max(1));
        text[a..(a + 400).min(text.len())].iter().collect()
    }
}

struct TraceReport {
    steps: usize,
    rejected_full: usize,
}

fn check_trace(trace: &EncodeTrace, store: &MemoryStore) -> Result<TraceReport, String> {
    let mut replay = MemoryStore::new(4);
    let mut rejected_full = 0;
    for (i, step) in trace.steps.iter().enumerate() {
        let before = replay.clone();
        let outcome = replay.apply(&step.call);
        ensure!(outcome == step.outcome, "step {i}: recorded {:?}, replayed {outcome:?}", step.outcome);
        ensure!(replay.len() == step.size, "step {i}: recorded size {}, replayed {}", step.size, replay.len());
        ensure!(replay.len() <= 4, "step {i}: store holds {} entries", replay.len());
        if outcome == Outcome::RejectedFull {
            rejected_full += 1;
            ensure!(replay == before, "step {i}: rejected_full changed the store");
        }
    }
    ensure!(&replay == store, "replayed store differs from the live one");
    Ok(TraceReport { steps: trace.steps.len(), rejected_full })
}

fn compactor_invariants() -> Result<Verdict, String> {
    let mut passages = Vec::new();
    for task in [TaskId::FactualQa, TaskId::NarrativeQa, TaskId::NarrativeFreeRecall] {
        passages.extend(builtin_pack(task).expect("bundled pack").items.into_iter().map(|i| i.text));
    }
    let mut session = SessionBuilder::new(TaskConfig::new(TaskId::DigitSpan, 1)).build().map_err(|e| e.to_string())?;
    let question = loop {
        match session.next_event().map_err(|e| e.to_string())? {
            Event::Ask(q) => break q,
            Event::Show(_) => {}
            Event::Done(_) => return Err("digit span ended without a question".into()),
        }
    };
    let ask = session.pending().and_then(|s| s.ask.clone()).expect("question pending");
    let system = compactor::compactor_system_prompt(TaskId::DigitSpan);

    let reports: Result<Vec<TraceReport>, String> = (0..10_000u64)
        .into_par_iter()
        .map(|t| {
            let model = random_tool_model(t);
            let mut rng = substream(t, "acceptance/material");
            let mut store = MemoryStore::new(4);
            let mut trace = EncodeTrace::default();
            let mut shown = Vec::new();
            for _ in 0..rng.gen_range(1..=4) {
                let material = random_material(&mut rng, &passages);
                let mut exchanges = Vec::new();
                compactor::encode(&model, &system, &material, &mut store, &mut trace, 20, &mut exchanges)
                    .map_err(|e| format!("trace {t}: {e}"))?;
                shown.push(material);
            }
            let report = check_trace(&trace, &store).map_err(|e| format!("trace {t}: {e}"))?;
            let text = compactor::request_text(&compactor::recall_request(&system, &store, &question, &ask));
            let allowed: Vec<String> = store
                .entries()
                .iter()
                .flat_map(|(k, v)| [k.clone(), v.clone(), Value::from(v.as_str()).to_string()])
                .collect();
            if let Some(w) = compactor::exclusion_violation(&text, &shown, &allowed, 20) {
                return Err(format!("trace {t}: recall prompt leaks {w:?}"));
            }
            Ok(report)
        })
        .collect();
    let reports = reports?;
    let steps: usize = reports.iter().map(|r| r.steps).sum();
    let rejected: usize = reports.iter().map(|r| r.rejected_full).sum();
    ensure!(rejected > 0, "no trace ever filled the store");
    pass(format!("10000 traces, {steps} tool calls, {rejected} rejected_full"))
}

fn doc_table(means: impl Fn(usize) -> f64) -> DocAccuracyTable {
    let mut rows = Vec::new();
    for b in 1..=10u32 {
        for (k, variant) in Variant::ALL.into_iter().enumerate() {
            let i = (b as usize - 1) * 4 + k;
            rows.push(DocRow { biography_id: b, variant, mean: means(i), n: 10 });
        }
    }
    DocAccuracyTable::new(rows)
}

fn reranking() -> Result<Verdict, String> {
    let mut rng = substream(3, "acceptance/rerank");
    // a fixed shuffle of distinct means
    let order: Vec<usize> = (0..40).map(|i| (i * 17 + 5) % 40).collect();
    let human = doc_table(|i| order[i] as f64 / 40.0);
    let same = pairwise_reranking_accuracy(&human, &human, 10_000, &mut rng).map_err(|e| e.to_string())?;
    ensure!(same == 1.0, "identity gave {same}");
    let reversed = doc_table(|i| 1.0 - order[i] as f64 / 40.0);
    let rev = pairwise_reranking_accuracy(&human, &reversed, 10_000, &mut rng).map_err(|e| e.to_string())?;
    ensure!(rev == 0.0, "reversal gave {rev}");
    let mut agree = 0.0;
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
        agree += pairwise_reranking_accuracy(&doc_table(|i| a[i]), &doc_table(|i| b[i]), 1, &mut rng)
            .map_err(|e| e.to_string())?;
    }
    let random = agree / 10_000.0;
    ensure!((random - 0.5).abs() <= 0.02, "independent tables gave {random}");
    pass(format!("identity 1.0, reversal 0.0, independent {random:.3}"))
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).expect("inside dir").to_path_buf(), std::fs::read(&p).expect("readable"));
            }
        }
    }
    files
}

fn full_run(out: &Path) -> Result<(), String> {
    let models = RunConfig {
        seed: 2024,
        conditions: Condition::ALL.to_vec(),
        participant: ParticipantSpec::Scripted,
        parallel: 4,
        ..RunConfig::default()
    };
    let humans = RunConfig {
        seed: 2024,
        trials: 3,
        participant: ParticipantSpec::Oracle { profile: "capacity:5".into() },
        parallel: 4,
        ..RunConfig::default()
    };
    for (cfg, dir) in [(&models, out.join("models")), (&humans, out.join("humans"))] {
        let summary = run_benchmark(cfg, &dir).map_err(|e| e.to_string())?;
        ensure!(summary.failures.is_empty(), "failed sessions: {:?}", summary.failures);
    }
    let model_ts = load_transcripts(&out.join("models/transcripts")).map_err(|e| e.to_string())?;
    let human_ts = load_transcripts(&out.join("humans/transcripts")).map_err(|e| e.to_string())?;
    ensure!(model_ts.len() == 60, "expected 60 model sessions, found {}", model_ts.len());
    let options = ReportOptions { resamples: 300, ..ReportOptions::default() };
    let report = build_report(&model_ts, &human_ts, &options, Some(models.hash())).map_err(|e| e.to_string())?;
    write_report(&report, &out.join("report")).map_err(|e| e.to_string())
}

fn determinism() -> Result<Verdict, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    full_run(&a)?;
    full_run(&b)?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure!(ta.keys().eq(tb.keys()), "file sets differ");
    for (path, bytes) in &ta {
        ensure!(tb[path] == *bytes, "{} differs", path.display());
    }
    let transcripts = ta.keys().filter(|p| p.extension().is_some_and(|e| e == "jsonl")).count();
    pass(format!("{} files identical, {transcripts} transcripts, reports included", ta.len()))
}

/// Spearman correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn human_replay() -> Result<Verdict, String> {
    let Some(path) = human_data() else {
        return Ok(Verdict::Skip("MEMSIM_HUMAN_DATA not set".into()));
    };
    let humans = load_humans(&path)?;
    let expected = [
        (TaskId::DigitSpan, "6.88"),
        (TaskId::ReverseDigitSpan, "5.90"),
        (TaskId::NBack, "0.87"),
        (TaskId::WordRecognition, "34.49"),
        (TaskId::VariableMapping, "6.79"),
        (TaskId::MapTask, "10.98"),
        (TaskId::CraftTask, "12.57"),
        (TaskId::NarrativeQa, "7.96"),
        (TaskId::FactualQa, "7.08"),
    ];
    let finished: Vec<&Transcript> = humans.iter().filter(|t| t.recorded_score().is_some()).collect();
    let mut misses = Vec::new();
    for (task, want) in expected {
        let scores: Result<Vec<f64>, String> = finished
            .iter()
            .filter(|t| t.task() == Some(task))
            .map(|t| score_event_log(&t.events).map(|s| s.value).map_err(|e| format!("{task}: {e}")))
            .collect();
        let scores = scores?;
        ensure!(!scores.is_empty(), "no finished {task} sessions");
        let got = format!("{:.2}", scores.iter().sum::<f64>() / scores.len() as f64);
        if got != want {
            misses.push(format!("{task} {got} != {want}"));
        }
    }
    let pack = builtin_pack(TaskId::NarrativeFreeRecall).expect("bundled pack");
    let mut recorded = Vec::new();
    let mut rescored = Vec::new();
    for t in finished.iter().filter(|t| t.task() == Some(TaskId::NarrativeFreeRecall)) {
        let start = t.start().map_err(|e| e.to_string())?;
        let pack = (start.pack_checksum.as_deref() == Some(pack.checksum.as_str())).then(|| pack.clone());
        let session = replay_transcript(t, pack).map_err(|e| format!("free recall replay: {e}"))?;
        recorded.push(t.recorded_score().expect("finished").value);
        rescored.push(session.score().ok_or("free recall replay did not finish")?.value);
    }
    ensure!(recorded.len() >= 2, "too few free recall sessions to rank");
    let rho = spearman(&recorded, &rescored);
    if rho < 0.9 {
        misses.push(format!("free recall rank correlation {rho:.3} < 0.9"));
    }
    ensure!(misses.is_empty(), "{}", misses.join("; "));
    pass(format!("nine task means match; free recall rank correlation {rho:.3}"))
}
