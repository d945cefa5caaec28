use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use memsim_core::compactor::CompactorConfig;
use memsim_core::harness::{chat_model_for, make_participant, run_benchmark, ParticipantSpec, RunConfig};
use memsim_core::metrics::DocAccuracyTable;
use memsim_core::participants::{replay_transcript, Condition, Participant};
use memsim_core::report::{build_report, write_report, ReportOptions};
use memsim_core::rerank::{compare_rerankers, run_rerank, ParticipantFactory, VariantPack};
use memsim_core::rng::substream;
use memsim_core::stimulus::{builtin_pack, StimulusPack};
use memsim_core::transcript::load_transcripts;
use memsim_core::TaskId;

#[derive(Parser)]
#[command(name = "memsim", version, about = "Human memory simulation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run sessions for every task, condition and trial in a config.
    Run(RunArgs),
    /// Summarize transcripts and compare them with human data.
    Report(ReportArgs),
    /// Score the four rewrites of each biography and compare rankings.
    Rerank(RerankArgs),
    /// Re-score transcripts by replaying their recorded responses.
    Replay(ReplayArgs),
    /// Serve live sessions over HTTP.
    Serve(ServeArgs),
    /// Run the memory-agent ablation: key-value store against free-form summaries.
    Ablate(RunArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    /// TOML run config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated task names.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<TaskId>>,
    /// Comma-separated conditions.
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<Condition>>,
    /// `scripted` or `oracle:<perfect|always_wrong|capacity:N>`.
    #[arg(long)]
    participant: Option<String>,
    /// Upper bound on sessions in flight.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of a run.
    #[arg(long)]
    runs: PathBuf,
    /// Human transcripts (file or directory).
    #[arg(long)]
    humans: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RerankArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Variant pack; the bundled sample otherwise.
    #[arg(long)]
    pack: Option<PathBuf>,
    /// Human accuracy table as JSON (`{"rows": [...]}`).
    #[arg(long)]
    human_table: Option<PathBuf>,
    /// Document pairs sampled for the ranking comparison.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    #[arg(long, default_value = "runs/rerank")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Transcript file or directory.
    transcripts: PathBuf,
    /// Stimulus pack for pack-based tasks; bundled samples otherwise.
    #[arg(long)]
    pack: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Participant UI bundle, served under /ui.
    #[arg(long)]
    ui: Option<PathBuf>,
}

fn parse_participant(s: &str) -> Result<ParticipantSpec> {
    match s {
        "scripted" => Ok(ParticipantSpec::Scripted),
        _ => match s.strip_prefix("oracle:") {
            Some(profile) => Ok(ParticipantSpec::Oracle { profile: profile.to_string() }),
            None => bail!("unknown participant {s:?}; use a config file for remote models"),
        },
    }
}

fn load_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.trials {
        cfg.trials = v;
    }
    if let Some(v) = &o.tasks {
        cfg.tasks = v.clone();
    }
    if let Some(v) = &o.conditions {
        cfg.conditions = v.clone();
    }
    if let Some(v) = &o.participant {
        cfg.participant = parse_participant(v)?;
    }
    if let Some(v) = o.parallel {
        cfg.parallel = v;
    }
    Ok(cfg)
}

fn run(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let summary = run_benchmark(cfg, out)?;
    println!(
        "{} sessions ({} reused), {} failed, config {}",
        summary.rows.len(),
        summary.reused,
        summary.failures.len(),
        summary.config_hash
    );
    for f in &summary.failures {
        eprintln!("failed: {}: {}", f.session_id, f.error);
    }
    Ok(summary.failures.is_empty())
}

fn report(args: &ReportArgs) -> Result<()> {
    let transcripts = args.runs.join("transcripts");
    let models = load_transcripts(if transcripts.is_dir() { &transcripts } else { &args.runs })?;
    let humans = match &args.humans {
        Some(p) => load_transcripts(p)?,
        None => Vec::new(),
    };
    let hash = fs::read_to_string(args.runs.join("manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["config_hash"].as_str().map(str::to_string));
    let options = ReportOptions { resamples: args.resamples, seed: args.seed, ..Default::default() };
    let r = build_report(&models, &humans, &options, hash)?;
    let out = args.out.clone().unwrap_or_else(|| args.runs.clone());
    write_report(&r, &out)?;
    println!("task,model,condition,n,mean,humanlikeness,ci");
    for row in &r.rows {
        let hl = row.humanlikeness.map_or("-".into(), |h| format!("{h:.3}"));
        let ci = match (row.ci_low, row.ci_high) {
            (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
            _ => "-".into(),
        };
        println!("{},{},{},{},{:.3},{hl},{ci}", row.task, row.model, row.condition, row.n, row.mean);
    }
    if !r.skipped.is_empty() {
        eprintln!("{} sessions skipped", r.skipped.len());
    }
    Ok(())
}

fn rerank(args: &RerankArgs) -> Result<bool> {
    let cfg = load_config(&args.overrides)?;
    let pack = match &args.pack {
        Some(p) => VariantPack::load(p)?,
        None => VariantPack::builtin(),
    };
    let model = chat_model_for(&cfg.participant)?;
    let conditions: Vec<Option<Condition>> = match cfg.participant {
        ParticipantSpec::Oracle { .. } => vec![None],
        _ => cfg.conditions.iter().copied().map(Some).collect(),
    };
    fs::create_dir_all(&args.out)?;
    let mut tables = Vec::new();
    let mut complete = true;
    for condition in conditions {
        let name = condition.map_or("oracle".to_string(), |c| c.to_string());
        let spec = cfg.participant.clone();
        let model = model.clone();
        let compactor: CompactorConfig = cfg.compactor.clone();
        let factory: Box<ParticipantFactory> = Box::new(move |seed| -> Result<Box<dyn Participant>, _> {
            make_participant(&spec, model.as_ref(), condition, TaskId::FactualQa, seed, &compactor, None)
        });
        let run = run_rerank(&pack, factory.as_ref(), cfg.trials, cfg.seed, cfg.parallel)?;
        for f in &run.failures {
            eprintln!("failed: {f}");
        }
        if run.partial() {
            eprintln!("{name}: table is partial");
            complete = false;
        }
        fs::write(args.out.join(format!("table_{name}.json")), serde_json::to_string_pretty(&run.table)?)?;
        let mut w = csv::Writer::from_path(args.out.join(format!("table_{name}.csv")))?;
        for row in &run.table.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        tables.push((name, run.table));
    }
    if let Some(path) = &args.human_table {
        let human: DocAccuracyTable = serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let cmp = compare_rerankers(&human, &tables, args.pairs, &mut substream(cfg.seed, "rerank-pairs"))?;
        fs::write(args.out.join("comparison.json"), serde_json::to_string_pretty(&cmp)?)?;
        for c in &cmp {
            println!("{}: accuracy {:.3}, humanlikeness {:.3}", c.condition, c.accuracy, c.humanlikeness);
        }
    } else {
        for (name, t) in &tables {
            let means: Vec<String> = memsim_core::metrics::Variant::ALL
                .iter()
                .map(|v| format!("{} {:.3}", v.as_str(), t.mean_of(*v)))
                .collect();
            println!("{name}: {}", means.join(", "));
        }
    }
    Ok(complete)
}

fn replay(args: &ReplayArgs) -> Result<bool> {
    let explicit = match &args.pack {
        Some(p) => Some(StimulusPack::load(p)?),
        None => None,
    };
    let mut ok = true;
    let mut n = 0;
    for t in load_transcripts(&args.transcripts)? {
        let Some(task) = t.task() else { continue };
        let Some(recorded) = t.recorded_score() else { continue };
        n += 1;
        let pack = explicit.clone().filter(|p| p.task == task).or_else(|| builtin_pack(task));
        let id = t.session_id().unwrap_or("?").to_string();
        match replay_transcript(&t, pack) {
            Ok(s) if s.score() == Some(recorded) => {}
            Ok(s) => {
                ok = false;
                eprintln!("{id} {task}: recorded {} replayed {:?}", recorded.value, s.score().map(|s| s.value));
            }
            Err(e) => {
                ok = false;
                eprintln!("{id} {task}: {e}");
            }
        }
    }
    println!("{n} sessions replayed, {}", if ok { "all scores match" } else { "mismatches found" });
    Ok(ok)
}

fn serve(args: &ServeArgs) -> Result<()> {
    let mut cfg = memsim_service::ServiceConfig::new(&args.data);
    cfg.ui_dir = args.ui.clone();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(memsim_service::serve(cfg, &args.addr))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => load_config(&a.overrides).and_then(|c| run(&c, &a.out)),
        Command::Ablate(a) => load_config(&a.overrides).and_then(|mut c| {
            c.conditions = vec![Condition::Compactor, Condition::TaskSum, Condition::HumSum];
            if c.participant.is_oracle() {
                log::warn!("the ablation needs a chat model; using the scripted one");
                c.participant = ParticipantSpec::Scripted;
            }
            run(&c, &a.out)
        }),
        Command::Report(a) => report(a).map(|_| true),
        Command::Rerank(a) => rerank(a),
        Command::Replay(a) => replay(a),
        Command::Serve(a) => serve(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
