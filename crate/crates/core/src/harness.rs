//! Batch runs: every (task, condition, trial) session for one participant
//! spec, written as JSONL transcripts plus a score table. Runs resume by
//! skipping sessions whose transcript already holds a score.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::compactor::{CompactorConfig, CompactorParticipant, SummarizerParticipant, SummaryMode};
use crate::config::{TaskConfig, TaskParams};
use crate::metrics::text::{Embedder, HttpEmbedder, TfEmbedder};
use crate::participants::chat::default_api_key_env;
use crate::participants::prompts::sample_demonstrations;
use crate::participants::{
    run_session, ChatModel, Condition, EndpointConfig, FewShot, FewShotDomain, HttpChatModel, LlmParticipant,
    OracleParticipant, OracleProfile, Participant, ParticipantError, ScriptedModel,
};
use crate::rng::{derive_seed, substream};
use crate::stimulus::{builtin_pack, StimulusPack};
use crate::task::TaskId;
use crate::tasks::SessionBuilder;
use crate::transcript::{load_transcripts, read_events, write_events, Transcript};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParticipantSpec {
    /// `perfect`, `always_wrong` or `capacity:N`.
    Oracle { profile: String },
    /// The offline heuristic chat model.
    Scripted,
    Llm { endpoint: EndpointConfig },
}

impl Default for ParticipantSpec {
    fn default() -> Self {
        ParticipantSpec::Oracle { profile: "perfect".into() }
    }
}

impl ParticipantSpec {
    /// Short name used in session ids, paths and reports.
    pub fn label(&self) -> String {
        let raw = match self {
            ParticipantSpec::Oracle { profile } => format!("oracle-{profile}"),
            ParticipantSpec::Scripted => "scripted".into(),
            ParticipantSpec::Llm { endpoint } => endpoint.model.clone(),
        };
        sanitize(&raw)
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, ParticipantSpec::Oracle { .. })
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '-' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub domain: FewShotDomain,
    pub k: usize,
    /// File or directory of human transcripts.
    pub human_transcripts: PathBuf,
    /// Task the demonstrations come from in the out-of-domain setting.
    /// Defaults to the next task in battery order.
    #[serde(default)]
    pub source_task: Option<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub tasks: Vec<TaskId>,
    /// Prompting conditions. Ignored by oracle participants.
    pub conditions: Vec<Condition>,
    pub participant: ParticipantSpec,
    /// Stimulus packs by task; bundled samples are used otherwise.
    pub packs: BTreeMap<TaskId, PathBuf>,
    pub params: TaskParams,
    pub compactor: CompactorConfig,
    pub few_shot: Option<FewShotConfig>,
    pub embedder: Option<EmbedderConfig>,
    /// Sessions in flight at once.
    pub parallel: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            trials: 1,
            tasks: TaskId::ALL.to_vec(),
            conditions: vec![Condition::TaskPr],
            participant: ParticipantSpec::default(),
            packs: BTreeMap::new(),
            params: TaskParams::default(),
            compactor: CompactorConfig::default(),
            few_shot: None,
            embedder: None,
            parallel: 1,
        }
    }
}

impl RunConfig {
    /// Short digest of the canonical JSON form, leaving out settings that
    /// cannot change results.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { parallel: 0, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.tasks.is_empty() {
            return Err(HarnessError::Config("no tasks selected".into()));
        }
        if !self.participant.is_oracle() && self.conditions.is_empty() {
            return Err(HarnessError::Config("no conditions selected".into()));
        }
        if let ParticipantSpec::Oracle { profile } = &self.participant {
            profile.parse::<OracleProfile>().map_err(HarnessError::Config)?;
        }
        for &task in &self.tasks {
            TaskConfig { task, seed: 0, params: self.params.clone(), stimulus_pack: None }
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Conditions to run, as path labels. Oracles have a single one.
    fn condition_labels(&self) -> Vec<(String, Option<Condition>)> {
        if self.participant.is_oracle() {
            vec![("oracle".into(), None)]
        } else {
            self.conditions.iter().map(|c| (c.as_str().to_string(), Some(*c))).collect()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("loading stimulus pack: {0}")]
    Pack(String),
    #[error(transparent)]
    Chat(#[from] crate::participants::ChatError),
    #[error("writing scores: {0}")]
    Csv(#[from] csv::Error),
}

/// One line of `scores.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task: TaskId,
    pub condition: String,
    pub model: String,
    pub trial: usize,
    pub seed: u64,
    pub session_id: String,
    pub score: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub session_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub model: String,
    pub rows: Vec<ScoreRow>,
    /// Sessions taken from an earlier, interrupted run.
    pub reused: usize,
    pub failures: Vec<Failure>,
}

struct Job {
    task: TaskId,
    condition: String,
    mode: Option<Condition>,
    trial: usize,
}

/// Seed of one session. Shared by all conditions so that they see the
/// same stimuli.
pub fn session_seed(root: u64, task: TaskId, trial: usize) -> u64 {
    derive_seed(root, &format!("session/{task}/{trial}"))
}

pub fn transcript_path(out: &Path, model: &str, condition: &str, task: TaskId, trial: usize) -> PathBuf {
    out.join("transcripts")
        .join(model)
        .join(condition)
        .join(task.as_str())
        .join(format!("{trial:03}.jsonl"))
}

struct Shared {
    config: RunConfig,
    hash: String,
    label: String,
    model: Option<Arc<dyn ChatModel>>,
    embedder: Arc<dyn Embedder>,
    packs: BTreeMap<TaskId, StimulusPack>,
    humans: Vec<Transcript>,
}

/// Runs every session of `config` into `out`.
pub fn run_benchmark(config: &RunConfig, out: &Path) -> Result<RunSummary, HarnessError> {
    run_with_model(config, out, None)
}

/// As [`run_benchmark`], with an explicit chat model in place of the one
/// the participant spec names.
pub fn run_with_model(
    config: &RunConfig,
    out: &Path,
    model: Option<Arc<dyn ChatModel>>,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let model = match model {
        Some(m) => Some(m),
        None => chat_model_for(&config.participant)?,
    };
    let embedder: Arc<dyn Embedder> = match &config.embedder {
        Some(e) => Arc::new(HttpEmbedder::new(&e.url, &e.model, std::env::var(&e.api_key_env).ok())),
        None => Arc::new(TfEmbedder),
    };
    let mut packs = BTreeMap::new();
    for &task in config.tasks.iter().filter(|t| t.needs_stimulus_pack()) {
        let pack = match config.packs.get(&task) {
            Some(path) => StimulusPack::load(path).map_err(|e| HarnessError::Pack(format!("{}: {e}", path.display())))?,
            None => builtin_pack(task).ok_or_else(|| HarnessError::Pack(format!("no pack for {task}")))?,
        };
        packs.insert(task, pack);
    }
    let humans = match &config.few_shot {
        Some(fs) if !config.participant.is_oracle() => load_transcripts(&fs.human_transcripts)?
            .into_iter()
            .filter(|t| t.recorded_score().is_some())
            .collect(),
        _ => Vec::new(),
    };
    let shared = Shared {
        config: config.clone(),
        hash: config.hash(),
        label: config.participant.label(),
        model,
        embedder,
        packs,
        humans,
    };

    let mut jobs = Vec::new();
    for &task in &config.tasks {
        for (condition, mode) in config.condition_labels() {
            for trial in 0..config.trials {
                jobs.push(Job { task, condition: condition.clone(), mode, trial });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<Result<(ScoreRow, bool), Failure>> =
        pool.install(|| jobs.par_iter().map(|job| run_job(&shared, job, out)).collect());

    let mut summary = RunSummary {
        config_hash: shared.hash.clone(),
        model: shared.label.clone(),
        rows: Vec::new(),
        reused: 0,
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok((row, reused)) => {
                summary.reused += reused as usize;
                summary.rows.push(row);
            }
            Err(f) => summary.failures.push(f),
        }
    }
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("scores.csv"))?;
    for row in &summary.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let manifest = json!({
        "config_hash": summary.config_hash,
        "config": config,
        "model": summary.model,
        "sessions": summary.rows.len(),
        "failures": summary.failures,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(summary)
}

fn run_job(shared: &Shared, job: &Job, out: &Path) -> Result<(ScoreRow, bool), Failure> {
    let seed = session_seed(shared.config.seed, job.task, job.trial);
    let session_id = format!("{}-{}-{}-{:03}", shared.label, job.condition, job.task, job.trial);
    let path = transcript_path(out, &shared.label, &job.condition, job.task, job.trial);
    let fail = |error: String| Failure { session_id: session_id.clone(), error };
    let row = |value: f64, normalized: f64| ScoreRow {
        task: job.task,
        condition: job.condition.clone(),
        model: shared.label.clone(),
        trial: job.trial,
        seed,
        session_id: session_id.clone(),
        score: value,
        normalized,
    };
    if let Some(score) = finished_score(&path, &shared.hash) {
        return Ok((row(score.value, score.normalized()), true));
    }

    let mut participant = build_participant(shared, job, seed).map_err(|e| fail(e.to_string()))?;
    let mut config = TaskConfig::new(job.task, seed);
    config.params = shared.config.params.clone();
    config.stimulus_pack = shared.config.packs.get(&job.task).cloned();
    let info = json!({
        "model": shared.label,
        "condition": job.condition,
        "config_hash": shared.hash,
        "run_seed": shared.config.seed,
        "detail": participant.describe(),
    });
    let mut builder = SessionBuilder::new(config)
        .session_id(session_id.clone())
        .participant(shared.label.clone(), info)
        .embedder(shared.embedder.clone());
    if let Some(pack) = shared.packs.get(&job.task) {
        builder = builder.pack(pack.clone());
    }
    let mut session = builder.build().map_err(|e| fail(e.to_string()))?;
    let result = run_session(&mut session, participant.as_mut());
    match result {
        Ok(score) => {
            let tmp = path.with_extension("jsonl.tmp");
            write_events(&tmp, session.events()).map_err(|e| fail(e.to_string()))?;
            fs::rename(&tmp, &path).map_err(|e| fail(e.to_string()))?;
            Ok((row(score.value, score.normalized()), false))
        }
        Err(e) => {
            // keep what happened for inspection, outside the transcript set
            let _ = write_events(&path.with_extension("partial"), session.events());
            log::warn!("session {session_id} failed: {e}");
            Err(fail(e.to_string()))
        }
    }
}

/// Score of a complete transcript written by a run with the same config.
fn finished_score(path: &Path, hash: &str) -> Option<crate::task::TaskScore> {
    let events = read_events(path).ok()?;
    let t = Transcript::new(events);
    t.validate().ok()?;
    let start = t.start().ok()?;
    if start.participant.get("config_hash").and_then(Value::as_str) != Some(hash) {
        return None;
    }
    t.recorded_score()
}

/// The chat model a participant spec talks to; oracles have none.
pub fn chat_model_for(spec: &ParticipantSpec) -> Result<Option<Arc<dyn ChatModel>>, HarnessError> {
    Ok(match spec {
        ParticipantSpec::Oracle { .. } => None,
        ParticipantSpec::Scripted => Some(Arc::new(ScriptedModel::heuristic())),
        ParticipantSpec::Llm { endpoint } => Some(Arc::new(HttpChatModel::new(endpoint.clone())?)),
    })
}

/// A fresh participant for one session. `condition` is ignored by oracles
/// and required otherwise.
pub fn make_participant(
    spec: &ParticipantSpec,
    model: Option<&Arc<dyn ChatModel>>,
    condition: Option<Condition>,
    task: TaskId,
    seed: u64,
    compactor: &CompactorConfig,
    few_shot: Option<FewShot>,
) -> Result<Box<dyn Participant>, ParticipantError> {
    let (model, condition) = match (spec, model, condition) {
        (ParticipantSpec::Oracle { profile }, _, _) => {
            let profile: OracleProfile = profile.parse().map_err(ParticipantError::Other)?;
            return Ok(Box::new(OracleParticipant::new(profile, seed)));
        }
        (_, Some(model), Some(c)) => (model.clone(), c),
        (_, None, _) => return Err(ParticipantError::Other("no chat model configured".into())),
        (_, _, None) => return Err(ParticipantError::Other("model participants need a condition".into())),
    };
    Ok(match condition {
        Condition::TaskPr | Condition::HumPr | Condition::MemPr => {
            Box::new(LlmParticipant::new(model, task, condition, few_shot.as_ref())?)
        }
        Condition::Compactor => Box::new(CompactorParticipant::new(model, task, compactor.clone())),
        Condition::TaskSum => Box::new(SummarizerParticipant::new(model, task, SummaryMode::TaskSum)),
        Condition::HumSum => Box::new(SummarizerParticipant::new(model, task, SummaryMode::HumSum)),
    })
}

fn build_participant(shared: &Shared, job: &Job, seed: u64) -> Result<Box<dyn Participant>, ParticipantError> {
    let pseed = derive_seed(seed, &format!("participant/{}", job.condition));
    let few_shot = match job.mode {
        Some(Condition::TaskPr | Condition::HumPr | Condition::MemPr) => few_shot_for(shared, job.task, pseed)?,
        _ => None,
    };
    make_participant(
        &shared.config.participant,
        shared.model.as_ref(),
        job.mode,
        job.task,
        pseed,
        &shared.config.compactor,
        few_shot,
    )
}

fn few_shot_for(shared: &Shared, task: TaskId, seed: u64) -> Result<Option<FewShot>, ParticipantError> {
    let Some(fs) = &shared.config.few_shot else { return Ok(None) };
    let source = match fs.domain {
        FewShotDomain::In => task,
        FewShotDomain::Out => fs.source_task.filter(|t| *t != task).unwrap_or_else(|| {
            let i = TaskId::ALL.iter().position(|t| *t == task).unwrap_or(0);
            TaskId::ALL[(i + 1) % TaskId::ALL.len()]
        }),
    };
    let pool: Vec<Transcript> = shared.humans.iter().filter(|t| t.task() == Some(source)).cloned().collect();
    let transcripts = sample_demonstrations(&pool, fs.k, &mut substream(seed, "few-shot"))?;
    Ok(Some(FewShot { domain: fs.domain, k: fs.k, transcripts }))
}
