//! Aggregates transcripts into per-(task, model, condition) score summaries
//! with humanlikeness against the human population. Scores are recomputed
//! from the event logs, so a report depends on nothing but transcripts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::metrics::{
    bootstrap_ci_paired, digit_alignment, error_pattern_stats, humanlikeness, MetricError, ScoreDistribution,
};
use crate::response::ParsedResponse;
use crate::rng::substream;
use crate::task::TaskId;
use crate::tasks::scoring::score_event_log;
use crate::tasks::Expected;
use crate::transcript::Transcript;

pub const HUMAN: &str = "human";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { resamples: 1000, level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: TaskId,
    pub model: String,
    pub condition: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub n_human: usize,
    pub humanlikeness: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Over incorrect span trials only.
    pub error_trials: usize,
    pub length_match_rate: Option<f64>,
    pub conditional_error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: Option<String>,
    pub options: ReportOptions,
    pub rows: Vec<ReportRow>,
    /// Sessions left out because they never finished or fail to rescore.
    pub skipped: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Default)]
struct Group {
    scores: Vec<f64>,
    alignments: Vec<crate::metrics::DigitAlignment>,
}

fn group_key(t: &Transcript, human: bool) -> (String, String) {
    if human {
        return (HUMAN.into(), HUMAN.into());
    }
    let info = t.start().map(|s| s.participant).unwrap_or(Value::Null);
    let get = |k: &str| info.get(k).and_then(Value::as_str).map(str::to_string);
    (
        get("model").unwrap_or_else(|| t.participant_id().unwrap_or("unknown").to_string()),
        get("condition").unwrap_or_else(|| "unknown".into()),
    )
}

fn span_alignments(t: &Transcript) -> Vec<crate::metrics::DigitAlignment> {
    t.responses()
        .filter_map(|r| match (&r.expected, &r.response) {
            (Expected::Digits(truth), ParsedResponse::Digits(pred)) => Some(digit_alignment(truth, pred)),
            (Expected::Digits(truth), _) => Some(digit_alignment(truth, &[])),
            _ => None,
        })
        .collect()
}

fn collect(
    transcripts: &[Transcript],
    human: bool,
    groups: &mut BTreeMap<(TaskId, String, String), Group>,
    skipped: &mut Vec<String>,
) {
    for t in transcripts {
        let id = t.session_id().unwrap_or("?").to_string();
        let Some(task) = t.task() else { continue };
        if t.recorded_score().is_none() {
            skipped.push(format!("{id}: unfinished"));
            continue;
        }
        let score = match score_event_log(&t.events) {
            Ok(s) => s,
            Err(e) => {
                skipped.push(format!("{id}: {e}"));
                continue;
            }
        };
        let (model, condition) = group_key(t, human);
        let g = groups.entry((task, model, condition)).or_default();
        g.scores.push(score.value);
        if matches!(task, TaskId::DigitSpan | TaskId::ReverseDigitSpan) {
            g.alignments.extend(span_alignments(t));
        }
    }
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn build_report(
    models: &[Transcript],
    humans: &[Transcript],
    options: &ReportOptions,
    config_hash: Option<String>,
) -> Result<Report, ReportError> {
    let mut groups = BTreeMap::new();
    let mut skipped = Vec::new();
    collect(humans, true, &mut groups, &mut skipped);
    collect(models, false, &mut groups, &mut skipped);
    let human_scores: BTreeMap<TaskId, Vec<f64>> = groups
        .iter()
        .filter(|((_, m, _), _)| m == HUMAN)
        .map(|((t, _, _), g)| (*t, g.scores.clone()))
        .collect();

    let mut rows = Vec::new();
    for ((task, model, condition), g) in &groups {
        let range = task.score_range();
        let h = human_scores.get(task).filter(|_| model != HUMAN);
        let (hl, ci) = match h {
            Some(h) => {
                let hd = ScoreDistribution::new(h.clone(), range, HUMAN)?;
                let md = ScoreDistribution::new(g.scores.clone(), range, model.as_str())?;
                let point = humanlikeness(&hd, &md)?;
                let mut rng = substream(options.seed, &format!("bootstrap/{task}/{model}/{condition}"));
                let stat = |x: &[f64], y: &[f64]| {
                    let a = ScoreDistribution { samples: x.to_vec(), range, label: String::new() };
                    let b = ScoreDistribution { samples: y.to_vec(), range, label: String::new() };
                    humanlikeness(&a, &b).unwrap_or(f64::NAN)
                };
                let (lo, hi) = bootstrap_ci_paired(h, &g.scores, stat, options.level, options.resamples, &mut rng)?;
                // percentile intervals can miss the point estimate on skewed samples
                (Some(point), Some((lo.min(point), hi.max(point))))
            }
            None => (None, None),
        };
        let patterns = error_pattern_stats(&g.alignments).ok();
        rows.push(ReportRow {
            task: *task,
            model: model.clone(),
            condition: condition.clone(),
            n: g.scores.len(),
            mean: g.scores.iter().sum::<f64>() / g.scores.len() as f64,
            sd: sd(&g.scores),
            n_human: h.map_or(0, Vec::len),
            humanlikeness: hl,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            error_trials: patterns.map_or(0, |p| p.n_trials),
            length_match_rate: patterns.map(|p| p.length_match_rate),
            conditional_error_rate: patterns.map(|p| p.conditional_error_rate),
        });
    }
    Ok(Report { config_hash, options: options.clone(), rows, skipped })
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report).expect("report serializes"))?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
