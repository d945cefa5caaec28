//! Task scorers and rescoring from event logs.

use crate::response::{ParsedResponse, SameDiff};
use crate::task::{TaskId, TaskScore};
use crate::transcript::{ResponseRecord, Transcript, TranscriptEvent};

use super::generators::NbackLabel;
use super::{Expected, TaskError, TrialMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanOutcome {
    pub score: TaskScore,
    /// Length at which the two-errors rule fired, if it did.
    pub stopped_at: Option<usize>,
}

/// Best span from `(length, correct)` entries in presentation order.
///
/// Lengths must increase by one with at most two sequences each; only the
/// final length may be incomplete. The score is the largest length with
/// both sequences correct.
pub fn score_best_span(task: TaskId, log: &[(usize, bool)]) -> Result<SpanOutcome, TaskError> {
    let malformed = |m: String| Err(TaskError::MalformedLog(m));
    let mut groups: Vec<(usize, Vec<bool>)> = Vec::new();
    for &(length, correct) in log {
        match groups.last_mut() {
            Some((l, v)) if *l == length => {
                if v.len() == 2 {
                    return malformed(format!("more than two sequences at length {length}"));
                }
                v.push(correct);
            }
            Some((l, v)) => {
                if length != *l + 1 {
                    return malformed(format!("length {length} follows length {l}"));
                }
                if v.len() < 2 {
                    return malformed(format!("length {l} has one sequence"));
                }
                groups.push((length, vec![correct]));
            }
            None => groups.push((length, vec![correct])),
        }
    }
    let mut best = 0;
    let mut stopped_at = None;
    for (length, results) in &groups {
        if stopped_at.is_some() {
            return malformed(format!("length {length} presented after the stop rule fired"));
        }
        if results.len() == 2 && results.iter().all(|c| *c) {
            best = *length;
        }
        if results.len() == 2 && results.iter().all(|c| !*c) {
            stopped_at = Some(*length);
        }
    }
    Ok(SpanOutcome {
        score: TaskScore::new(task, best as f64),
        stopped_at,
    })
}

/// Pooled accuracy over eligible positions of the scored blocks.
/// `responses[b]` is aligned with the eligible labels of `labels[b]`;
/// a missing response counts as incorrect.
pub fn score_nback(
    responses: &[Vec<Option<SameDiff>>],
    labels: &[Vec<NbackLabel>],
) -> Result<TaskScore, TaskError> {
    if responses.len() != labels.len() {
        return Err(TaskError::LengthMismatch {
            left: responses.len(),
            right: labels.len(),
        });
    }
    let mut correct = 0usize;
    let mut eligible = 0usize;
    for (resp, lab) in responses.iter().zip(labels) {
        let truth: Vec<SameDiff> = lab
            .iter()
            .filter_map(|l| match l {
                NbackLabel::Ineligible => None,
                NbackLabel::Same => Some(SameDiff::Same),
                NbackLabel::Different => Some(SameDiff::Different),
            })
            .collect();
        if resp.len() != truth.len() {
            return Err(TaskError::LengthMismatch {
                left: resp.len(),
                right: truth.len(),
            });
        }
        eligible += truth.len();
        correct += resp.iter().zip(&truth).filter(|(r, t)| **r == Some(**t)).count();
    }
    let value = if eligible == 0 { 0.0 } else { correct as f64 / eligible as f64 };
    Ok(TaskScore::new(TaskId::NBack, value))
}

/// Count of correct judgements; the log must end at or before the third error.
pub fn score_word_recognition(log: &[bool]) -> Result<TaskScore, TaskError> {
    let mut errors = 0;
    for (i, correct) in log.iter().enumerate() {
        if errors == 3 {
            return Err(TaskError::MalformedLog(format!(
                "response {i} follows the third error"
            )));
        }
        if !correct {
            errors += 1;
        }
    }
    let value = log.iter().filter(|c| **c).count();
    Ok(TaskScore::new(TaskId::WordRecognition, value as f64))
}

/// Best attempt, where an attempt scores the largest active-binding count at
/// any correct answer. Each attempt is `(active, correct)` per query.
pub fn score_variable_mapping(attempts: &[Vec<(usize, bool)>]) -> Result<TaskScore, TaskError> {
    if attempts.len() > 3 {
        return Err(TaskError::MoreThanThreeAttempts(attempts.len()));
    }
    let mut best = 0;
    for (a, attempt) in attempts.iter().enumerate() {
        if let Some(pos) = attempt.iter().position(|(_, c)| !c) {
            if pos + 1 != attempt.len() {
                return Err(TaskError::MalformedLog(format!(
                    "attempt {a} continues past a wrong answer"
                )));
            }
        }
        let score = attempt
            .iter()
            .filter(|(_, c)| *c)
            .map(|(active, _)| *active)
            .max()
            .unwrap_or(0);
        best = best.max(score);
    }
    Ok(TaskScore::new(TaskId::VariableMapping, best as f64))
}

/// Number of answers equal to the key; `None` answers never match.
pub fn score_mcq(task: TaskId, answers: &[Option<usize>], key: &[usize]) -> Result<TaskScore, TaskError> {
    if answers.len() != key.len() {
        return Err(TaskError::LengthMismatch {
            left: answers.len(),
            right: key.len(),
        });
    }
    let hits = answers.iter().zip(key).filter(|(a, k)| **a == Some(**k)).count();
    Ok(TaskScore::new(task, hits as f64))
}

/// Rescores a task from its response records.
pub fn score_records(task: TaskId, records: &[ResponseRecord]) -> Result<TaskScore, TaskError> {
    let mismatch = |r: &ResponseRecord| {
        TaskError::MalformedLog(format!("{:?} record in a {task} log", r.meta))
    };
    let correct = |r: &ResponseRecord| r.expected.judge(&r.response).unwrap_or(false);
    match task {
        TaskId::DigitSpan | TaskId::ReverseDigitSpan => {
            let mut log = Vec::new();
            for r in records {
                let TrialMeta::Span { length, .. } = r.meta else { return Err(mismatch(r)) };
                log.push((length, correct(r)));
            }
            Ok(score_best_span(task, &log)?.score)
        }
        TaskId::NBack => {
            let mut blocks: Vec<(usize, usize, Vec<Option<SameDiff>>, Vec<NbackLabel>)> = Vec::new();
            for r in records {
                let TrialMeta::NBack { block, n, practice, .. } = r.meta else {
                    return Err(mismatch(r));
                };
                if practice {
                    continue;
                }
                let Expected::SameDiff(truth) = r.expected else { return Err(mismatch(r)) };
                if blocks.last().is_none_or(|b| b.0 != block) {
                    blocks.push((block, n, Vec::new(), vec![NbackLabel::Ineligible; n]));
                }
                let b = blocks.last_mut().unwrap();
                b.2.push(match &r.response {
                    ParsedResponse::SameDiff(s) => Some(*s),
                    _ => None,
                });
                b.3.push(match truth {
                    SameDiff::Same => NbackLabel::Same,
                    SameDiff::Different => NbackLabel::Different,
                });
            }
            let (responses, labels): (Vec<_>, Vec<_>) =
                blocks.into_iter().map(|(_, _, r, l)| (r, l)).unzip();
            score_nback(&responses, &labels)
        }
        TaskId::WordRecognition => {
            let mut log = Vec::new();
            for r in records {
                let TrialMeta::Word { .. } = r.meta else { return Err(mismatch(r)) };
                log.push(correct(r));
            }
            score_word_recognition(&log)
        }
        TaskId::VariableMapping => {
            let mut attempts: Vec<(usize, Vec<(usize, bool)>)> = Vec::new();
            for r in records {
                let TrialMeta::Variable { attempt, active, .. } = r.meta else {
                    return Err(mismatch(r));
                };
                if attempts.last().is_none_or(|a| a.0 != attempt) {
                    attempts.push((attempt, Vec::new()));
                }
                attempts.last_mut().unwrap().1.push((active, correct(r)));
            }
            let attempts: Vec<_> = attempts.into_iter().map(|(_, a)| a).collect();
            score_variable_mapping(&attempts)
        }
        TaskId::FactualQa | TaskId::NarrativeQa | TaskId::MapTask | TaskId::CraftTask => {
            let mut answers = Vec::new();
            let mut key = Vec::new();
            for r in records {
                let (TrialMeta::Mcq { .. }, Expected::Option(k)) = (&r.meta, &r.expected) else {
                    return Err(mismatch(r));
                };
                answers.push(r.response.option_index());
                key.push(*k);
            }
            score_mcq(task, &answers, &key)
        }
        TaskId::NarrativeFreeRecall => {
            let mut best: f64 = 0.0;
            for r in records {
                let TrialMeta::FreeRecall = r.meta else { return Err(mismatch(r)) };
                best = best.max(r.similarity.unwrap_or(0.0));
            }
            Ok(TaskScore::new(task, best))
        }
    }
}

/// Recomputes the score of one session from its event log.
pub fn score_event_log(events: &[TranscriptEvent]) -> Result<TaskScore, TaskError> {
    let transcript = Transcript::new(events.to_vec());
    let task = transcript
        .task()
        .ok_or_else(|| TaskError::MalformedLog("empty event log".into()))?;
    let records: Vec<ResponseRecord> = transcript.responses().collect();
    score_records(task, &records)
}
