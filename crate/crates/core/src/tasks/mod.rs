//! The ten memory tasks: generators, schedules, session state machine, scorers.

pub mod craft;
pub mod generators;
pub mod lexicon;
pub mod map;
pub mod scoring;
mod session;

use serde::{Deserialize, Serialize};

use crate::config::InvalidConfig;
use crate::response::{OldNew, ParsedResponse, SameDiff};
use crate::stimulus::PackError;

pub use scoring::{
    score_best_span, score_event_log, score_mcq, score_nback, score_records,
    score_variable_mapping, score_word_recognition, SpanOutcome,
};
pub use session::{Ack, AskSpec, Event, Phase, SessionBuilder, Step, TaskSession};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("lexicon too small: need {needed} distinct words, have {available}")]
    LexiconTooSmall { needed: usize, available: usize },
    #[error("task requires a stimulus pack")]
    MissingStimulusPack,
    #[error(transparent)]
    InvalidConfig(#[from] InvalidConfig),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error("a response is due before the next event")]
    AwaitingResponse,
    #[error("no question is pending")]
    WrongPhase,
    #[error("response does not fit the pending question: {0}")]
    TypeMismatch(String),
    #[error("session already finished")]
    SessionFinished,
    #[error("malformed log: {0}")]
    MalformedLog(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} attempts given, at most 3 are allowed")]
    MoreThanThreeAttempts(usize),
}

/// A generated multiple-choice question with its key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub prompt: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

/// Ground truth for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Expected {
    Digits(Vec<u8>),
    SameDiff(SameDiff),
    OldNew(OldNew),
    City(String),
    Option(usize),
    /// Reference text for free recall.
    FreeText(String),
}

impl Expected {
    /// Exact-match correctness; `None` for free text, which is graded by similarity.
    pub fn judge(&self, response: &ParsedResponse) -> Option<bool> {
        Some(match (self, response) {
            (Expected::FreeText(_), _) => return None,
            (Expected::Digits(a), ParsedResponse::Digits(b)) => a == b,
            (Expected::SameDiff(a), ParsedResponse::SameDiff(b)) => a == b,
            (Expected::OldNew(a), ParsedResponse::OldNew(b)) => a == b,
            (Expected::City(a), ParsedResponse::City(b)) => a.eq_ignore_ascii_case(b.trim()),
            (Expected::Option(a), r) => r.option_index() == Some(*a),
            _ => false,
        })
    }

    /// The response a perfect participant gives.
    pub fn perfect_response(&self) -> ParsedResponse {
        match self {
            Expected::Digits(d) => ParsedResponse::Digits(d.clone()),
            Expected::SameDiff(s) => ParsedResponse::SameDiff(*s),
            Expected::OldNew(o) => ParsedResponse::OldNew(*o),
            Expected::City(c) => ParsedResponse::City(c.clone()),
            Expected::Option(i) => ParsedResponse::OptionLetter((b'A' + *i as u8) as char),
            Expected::FreeText(t) => ParsedResponse::FreeText(t.clone()),
        }
    }
}

/// Where a question sits in the task, recorded with every response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrialMeta {
    Span { length: usize, index: usize },
    NBack { block: usize, n: usize, position: usize, practice: bool },
    Word { position: usize },
    Variable { attempt: usize, query: usize, active: usize },
    Mcq { trial: usize, question: usize },
    FreeRecall,
}
