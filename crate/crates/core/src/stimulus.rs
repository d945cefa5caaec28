//! Stimuli shown to participants and the JSON stimulus packs for text tasks.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::task::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulusKind {
    Digit,
    Letter,
    Word,
    Statement,
    Passage,
    Story,
    MapDescription,
    CraftRules,
    Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Display {
    OneAtATime,
    TimedBlock,
}

/// One unit of presentation.
///
/// Question stimuli list their options; the correct index never travels with
/// the stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub kind: StimulusKind,
    pub payload: String,
    pub display: Display,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    /// Trial (sequence, block, attempt, or map) this stimulus belongs to.
    pub trial: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

impl Stimulus {
    pub fn item(kind: StimulusKind, payload: impl Into<String>, trial: u32) -> Self {
        Stimulus {
            kind,
            payload: payload.into(),
            display: Display::OneAtATime,
            duration_ms: None,
            trial,
            options: Vec::new(),
        }
    }

    pub fn block(kind: StimulusKind, payload: impl Into<String>, duration_ms: u64, trial: u32) -> Self {
        Stimulus {
            kind,
            payload: payload.into(),
            display: Display::TimedBlock,
            duration_ms: Some(duration_ms),
            trial,
            options: Vec::new(),
        }
    }

    pub fn question(prompt: impl Into<String>, options: Vec<String>, trial: u32) -> Self {
        Stimulus {
            kind: StimulusKind::Question,
            payload: prompt.into(),
            display: Display::OneAtATime,
            duration_ms: None,
            trial,
            options,
        }
    }

    /// Question text with lettered options, as a participant would read it.
    pub fn render(&self) -> String {
        let mut out = self.payload.clone();
        for (i, opt) in self.options.iter().enumerate() {
            out.push('\n');
            out.push((b'A' + i as u8) as char);
            out.push_str(". ");
            out.push_str(opt);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackQuestion {
    pub prompt: String,
    pub options: Vec<String>,
    pub answer_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub questions: Vec<PackQuestion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_text: Option<String>,
}

impl PackItem {
    /// Reference for free recall scoring; defaults to the story itself.
    pub fn reference(&self) -> &str {
        self.reference_text.as_deref().unwrap_or(&self.text)
    }
}

/// A versioned, checksummed collection of passages or stories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusPack {
    pub pack_id: String,
    pub task: TaskId,
    pub items: Vec<PackItem>,
    pub checksum: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PackError {
    #[error("reading pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("decoding pack: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checksum mismatch: recorded {recorded}, computed {computed}")]
    ChecksumMismatch { recorded: String, computed: String },
    #[error("pack is for {found}, expected {expected}")]
    TaskMismatch { expected: TaskId, found: TaskId },
    #[error("invalid pack: {0}")]
    Invalid(String),
}

pub const OPTIONS_PER_QUESTION: usize = 4;
pub const QUESTIONS_PER_PASSAGE: usize = 10;

/// Hex SHA-256 over the compact JSON of `body`.
pub fn checksum_of<T: Serialize>(body: &T) -> String {
    let bytes = serde_json::to_vec(body).expect("pack bodies always serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Serialize)]
struct PackBody<'a> {
    pack_id: &'a str,
    task: TaskId,
    items: &'a [PackItem],
}

impl StimulusPack {
    /// Builds a pack and stamps its checksum.
    pub fn new(pack_id: impl Into<String>, task: TaskId, items: Vec<PackItem>) -> Self {
        let mut pack = StimulusPack {
            pack_id: pack_id.into(),
            task,
            items,
            checksum: String::new(),
        };
        pack.checksum = pack.compute_checksum();
        pack
    }

    pub fn compute_checksum(&self) -> String {
        checksum_of(&PackBody {
            pack_id: &self.pack_id,
            task: self.task,
            items: &self.items,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PackError> {
        let pack: StimulusPack = serde_json::from_str(&fs::read_to_string(path)?)?;
        pack.validate()?;
        Ok(pack)
    }

    pub fn validate(&self) -> Result<(), PackError> {
        let computed = self.compute_checksum();
        if computed != self.checksum {
            return Err(PackError::ChecksumMismatch {
                recorded: self.checksum.clone(),
                computed,
            });
        }
        if !self.task.needs_stimulus_pack() {
            return Err(PackError::Invalid(format!("{} does not use packs", self.task)));
        }
        if self.items.is_empty() {
            return Err(PackError::Invalid("pack has no items".into()));
        }
        for item in &self.items {
            if item.text.trim().is_empty() {
                return Err(PackError::Invalid(format!("item {} has empty text", item.id)));
            }
            if self.task == TaskId::NarrativeFreeRecall {
                if !item.questions.is_empty() {
                    return Err(PackError::Invalid(format!(
                        "free recall item {} carries questions",
                        item.id
                    )));
                }
                continue;
            }
            validate_questions(&item.id, &item.questions)?;
        }
        Ok(())
    }

    pub fn expect_task(&self, task: TaskId) -> Result<(), PackError> {
        if self.task != task {
            return Err(PackError::TaskMismatch {
                expected: task,
                found: self.task,
            });
        }
        Ok(())
    }
}

pub(crate) fn validate_questions(item_id: &str, questions: &[PackQuestion]) -> Result<(), PackError> {
    if questions.len() != QUESTIONS_PER_PASSAGE {
        return Err(PackError::Invalid(format!(
            "item {item_id} has {} questions, expected {QUESTIONS_PER_PASSAGE}",
            questions.len()
        )));
    }
    for (i, q) in questions.iter().enumerate() {
        if q.options.len() != OPTIONS_PER_QUESTION || q.answer_index >= OPTIONS_PER_QUESTION {
            return Err(PackError::Invalid(format!(
                "item {item_id} question {i} must have {OPTIONS_PER_QUESTION} options and one answer"
            )));
        }
    }
    Ok(())
}

/// Sample packs bundled with the crate, one per pack-based task.
pub fn builtin_pack(task: TaskId) -> Option<StimulusPack> {
    let text = match task {
        TaskId::FactualQa => include_str!("../data/packs/factual_qa.json"),
        TaskId::NarrativeQa => include_str!("../data/packs/narrative_qa.json"),
        TaskId::NarrativeFreeRecall => include_str!("../data/packs/narrative_free_recall.json"),
        _ => return None,
    };
    Some(serde_json::from_str(text).expect("bundled pack parses"))
}
