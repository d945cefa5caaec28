//! Task identity and score ranges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The ten memory tasks of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    DigitSpan,
    ReverseDigitSpan,
    NBack,
    WordRecognition,
    VariableMapping,
    FactualQa,
    NarrativeQa,
    NarrativeFreeRecall,
    MapTask,
    CraftTask,
}

impl TaskId {
    pub const ALL: [TaskId; 10] = [
        TaskId::DigitSpan,
        TaskId::ReverseDigitSpan,
        TaskId::NBack,
        TaskId::WordRecognition,
        TaskId::VariableMapping,
        TaskId::FactualQa,
        TaskId::NarrativeQa,
        TaskId::NarrativeFreeRecall,
        TaskId::MapTask,
        TaskId::CraftTask,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::DigitSpan => "digit_span",
            TaskId::ReverseDigitSpan => "reverse_digit_span",
            TaskId::NBack => "n_back",
            TaskId::WordRecognition => "word_recognition",
            TaskId::VariableMapping => "variable_mapping",
            TaskId::FactualQa => "factual_qa",
            TaskId::NarrativeQa => "narrative_qa",
            TaskId::NarrativeFreeRecall => "narrative_free_recall",
            TaskId::MapTask => "map_task",
            TaskId::CraftTask => "craft_task",
        }
    }

    /// Theoretical `(min, max)` of the task score, used for normalization.
    pub fn score_range(self) -> (f64, f64) {
        match self {
            TaskId::DigitSpan | TaskId::ReverseDigitSpan => (0.0, 20.0),
            TaskId::NBack => (0.0, 1.0),
            TaskId::WordRecognition => (0.0, 100.0),
            TaskId::VariableMapping | TaskId::FactualQa | TaskId::NarrativeQa => (0.0, 10.0),
            TaskId::NarrativeFreeRecall => (0.0, 1.0),
            TaskId::MapTask | TaskId::CraftTask => (0.0, 15.0),
        }
    }

    /// Tasks whose stimuli come from a stimulus pack rather than a generator.
    pub fn needs_stimulus_pack(self) -> bool {
        matches!(
            self,
            TaskId::FactualQa | TaskId::NarrativeQa | TaskId::NarrativeFreeRecall
        )
    }

    /// Tasks whose stimuli are presented item by item (as opposed to a timed block).
    pub fn is_streamed(self) -> bool {
        matches!(
            self,
            TaskId::DigitSpan
                | TaskId::ReverseDigitSpan
                | TaskId::NBack
                | TaskId::WordRecognition
                | TaskId::VariableMapping
        )
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown task `{0}`")]
pub struct UnknownTask(pub String);

impl FromStr for TaskId {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

/// A scalar task score together with its admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: TaskId,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

impl TaskScore {
    /// Builds a score for `task`, clamping into the task range.
    pub fn new(task: TaskId, value: f64) -> Self {
        let (min, max) = task.score_range();
        TaskScore {
            task,
            value: value.clamp(min, max),
            min,
            max,
        }
    }

    /// Score mapped affinely onto `[0, 1]`.
    pub fn normalized(&self) -> f64 {
        (self.value - self.min) / (self.max - self.min)
    }
}
