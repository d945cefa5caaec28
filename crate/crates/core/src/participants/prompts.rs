//! Prompt texts and prompting conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::chat::ChatMessage;
use crate::response::ResponseSpec;
use crate::task::TaskId;
use crate::transcript::{EventType, Transcript};

pub const HUM_PREFIX: &str = "You are simulating a human participant in a psychology experiment.";

pub const MEM_PREFIX: &str = "You are simulating a human participant in a psychology experiment. \
Behave as much like a realistic human as possible. Remember that humans have limited memory and \
therefore sometimes make mistakes.";

pub const FEW_SHOT_PREFACE: &str = "Here are example results from previous human participants.";

pub const COMPACTOR_PROMPT: &str = "You are simulating a human participant in a psychology experiment on working memory. \
You have a key-value memory store with at most 4 slots, reflecting the ~4-chunk limit of human short-term memory (Cowan, 2001). \
Use write_memory and delete_key to maintain the key-value store while doing the original task. \
Each slot should hold ONE chunk — a small bundle of information a person would bind together because it feels meaningfully connected \
(a name with its role, a group of related items or numbers, one gist). \
When the task asks for verbatim retrieval of a sequence, a human will form meaningful chunks of 1–3 items, starting from the beginning. \
NEVER pack a long run of items into one slot. Once your slots are filled, accept that the rest will be lost. \
Compress realistically, and behave as a real human would: imperfect and sensitive to what seems important.";

/// Recall template; `{wm_contents}` is replaced by the serialized store.
pub const RECALL_TEMPLATE: &str = "Your working memory currently contains: {wm_contents}";

pub const SUMMARIZER_PROMPT: &str = "You will first be shown material to remember. Produce a concise abstractive summary of it — \
keep the summary short (prefer brief, dense prose; aim for roughly a paragraph, not a transcript). \
You will later have to answer questions using ONLY your summary, so make sure the summary captures what you'll need for the task above.";

const REVERSE_EXAMPLE: &str =
    "For example, if the digits are the following: [4, 8, 2]\nYou should answer: press <<2>>. press <<8>>. press <<4>>.";

const NBACK_EXAMPLE: &str = "Example: A → A → B → C → C\nResponses: no response, same, different, different, same";

/// Task description without any mention of people.
pub fn llm_prompt(task: TaskId) -> String {
    match task {
        TaskId::DigitSpan => "You will see a sequence of digits presented one at a time. Your task is to remember the digits in the exact order they appear. After the sequence ends, type the digits in the same order. The sequences will gradually become longer. Try to remember them as accurately as possible.".into(),
        TaskId::ReverseDigitSpan => format!("You will see a sequence of digits presented one at a time. Your task is to remember the digits and enter them in reverse order. After the sequence ends, type the digits from last to first. The sequences will gradually become longer. Try to remember them as accurately as possible.\n\n{REVERSE_EXAMPLE}"),
        TaskId::NBack => format!("You will be shown a sequence of letters. After every letter, you will decide whether it matches the letter one turn back. In each block, respond with \"no response\" to the first letter. Once enough letters have appeared, respond to each new letter as \"same\" or \"different\".\n\n{NBACK_EXAMPLE}"),
        TaskId::VariableMapping => "You will see a series of sentences describing where people live. Try to remember where each person lives. Pay attention: people will occasionally move to a new city. After every two sentences, you will be asked: “Where does [Name] live?” Respond with the city where the person currently lives.".into(),
        TaskId::WordRecognition => "Words will appear one at a time. For each word, decide whether it has already appeared earlier in the list. Respond with \"old\" if the word has appeared before and \"new\" otherwise.".into(),
        TaskId::FactualQa | TaskId::NarrativeQa => "Read a passage, and then answer ten questions.".into(),
        TaskId::NarrativeFreeRecall => "Read a story, then recall the story as precisely as possible using the same words when possible. For example, if the story is in first person, you should also use first person.".into(),
        TaskId::MapTask => "You will study a map of locations and roads. Some locations are connected by roads. Memorize which locations are connected, then answer five questions about possible routes. There are three trials in total.".into(),
        TaskId::CraftTask => "You will study a set of materials and crafting rules. Memorize how items combine, then answer five questions from memory. There are three trials in total.".into(),
    }
}

/// Transcription of the participant instructions.
pub fn human_prompt(task: TaskId) -> String {
    match task {
        TaskId::DigitSpan => "The human will see a sequence of digits presented one at a time. Their task is to remember the digits in the exact order they appear. Then, the sequence will disappear. After the sequence disappears, they will be asked to type the digits in the same order as they appeared. The sequences will gradually become longer. They will be asked to remember them as accurately as possible.".into(),
        TaskId::ReverseDigitSpan => format!("The human will see a sequence of digits presented one at a time. Their task is to remember the digits and enter them in reverse order. Then, the sequence will disappear. After the sequence disappears, they will be asked to type the digits from last to first. The sequences will gradually become longer. They will be asked to remember them as accurately as possible.\n\n{REVERSE_EXAMPLE}"),
        TaskId::NBack => format!("The human will be shown a sequence of letters. After every letter, the human will decide whether it matches the letter one turn back. In each block, the human is asked to respond with \"no response\" to the first letter. Once enough letters have appeared, respond to each new letter as \"same\" or \"different\".\n\n{NBACK_EXAMPLE}"),
        TaskId::VariableMapping => "The human will see a series of sentences describing where people live. Sentences are presented one at a time. Each sentence disappears before the next sentence or question appears, and previous sentences are not visible. The human is asked to remember where each person lives. Pay attention: people will occasionally move to a new city. After every two sentences, the human will be asked: “Where does [Name] live?” Respond with the city where the person currently lives.".into(),
        TaskId::WordRecognition => "The human will see words one at a time. Each word disappears before the next word appears. For each word, the human must decide whether it has already appeared earlier in the list. They respond with \"old\" if the word has appeared before and \"new\" otherwise.".into(),
        TaskId::FactualQa | TaskId::NarrativeQa => "The human will have three minutes to read a passage, after which the text will disappear. The human will then be asked to answer ten questions about the text.".into(),
        TaskId::NarrativeFreeRecall => "The human will have five minutes to read a story. The story will then be hidden. The human will be asked to type as much as they remember. They are asked to recall the story as precisely as possible using the same words when possible. For example, if the story is in first person, they should also use first person.".into(),
        TaskId::MapTask => "The human will study a map of locations. Some locations are connected by roads. The human will have one minute to memorize which locations are connected, after which the map will disappear. The human will then answer five questions about how to travel between locations using only the available roads. There are three trials in total.".into(),
        TaskId::CraftTask => "The human will study a set of materials and crafting rules. The human will have one minute to memorize how items combine, after which the rules will disappear. The human will then answer five questions from memory. There are three trials in total.".into(),
    }
}

/// Answer-format line appended to every question sent to a model.
pub fn format_hint(spec: &ResponseSpec) -> &'static str {
    match spec {
        ResponseSpec::Digits => "Answer with the digits only.",
        ResponseSpec::SameDiff => "Answer with \"same\" or \"different\".",
        ResponseSpec::OldNew => "Answer with \"old\" or \"new\".",
        ResponseSpec::City { .. } => "Answer with the name of the city.",
        ResponseSpec::OptionLetter { .. } => "Answer with the letter of your choice.",
        ResponseSpec::FreeText => "Write down everything you remember.",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    TaskPr,
    HumPr,
    MemPr,
    Compactor,
    TaskSum,
    HumSum,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::TaskPr,
        Condition::HumPr,
        Condition::MemPr,
        Condition::Compactor,
        Condition::TaskSum,
        Condition::HumSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::TaskPr => "task_pr",
            Condition::HumPr => "hum_pr",
            Condition::MemPr => "mem_pr",
            Condition::Compactor => "compactor",
            Condition::TaskSum => "task_sum",
            Condition::HumSum => "hum_sum",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FewShotDomain {
    In,
    Out,
}

/// Demonstration transcripts inserted ahead of the task.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShot {
    pub domain: FewShotDomain,
    pub k: usize,
    pub transcripts: Vec<Transcript>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("few-shot needs {needed} human transcripts, {available} available")]
    MissingHumanTranscripts { needed: usize, available: usize },
}

/// System instructions for a prompting condition. Memory-agent conditions
/// use the plain task prompt here; their own prompts are added by the agent.
pub fn instruction_block(task: TaskId, condition: Condition) -> String {
    match condition {
        Condition::TaskPr | Condition::Compactor | Condition::TaskSum => llm_prompt(task),
        Condition::HumPr | Condition::HumSum => format!("{HUM_PREFIX}\n\n{}", human_prompt(task)),
        Condition::MemPr => format!("{MEM_PREFIX}\n\n{}", human_prompt(task)),
    }
}

/// Opening messages for a session under `condition`, with optional
/// demonstrations. The demonstrations must already be sampled; see
/// [`sample_demonstrations`].
pub fn build_prompt(
    task: TaskId,
    condition: Condition,
    few_shot: Option<&FewShot>,
) -> Result<Vec<ChatMessage>, PromptError> {
    let mut system = instruction_block(task, condition);
    if let Some(fs) = few_shot {
        if fs.transcripts.len() < fs.k {
            return Err(PromptError::MissingHumanTranscripts {
                needed: fs.k,
                available: fs.transcripts.len(),
            });
        }
        system.push_str("\n\n");
        system.push_str(FEW_SHOT_PREFACE);
        if fs.domain == FewShotDomain::Out {
            let other = fs.transcripts.first().and_then(|t| t.task()).map_or("another task", |t| t.as_str());
            system.push_str(&format!(
                " These examples come from a different task ({}), not the task you are about to do.",
                other.replace('_', " ")
            ));
        }
        for (i, t) in fs.transcripts.iter().take(fs.k).enumerate() {
            system.push_str(&format!("\n\nExample participant {}:\n{}", i + 1, render_demonstration(t)));
        }
    }
    Ok(vec![ChatMessage::system(system)])
}

/// Picks `k` transcripts with the run rng and returns them with their
/// participant ids.
pub fn sample_demonstrations<R: rand::Rng + ?Sized>(
    pool: &[Transcript],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Transcript>, PromptError> {
    use rand::seq::SliceRandom;
    if pool.len() < k {
        return Err(PromptError::MissingHumanTranscripts {
            needed: k,
            available: pool.len(),
        });
    }
    Ok(pool.choose_multiple(rng, k).cloned().collect())
}

/// A transcript as plain text: what was shown, asked, and answered.
pub fn render_demonstration(t: &Transcript) -> String {
    let mut lines = Vec::new();
    for e in &t.events {
        match e.event_type {
            EventType::Shown => {
                if let Some(p) = e.payload.pointer("/stimulus/payload").and_then(|v| v.as_str()) {
                    lines.push(format!("Shown: {p}"));
                }
            }
            EventType::Asked => {
                if let Some(p) = e.payload.pointer("/stimulus/payload").and_then(|v| v.as_str()) {
                    lines.push(format!("Question: {p}"));
                }
            }
            EventType::Responded => {
                if e.payload.get("late").and_then(|v| v.as_bool()) == Some(true) {
                    continue;
                }
                let raw = e.payload.get("raw").and_then(|v| v.as_str()).map(str::to_string);
                let answer = raw.unwrap_or_else(|| response_text(&e.payload["response"]));
                let mark = match e.payload.get("correct").and_then(|v| v.as_bool()) {
                    Some(true) => " (correct)",
                    Some(false) => " (incorrect)",
                    None => "",
                };
                lines.push(format!("Answer: {answer}{mark}"));
            }
            EventType::Scored => {
                if let Some(v) = e.payload.pointer("/score/value") {
                    lines.push(format!("Final score: {v}"));
                }
            }
            EventType::Timing => {}
        }
    }
    lines.join("\n")
}

fn response_text(v: &serde_json::Value) -> String {
    match v.get("value") {
        Some(serde_json::Value::Array(ds)) => ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(""),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    }
}
