//! Ablation: one free-form summary in place of the key-value store.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::participants::chat::{logged_complete, ChatError, ChatMessage, ChatModel, ChatRequest};
use crate::participants::llm::{ask_model, question_message, render_stimulus};
use crate::participants::prompts::{instruction_block, llm_prompt, Condition, SUMMARIZER_PROMPT};
use crate::participants::{Participant, ParticipantError, Reply};
use crate::stimulus::Stimulus;
use crate::task::TaskId;
use crate::tasks::AskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    TaskSum,
    /// Human-simulation framing when answering.
    HumSum,
}

impl SummaryMode {
    pub fn condition(self) -> Condition {
        match self {
            SummaryMode::TaskSum => Condition::TaskSum,
            SummaryMode::HumSum => Condition::HumSum,
        }
    }
}

pub fn summarize_request(task: TaskId, summary: &str, material: &str) -> ChatRequest {
    let user = if summary.is_empty() {
        format!("Material:\n{material}")
    } else {
        format!("Your summary so far:\n{summary}\n\nNew material:\n{material}")
    };
    ChatRequest {
        messages: vec![
            ChatMessage::system(format!("{}\n\n{SUMMARIZER_PROMPT}", llm_prompt(task))),
            ChatMessage::user(user),
        ],
        tools: Vec::new(),
    }
}

/// The answer request sees the summary and the question only.
pub fn answer_request(task: TaskId, mode: SummaryMode, summary: &str, question: &Stimulus, ask: &AskSpec) -> ChatRequest {
    ChatRequest {
        messages: vec![
            ChatMessage::system(instruction_block(task, mode.condition())),
            ChatMessage::user(format!(
                "Your summary of the material:\n{summary}\n\n{}",
                question_message(&[], question, ask)
            )),
        ],
        tools: Vec::new(),
    }
}

pub struct SummarizerParticipant {
    model: Arc<dyn ChatModel>,
    task: TaskId,
    mode: SummaryMode,
    summary: String,
    pending: Vec<String>,
    trial: Option<u32>,
}

impl SummarizerParticipant {
    pub fn new(model: Arc<dyn ChatModel>, task: TaskId, mode: SummaryMode) -> Self {
        SummarizerParticipant {
            model,
            task,
            mode,
            summary: String::new(),
            pending: Vec::new(),
            trial: None,
        }
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }
}

impl Participant for SummarizerParticipant {
    fn describe(&self) -> Value {
        json!({ "kind": "summarizer", "mode": self.mode, "model": self.model.describe() })
    }

    fn observe(&mut self, stimulus: &Stimulus) -> Result<(), ParticipantError> {
        if self.trial != Some(stimulus.trial) {
            self.trial = Some(stimulus.trial);
            self.summary.clear();
            self.pending.clear();
        }
        self.pending.push(render_stimulus(stimulus));
        Ok(())
    }

    fn respond(&mut self, question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError> {
        let mut exchanges = Vec::new();
        if !self.pending.is_empty() {
            let material = std::mem::take(&mut self.pending).join("\n");
            let request = summarize_request(self.task, &self.summary, &material);
            match logged_complete(self.model.as_ref(), &request, &mut exchanges) {
                Ok(msg) => self.summary = msg.content_str().trim().to_string(),
                Err(ChatError::MalformedModelOutput(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let request = answer_request(self.task, self.mode, &self.summary, question, ask);
        let (response, raw, _) = ask_model(self.model.as_ref(), &request, ask, &mut exchanges)?;
        Ok(Reply { response, raw, exchanges })
    }
}
