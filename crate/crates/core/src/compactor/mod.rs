//! The capacity-limited memory agent and the summarizer ablation.
//!
//! The agent sees each stimulus together with its current memory and may
//! call `write_memory` / `delete_key`. Questions are answered from the
//! memory contents alone.

mod store;
mod summarizer;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::participants::chat::{logged_complete, ChatError, ChatMessage, ChatModel, ChatRequest};
use crate::participants::llm::{ask_model, question_message, render_stimulus};
use crate::participants::prompts::{llm_prompt, COMPACTOR_PROMPT, RECALL_TEMPLATE};
use crate::participants::{Participant, ParticipantError, Reply};
use crate::stimulus::Stimulus;
use crate::task::TaskId;
use crate::tasks::AskSpec;

pub use store::{
    memory_tools, EncodeTrace, MemoryStore, Outcome, TraceStep, DEFAULT_CAPACITY, MAX_KEY_CHARS, MAX_VALUE_CHARS,
};
pub use summarizer::{SummarizerParticipant, SummaryMode};

pub const DEFAULT_ROUND_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    /// Encode after every stimulus.
    PerItem,
    /// Encode once per trial, over all stimuli shown before the first question.
    PerTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompactorConfig {
    pub capacity: usize,
    pub round_cap: usize,
    pub encode_mode: EncodeMode,
}

impl Default for CompactorConfig {
    fn default() -> Self {
        CompactorConfig {
            capacity: DEFAULT_CAPACITY,
            round_cap: DEFAULT_ROUND_CAP,
            encode_mode: EncodeMode::PerItem,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOutcome {
    pub rounds: usize,
    pub round_cap_exceeded: bool,
}

/// `{wm_contents}` filled in with the serialized store.
pub fn memory_preamble(store: &MemoryStore) -> String {
    RECALL_TEMPLATE.replace("{wm_contents}", &store.serialize_contents())
}

pub fn compactor_system_prompt(task: TaskId) -> String {
    format!("{COMPACTOR_PROMPT}\n\n{}", llm_prompt(task))
}

/// Runs tool-call rounds until the model answers without tools or the
/// round cap is hit. Malformed output ends the round loop; it is kept in
/// `exchanges`.
pub fn encode(
    model: &dyn ChatModel,
    system: &str,
    material: &str,
    store: &mut MemoryStore,
    trace: &mut EncodeTrace,
    round_cap: usize,
    exchanges: &mut Vec<Value>,
) -> Result<EncodeOutcome, ChatError> {
    let mut messages = vec![
        ChatMessage::system(system),
        ChatMessage::user(format!("{}\n\nNew material:\n{material}", memory_preamble(store))),
    ];
    for round in 0..round_cap {
        let request = ChatRequest {
            messages: messages.clone(),
            tools: memory_tools(),
        };
        let msg = match logged_complete(model, &request, exchanges) {
            Ok(m) => m,
            Err(ChatError::MalformedModelOutput(_)) => {
                return Ok(EncodeOutcome { rounds: round + 1, round_cap_exceeded: false });
            }
            Err(e) => return Err(e),
        };
        if msg.tool_calls.is_empty() {
            return Ok(EncodeOutcome { rounds: round + 1, round_cap_exceeded: false });
        }
        let calls = msg.tool_calls.clone();
        messages.push(msg);
        for call in calls {
            let id = call.id.clone();
            let outcome = trace.record(store, call);
            messages.push(ChatMessage::tool_result(id, outcome.tool_message(store)));
        }
    }
    Ok(EncodeOutcome { rounds: round_cap, round_cap_exceeded: true })
}

/// The recall request: template, serialized store, and the question.
pub fn recall_request(system: &str, store: &MemoryStore, question: &Stimulus, ask: &AskSpec) -> ChatRequest {
    ChatRequest {
        messages: vec![
            ChatMessage::system(system),
            ChatMessage::user(format!(
                "{}\n\n{}",
                memory_preamble(store),
                question_message(&[], question, ask)
            )),
        ],
        tools: Vec::new(),
    }
}

/// Returns a window of at least `n` characters that `prompt` shares with
/// one of the stimuli and that no allowed text (memory values, the query)
/// contains.
pub fn exclusion_violation(prompt: &str, stimuli: &[String], allowed: &[String], n: usize) -> Option<String> {
    // longest first, so a short allowed text inside a longer one cannot break it up
    let mut allowed: Vec<&String> = allowed.iter().collect();
    allowed.sort_by_key(|a| std::cmp::Reverse(a.chars().count()));
    let mut stripped = prompt.to_string();
    for a in allowed {
        if !a.is_empty() {
            stripped = stripped.replace(a.as_str(), "\u{0}");
        }
    }
    for s in stimuli {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() < n {
            continue;
        }
        for w in chars.windows(n) {
            let window: String = w.iter().collect();
            if stripped.contains(&window) {
                return Some(window);
            }
        }
    }
    None
}

/// All message text of a request.
pub fn request_text(request: &ChatRequest) -> String {
    request
        .messages
        .iter()
        .map(ChatMessage::content_str)
        .collect::<Vec<_>>()
        .join("\n")
}

pub struct CompactorParticipant {
    model: Arc<dyn ChatModel>,
    config: CompactorConfig,
    system: String,
    store: MemoryStore,
    trace: EncodeTrace,
    trial: Option<u32>,
    pending: Vec<String>,
    exchanges: Vec<Value>,
    cap_exceeded: usize,
}

impl CompactorParticipant {
    pub fn new(model: Arc<dyn ChatModel>, task: TaskId, config: CompactorConfig) -> Self {
        CompactorParticipant {
            model,
            store: MemoryStore::new(config.capacity),
            config,
            system: compactor_system_prompt(task),
            trace: EncodeTrace::default(),
            trial: None,
            pending: Vec::new(),
            exchanges: Vec::new(),
            cap_exceeded: 0,
        }
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub fn trace(&self) -> &EncodeTrace {
        &self.trace
    }

    /// Encode loops that ran into the round cap.
    pub fn round_cap_hits(&self) -> usize {
        self.cap_exceeded
    }

    fn flush(&mut self) -> Result<(), ParticipantError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let material = std::mem::take(&mut self.pending).join("\n");
        let out = encode(
            self.model.as_ref(),
            &self.system,
            &material,
            &mut self.store,
            &mut self.trace,
            self.config.round_cap,
            &mut self.exchanges,
        )?;
        if out.round_cap_exceeded {
            self.cap_exceeded += 1;
            log::warn!("encode hit the round cap of {}", self.config.round_cap);
            self.exchanges.push(json!({ "round_cap_exceeded": true }));
        }
        Ok(())
    }
}

impl Participant for CompactorParticipant {
    fn describe(&self) -> Value {
        json!({
            "kind": "compactor",
            "model": self.model.describe(),
            "capacity": self.config.capacity,
            "round_cap": self.config.round_cap,
            "encode_mode": self.config.encode_mode,
        })
    }

    fn observe(&mut self, stimulus: &Stimulus) -> Result<(), ParticipantError> {
        if self.trial != Some(stimulus.trial) {
            self.trial = Some(stimulus.trial);
            self.store = MemoryStore::new(self.config.capacity);
            self.trace = EncodeTrace::default();
            self.pending.clear();
        }
        self.pending.push(render_stimulus(stimulus));
        if self.config.encode_mode == EncodeMode::PerItem {
            self.flush()?;
        }
        Ok(())
    }

    fn respond(&mut self, question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError> {
        self.flush()?;
        let request = recall_request(&self.system, &self.store, question, ask);
        let mut exchanges = std::mem::take(&mut self.exchanges);
        exchanges.push(json!({ "store": self.store.entries(), "capacity": self.store.capacity() }));
        let (response, raw, _) = ask_model(self.model.as_ref(), &request, ask, &mut exchanges)?;
        Ok(Reply { response, raw, exchanges })
    }
}
