//! A chat model taking a task as a participant.

use std::sync::Arc;

use serde_json::{json, Value};

use super::chat::{logged_complete, ChatError, ChatMessage, ChatModel, ChatRequest};
use super::prompts::{build_prompt, format_hint, Condition, FewShot, PromptError};
use super::{Participant, ParticipantError, Reply};
use crate::response::{parse_lenient, ParsedResponse};
use crate::stimulus::{Display, Stimulus, StimulusKind};
use crate::task::TaskId;
use crate::tasks::AskSpec;

/// Text of a presented stimulus as the model sees it.
pub fn render_stimulus(s: &Stimulus) -> String {
    match s.display {
        Display::OneAtATime => s.payload.clone(),
        Display::TimedBlock => format!("{}:\n{}", block_label(s.kind), s.payload),
    }
}

fn block_label(kind: StimulusKind) -> &'static str {
    match kind {
        StimulusKind::Passage => "Passage",
        StimulusKind::Story => "Story",
        StimulusKind::MapDescription => "Map",
        StimulusKind::CraftRules => "Crafting rules",
        _ => "Material",
    }
}

/// Presented stimuli followed by the question and its answer format.
pub fn question_message(shown: &[String], question: &Stimulus, ask: &AskSpec) -> String {
    let mut text = String::new();
    if !shown.is_empty() {
        text.push_str(&shown.join("\n"));
        text.push_str("\n\n");
    }
    text.push_str(&question.render());
    text.push('\n');
    text.push_str(format_hint(&ask.spec));
    text
}

/// One conversation per session. Stimuli are buffered and sent together
/// with the next question; every turn stays in the context.
pub struct LlmParticipant {
    model: Arc<dyn ChatModel>,
    condition: Condition,
    messages: Vec<ChatMessage>,
    shown: Vec<String>,
    few_shot: Value,
}

impl LlmParticipant {
    pub fn new(
        model: Arc<dyn ChatModel>,
        task: TaskId,
        condition: Condition,
        few_shot: Option<&FewShot>,
    ) -> Result<Self, PromptError> {
        let messages = build_prompt(task, condition, few_shot)?;
        let few_shot = few_shot.map_or(Value::Null, |fs| {
            json!({
                "domain": fs.domain,
                "k": fs.k,
                "participants": fs.transcripts.iter().take(fs.k).map(|t| t.participant_id()).collect::<Vec<_>>(),
            })
        });
        Ok(LlmParticipant {
            model,
            condition,
            messages,
            shown: Vec::new(),
            few_shot,
        })
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }
}

/// Sends `request` and parses the text reply. Malformed model output is
/// recorded and scored as unparseable; transport failures propagate.
pub(crate) fn ask_model(
    model: &dyn ChatModel,
    request: &ChatRequest,
    ask: &AskSpec,
    exchanges: &mut Vec<Value>,
) -> Result<(ParsedResponse, Option<String>, Option<ChatMessage>), ParticipantError> {
    match logged_complete(model, request, exchanges) {
        Ok(msg) => {
            let raw = msg.content_str().to_string();
            Ok((parse_lenient(&raw, &ask.spec), Some(raw), Some(msg)))
        }
        Err(ChatError::MalformedModelOutput(m)) => Ok((ParsedResponse::Unparseable(m.clone()), Some(m), None)),
        Err(e) => Err(e.into()),
    }
}

impl Participant for LlmParticipant {
    fn describe(&self) -> Value {
        json!({
            "kind": "llm",
            "model": self.model.describe(),
            "condition": self.condition,
            "few_shot": self.few_shot,
        })
    }

    fn observe(&mut self, stimulus: &Stimulus) -> Result<(), ParticipantError> {
        self.shown.push(render_stimulus(stimulus));
        Ok(())
    }

    fn respond(&mut self, question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError> {
        let text = question_message(&self.shown, question, ask);
        self.shown.clear();
        self.messages.push(ChatMessage::user(text));
        let request = ChatRequest {
            messages: self.messages.clone(),
            tools: Vec::new(),
        };
        let mut exchanges = Vec::new();
        let (response, raw, msg) = ask_model(self.model.as_ref(), &request, ask, &mut exchanges)?;
        self.messages
            .push(msg.unwrap_or_else(|| ChatMessage::assistant(raw.clone().unwrap_or_default())));
        Ok(Reply { response, raw, exchanges })
    }

    fn feedback(&mut self, correct: bool) {
        self.shown.push(if correct { "Correct." } else { "Incorrect." }.to_string());
    }
}
