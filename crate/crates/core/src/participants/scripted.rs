//! Deterministic stand-in for a remote model.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::chat::{ChatError, ChatMessage, ChatModel, ChatRequest, Role, ToolCall};
use crate::tasks::generators::CITIES;

type Policy = dyn Fn(&ChatRequest) -> Result<ChatMessage, ChatError> + Send + Sync;

/// A chat model whose replies are a pure function of the request.
pub struct ScriptedModel {
    name: String,
    policy: Box<Policy>,
}

impl ScriptedModel {
    pub fn from_fn(f: impl Fn(&ChatRequest) -> Result<ChatMessage, ChatError> + Send + Sync + 'static) -> Self {
        ScriptedModel { name: "custom".into(), policy: Box::new(f) }
    }

    /// Answers from whatever is in its context. With tools available it
    /// stores new material in chunks of three tokens and then says it is
    /// done.
    pub fn heuristic() -> Self {
        ScriptedModel { name: "heuristic".into(), policy: Box::new(heuristic) }
    }
}

impl ChatModel for ScriptedModel {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, ChatError> {
        (self.policy)(request)
    }

    fn describe(&self) -> Value {
        json!({ "kind": "scripted", "policy": self.name })
    }
}

fn digest(request: &ChatRequest) -> [u8; 32] {
    let bytes = serde_json::to_vec(request).expect("request serializes");
    Sha256::digest(&bytes).into()
}

/// Keys sort in insertion order and carry no digits.
fn chunk_key(i: usize) -> String {
    let hi = (b'a' + (i / 26) as u8) as char;
    let lo = (b'a' + (i % 26) as u8) as char;
    format!("chunk-{hi}{lo}")
}

/// Fills three-token chunks in order: tops up the newest chunk first,
/// then opens new ones. At most five calls per round.
fn encode_policy(content: &str) -> ChatMessage {
    let (memory, material) = match content.split_once("\n\nNew material:\n") {
        Some((m, rest)) => (m, rest),
        None => ("", content),
    };
    let memory: serde_json::Map<String, Value> = memory
        .split_once(": ")
        .and_then(|(_, json)| serde_json::from_str(json).ok())
        .unwrap_or_default();
    let mut tokens: Vec<String> = material.split_whitespace().map(str::to_string).collect();
    let mut calls = Vec::new();
    let mut next = memory.len();
    if let Some((key, value)) = memory.iter().next_back() {
        let held: Vec<&str> = value.as_str().unwrap_or_default().split_whitespace().collect();
        if held.len() < 3 && !tokens.is_empty() {
            let take = (3 - held.len()).min(tokens.len());
            let mut joined: Vec<String> = held.iter().map(|s| s.to_string()).collect();
            joined.extend(tokens.drain(..take));
            calls.push((key.clone(), joined.join(" ")));
        }
    }
    for chunk in tokens.chunks(3) {
        calls.push((chunk_key(next), chunk.join(" ")));
        next += 1;
    }
    if calls.is_empty() {
        return ChatMessage::assistant("Done.");
    }
    ChatMessage::tool_calls(
        calls
            .into_iter()
            .take(5)
            .enumerate()
            .map(|(i, (key, value))| ToolCall {
                id: format!("call_{i}"),
                name: "write_memory".into(),
                arguments: json!({ "key": key, "value": value }),
            })
            .collect(),
    )
}

fn heuristic(request: &ChatRequest) -> Result<ChatMessage, ChatError> {
    let last = request.messages.last().ok_or_else(|| ChatError::MalformedModelOutput("empty request".into()))?;
    if !request.tools.is_empty() {
        if last.role == Role::Tool {
            return Ok(ChatMessage::assistant("Done."));
        }
        return Ok(encode_policy(last.content_str()));
    }
    let content = last.content_str();
    let (context, question) = content.rsplit_once("\n\n").unwrap_or(("", content));
    let history: Vec<&str> = request
        .messages
        .iter()
        .filter(|m| m.role == Role::User)
        .flat_map(|m| m.content_str().lines())
        .collect();
    let pick = |n: usize| digest(request)[0] as usize % n.max(1);
    let answer = if question.ends_with("Answer with the digits only.") {
        let mut d: Vec<char> = context.chars().filter(char::is_ascii_digit).collect();
        if question.contains("reverse order") {
            d.reverse();
        }
        d.iter().map(|c| format!("press <<{c}>>.")).collect::<Vec<_>>().join(" ")
    } else if question.ends_with("Answer with \"same\" or \"different\".") {
        let back = if question.contains("one letter back") {
            1
        } else {
            question
                .split_whitespace()
                .find_map(|w| w.parse::<usize>().ok())
                .unwrap_or(1)
        };
        let letters: Vec<&str> = history
            .iter()
            .copied()
            .filter(|l| l.len() == 1 && l.chars().all(|c| c.is_ascii_uppercase()))
            .collect();
        match (letters.last(), letters.len().checked_sub(back + 1).map(|i| letters[i])) {
            (Some(a), Some(b)) if a == &b => "same".to_string(),
            (Some(_), Some(_)) => "different".to_string(),
            _ => ["same", "different"][pick(2)].to_string(),
        }
    } else if question.ends_with("Answer with \"old\" or \"new\".") {
        let word = question.split('"').nth(1).unwrap_or_default();
        let seen = history.iter().filter(|l| **l == word).count();
        if seen >= 2 { "old" } else { "new" }.to_string()
    } else if question.ends_with("Answer with the name of the city.") {
        let person = question
            .strip_prefix("Where does ")
            .and_then(|q| q.split(" live?").next())
            .unwrap_or_default();
        history
            .iter()
            .rev()
            .find_map(|l| {
                l.strip_prefix(&format!("{person} lives in "))
                    .or_else(|| l.strip_prefix(&format!("{person} moved to ")))
                    .map(|c| c.trim_end_matches('.').to_string())
            })
            .unwrap_or_else(|| CITIES[pick(CITIES.len())].to_string())
    } else if question.ends_with("Answer with the letter of your choice.") {
        let options: Vec<&str> = question
            .lines()
            .filter(|l| l.len() > 3 && l.as_bytes()[1] == b'.' && l.as_bytes()[0].is_ascii_uppercase())
            .map(|l| &l[3..])
            .collect();
        let body = history.join("\n").to_lowercase();
        let idx = options
            .iter()
            .position(|o| body.matches(&o.to_lowercase()).count() > 1)
            .unwrap_or_else(|| pick(options.len()));
        format!("{}", (b'A' + idx as u8) as char)
    } else if question.ends_with("Write down everything you remember.") {
        context.split_once(":\n").map_or(context, |(_, rest)| rest).to_string()
    } else {
        // anything else, e.g. a request to summarize: repeat the material
        content
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.ends_with(':'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    Ok(ChatMessage::assistant(answer))
}
