//! Chat-completions wire types and the HTTP client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn text(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: Some(content.into()),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::text(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::text(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::text(Role::Assistant, content)
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            tool_call_id: Some(call_id.into()),
            ..Self::text(Role::Tool, content)
        }
    }

    pub fn tool_calls(calls: Vec<ToolCall>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: None,
            tool_calls: calls,
            tool_call_id: None,
        }
    }

    pub fn content_str(&self) -> &str {
        self.content.as_deref().unwrap_or("")
    }

    fn to_wire(&self) -> Value {
        let mut m = json!({ "role": self.role, "content": self.content });
        if !self.tool_calls.is_empty() {
            m["tool_calls"] = self
                .tool_calls
                .iter()
                .map(|c| {
                    json!({
                        "id": c.id,
                        "type": "function",
                        "function": { "name": c.name, "arguments": c.arguments.to_string() }
                    })
                })
                .collect();
        }
        if let Some(id) = &self.tool_call_id {
            m["tool_call_id"] = json!(id);
        }
        m
    }
}

/// A function the model may call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

impl ToolSpec {
    fn to_wire(&self) -> Value {
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tools: Vec<ToolSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited")]
    RateLimited,
    #[error("malformed model output: {0}")]
    MalformedModelOutput(String),
    #[error("endpoint returned {status}: {body}")]
    Http { status: u16, body: String },
    #[error("missing API key in ${0}")]
    MissingApiKey(String),
}

impl ChatError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ChatError::Transport(_) | ChatError::RateLimited => true,
            ChatError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// Anything that answers chat requests.
pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, ChatError>;

    /// Model description recorded in transcripts.
    fn describe(&self) -> Value;
}

/// Calls `model` and appends the verbatim request/response pair to `log`.
pub fn logged_complete(
    model: &dyn ChatModel,
    request: &ChatRequest,
    log: &mut Vec<Value>,
) -> Result<ChatMessage, ChatError> {
    let result = model.complete(request);
    let response = match &result {
        Ok(m) => json!({ "message": m }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    log.push(json!({ "request": request, "response": response }));
    let msg = result?;
    for call in &msg.tool_calls {
        if !request.tools.iter().any(|t| t.name == call.name) {
            return Err(ChatError::MalformedModelOutput(format!("unregistered tool {:?}", call.name)));
        }
    }
    Ok(msg)
}

pub fn default_api_key_env() -> String {
    "MEMSIM_API_KEY".into()
}

fn default_temperature() -> f64 {
    1.0
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    5
}

fn default_backoff() -> u64 {
    500
}

/// OpenAI-compatible endpoint settings. The key is read from the
/// environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Extra top-level request fields, e.g. `reasoning_effort`.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, Value>,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            temperature: default_temperature(),
            max_tokens: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            extra: Default::default(),
        }
    }
}

pub struct HttpChatModel {
    config: EndpointConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatModel {
    /// Reads the API key from the environment; a missing key is allowed
    /// for local endpoints that do not check it.
    pub fn new(config: EndpointConfig) -> Result<Self, ChatError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(HttpChatModel { config, api_key, client })
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": request.messages.iter().map(ChatMessage::to_wire).collect::<Vec<_>>(),
            "temperature": self.config.temperature,
        });
        if !request.tools.is_empty() {
            body["tools"] = request.tools.iter().map(ToolSpec::to_wire).collect();
        }
        if let Some(m) = self.config.max_tokens {
            body["max_tokens"] = json!(m);
        }
        for (k, v) in &self.config.extra {
            body[k] = v.clone();
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<ChatMessage, ChatError> {
        let mut req = self.client.post(&self.config.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 {
            return Err(ChatError::RateLimited);
        }
        let text = resp.text().map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Http { status, body: text });
        }
        parse_completion(&text)
    }
}

/// Extracts the first choice's message from a chat-completions response body.
pub fn parse_completion(body: &str) -> Result<ChatMessage, ChatError> {
    let malformed = |m: String| ChatError::MalformedModelOutput(m);
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let msg = v
        .pointer("/choices/0/message")
        .ok_or_else(|| malformed("no choices[0].message".into()))?;
    let content = msg.get("content").and_then(|c| c.as_str()).map(str::to_string);
    let mut calls = Vec::new();
    if let Some(list) = msg.get("tool_calls").and_then(|t| t.as_array()) {
        for (i, c) in list.iter().enumerate() {
            let name = c
                .pointer("/function/name")
                .and_then(|n| n.as_str())
                .ok_or_else(|| malformed(format!("tool call {i} has no name")))?;
            let raw_args = c.pointer("/function/arguments").cloned().unwrap_or(json!({}));
            let arguments = match raw_args {
                Value::String(s) if s.trim().is_empty() => json!({}),
                Value::String(s) => serde_json::from_str(&s)
                    .map_err(|e| malformed(format!("tool call {name} arguments: {e}")))?,
                other => other,
            };
            let id = c.get("id").and_then(|x| x.as_str()).map_or_else(|| format!("call_{i}"), str::to_string);
            calls.push(ToolCall { id, name: name.to_string(), arguments });
        }
    }
    if content.is_none() && calls.is_empty() {
        return Err(malformed("message has neither content nor tool calls".into()));
    }
    Ok(ChatMessage {
        role: Role::Assistant,
        content,
        tool_calls: calls,
        tool_call_id: None,
    })
}

impl ChatModel for HttpChatModel {
    fn complete(&self, request: &ChatRequest) -> Result<ChatMessage, ChatError> {
        let body = self.body(request);
        let mut delay = self.config.backoff_ms;
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if e.is_retryable() && tries < self.config.max_retries => {
                    log::warn!("chat request failed ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    tries += 1;
                }
                other => return other,
            }
        }
    }

    fn describe(&self) -> Value {
        json!({
            "endpoint": self.config.url,
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "extra": self.config.extra,
        })
    }
}
