use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::participants::chat::{ToolCall, ToolSpec};

pub const DEFAULT_CAPACITY: usize = 4;
pub const MAX_KEY_CHARS: usize = 64;
pub const MAX_VALUE_CHARS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Outcome {
    Stored,
    Overwritten,
    RejectedFull,
    Deleted,
    KeyNotFound,
    /// Bad arguments: empty or oversized key or value, unknown tool.
    Invalid(String),
}

impl Outcome {
    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::RejectedFull | Outcome::KeyNotFound | Outcome::Invalid(_))
    }

    /// Text returned to the model as the tool result.
    pub fn tool_message(&self, store: &MemoryStore) -> String {
        let size = format!("{}/{}", store.len(), store.capacity());
        match self {
            Outcome::Stored => format!("stored ({size} slots used)"),
            Outcome::Overwritten => format!("overwritten ({size} slots used)"),
            Outcome::Deleted => format!("deleted ({size} slots used)"),
            Outcome::RejectedFull => format!("error: rejected_full, memory is full ({size}); delete a key or overwrite an existing one"),
            Outcome::KeyNotFound => "error: key_not_found".to_string(),
            Outcome::Invalid(r) => format!("error: {r}"),
        }
    }
}

/// Fixed-capacity key-value working memory. Entries keep insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStore {
    capacity: usize,
    entries: Vec<(String, String)>,
}

impl Default for MemoryStore {
    fn default() -> Self {
        MemoryStore::new(DEFAULT_CAPACITY)
    }
}

impl MemoryStore {
    pub fn new(capacity: usize) -> Self {
        MemoryStore { capacity, entries: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_memory(&mut self, key: &str, value: &str) -> Outcome {
        if key.is_empty() {
            return Outcome::Invalid("key must not be empty".into());
        }
        if key.chars().count() > MAX_KEY_CHARS {
            return Outcome::Invalid(format!("key longer than {MAX_KEY_CHARS} characters"));
        }
        if value.chars().count() > MAX_VALUE_CHARS {
            return Outcome::Invalid(format!("value longer than {MAX_VALUE_CHARS} characters"));
        }
        if let Some(slot) = self.entries.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value.to_string();
            return Outcome::Overwritten;
        }
        if self.entries.len() >= self.capacity {
            return Outcome::RejectedFull;
        }
        self.entries.push((key.to_string(), value.to_string()));
        Outcome::Stored
    }

    pub fn delete_key(&mut self, key: &str) -> Outcome {
        match self.entries.iter().position(|(k, _)| k == key) {
            Some(i) => {
                self.entries.remove(i);
                Outcome::Deleted
            }
            None => Outcome::KeyNotFound,
        }
    }

    /// Executes a model tool call.
    pub fn apply(&mut self, call: &ToolCall) -> Outcome {
        let arg = |name: &str| call.arguments.get(name).and_then(Value::as_str);
        match (call.name.as_str(), arg("key")) {
            ("write_memory", Some(key)) => match arg("value") {
                Some(value) => self.write_memory(key, value),
                None => Outcome::Invalid("write_memory needs a string value".into()),
            },
            ("delete_key", Some(key)) => self.delete_key(key),
            ("write_memory" | "delete_key", None) => Outcome::Invalid("missing string key".into()),
            (other, _) => Outcome::Invalid(format!("unknown tool {other}")),
        }
    }

    /// Contents as a JSON object in insertion order.
    pub fn serialize_contents(&self) -> String {
        let body: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| format!("{}: {}", Value::from(k.as_str()), Value::from(v.as_str())))
            .collect();
        format!("{{{}}}", body.join(", "))
    }
}

/// The two memory tools as exposed on the wire.
pub fn memory_tools() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: "write_memory".into(),
            description: "Insert or overwrite one entry of your working memory. Rejected if the memory is full and the key is new.".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "key": { "type": "string", "description": "Short label for the entry" },
                    "value": { "type": "string", "description": "Content to remember" }
                },
                "required": ["key", "value"]
            }),
        },
        ToolSpec {
            name: "delete_key".into(),
            description: "Remove one entry from your working memory.".into(),
            parameters: json!({
                "type": "object",
                "properties": { "key": { "type": "string" } },
                "required": ["key"]
            }),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub call: ToolCall,
    pub outcome: Outcome,
    /// Store size after the call.
    pub size: usize,
}

/// Every tool call made during encoding, in order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncodeTrace {
    pub steps: Vec<TraceStep>,
}

impl EncodeTrace {
    pub fn record(&mut self, store: &mut MemoryStore, call: ToolCall) -> Outcome {
        let outcome = store.apply(&call);
        self.steps.push(TraceStep { call, outcome: outcome.clone(), size: store.len() });
        outcome
    }

    /// Re-applies the calls to an empty store of the given capacity.
    pub fn replay(&self, capacity: usize) -> MemoryStore {
        let mut store = MemoryStore::new(capacity);
        for s in &self.steps {
            store.apply(&s.call);
        }
        store
    }

    pub fn max_size(&self) -> usize {
        self.steps.iter().map(|s| s.size).max().unwrap_or(0)
    }

    pub fn count(&self, outcome: &Outcome) -> usize {
        self.steps.iter().filter(|s| &s.outcome == outcome).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(k: &str, v: &str) -> ToolCall {
        ToolCall { id: "c".into(), name: "write_memory".into(), arguments: json!({"key": k, "value": v}) }
    }

    fn delete(k: &str) -> ToolCall {
        ToolCall { id: "c".into(), name: "delete_key".into(), arguments: json!({"key": k}) }
    }

    fn full() -> MemoryStore {
        let mut s = MemoryStore::default();
        for k in ["characters", "place", "time", "goal"] {
            s.write_memory(k, "x");
        }
        s
    }

    #[test]
    fn write_semantics() {
        let mut s = MemoryStore::default();
        assert_eq!(s.write_memory("characters", "Ana, Ben"), Outcome::Stored);
        assert_eq!(s.len(), 1);
        let mut s = full();
        assert_eq!(s.write_memory("theme", "loss"), Outcome::RejectedFull);
        assert_eq!(s.len(), 4);
        assert_eq!(s.get("theme"), None);
        assert_eq!(s.write_memory("characters", "Ana"), Outcome::Overwritten);
        assert_eq!(s.len(), 4);
        assert_eq!(s.get("characters"), Some("Ana"));
    }

    #[test]
    fn delete_semantics() {
        let mut s = full();
        s.delete_key("goal");
        assert_eq!(s.len(), 3);
        assert_eq!(s.delete_key("place"), Outcome::Deleted);
        assert_eq!(s.len(), 2);
        let before = s.clone();
        assert_eq!(s.delete_key("nothing"), Outcome::KeyNotFound);
        assert_eq!(s, before);
        let mut s = full();
        s.delete_key("time");
        assert_eq!(s.write_memory("theme", "loss"), Outcome::Stored);
    }

    #[test]
    fn size_limits_are_tool_errors() {
        let mut s = MemoryStore::default();
        assert!(s.write_memory("", "v").is_error());
        assert!(s.write_memory(&"k".repeat(65), "v").is_error());
        assert!(s.write_memory("k", &"v".repeat(501)).is_error());
        assert_eq!(s.write_memory(&"k".repeat(64), &"v".repeat(500)), Outcome::Stored);
        assert!(s.apply(&ToolCall { id: "c".into(), name: "write_memory".into(), arguments: json!({"key": 3}) }).is_error());
    }

    #[test]
    fn six_distinct_writes_leave_four_and_two_rejections() {
        let mut store = MemoryStore::default();
        let mut trace = EncodeTrace::default();
        for i in 0..6 {
            trace.record(&mut store, write(&format!("k{i}"), "v"));
        }
        assert_eq!(store.len(), 4);
        assert_eq!(trace.count(&Outcome::RejectedFull), 2);
        assert_eq!(trace.replay(4), store);
    }

    #[test]
    fn serialization_keeps_order_and_escapes() {
        let mut s = MemoryStore::default();
        assert_eq!(s.serialize_contents(), "{}");
        s.write_memory("digits 1-3", "6 7 2");
        s.write_memory("a\"b", "x");
        assert_eq!(s.serialize_contents(), r#"{"digits 1-3": "6 7 2", "a\"b": "x"}"#);
    }

    fn op() -> impl Strategy<Value = ToolCall> {
        prop_oneof![
            ("[a-f]", "[a-z ]{0,8}").prop_map(|(k, v)| write(&k, &v)),
            "[a-f]".prop_map(|k| delete(&k)),
        ]
    }

    proptest! {
        #[test]
        fn trace_invariants(ops in proptest::collection::vec(op(), 0..60), cap in 1usize..6) {
            let mut store = MemoryStore::new(cap);
            let mut trace = EncodeTrace::default();
            for call in ops {
                trace.record(&mut store, call);
                prop_assert!(store.len() <= cap);
            }
            prop_assert!(trace.max_size() <= cap);
            prop_assert_eq!(trace.replay(cap), store);
        }
    }
}
