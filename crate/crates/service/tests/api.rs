use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use memsim_core::participants::replay_transcript;
use memsim_core::stimulus::builtin_pack;
use memsim_core::tasks::scoring::score_event_log;
use memsim_core::transcript::{group_transcripts, EventType, ManualClock, TranscriptEvent};
use memsim_core::TaskId;
use memsim_service::{router, ServiceConfig};

struct Harness {
    app: Router,
    clock: Arc<ManualClock>,
    dir: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::default());
        let mut cfg = ServiceConfig::new(dir.path());
        cfg.clock = clock.clone();
        Harness { app: router(cfg), clock, dir }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or(Body::empty(), Body::from))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, text) = self.call(method, uri, body.map(|b| b.to_string())).await;
        (s, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn create(&self, body: Value) -> String {
        let (s, v) = self.json(Method::POST, "/sessions", Some(body)).await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn next(&self, id: &str) -> (StatusCode, Value) {
        self.json(Method::GET, &format!("/sessions/{id}/next"), None).await
    }

    async fn answer(&self, id: &str, text: &str) -> (StatusCode, Value) {
        self.json(Method::POST, &format!("/sessions/{id}/response"), Some(json!({ "response": text }))).await
    }

    /// Steps past shown items, answering each question with `reply`,
    /// until the session is done.
    async fn run_to_end(&self, id: &str, reply: impl Fn(&Value) -> String) -> Value {
        loop {
            let (s, v) = self.next(id).await;
            assert_eq!(s, StatusCode::OK, "{v}");
            match v["type"].as_str().unwrap() {
                "show" | "blank" => self.clock.advance(v["remaining_ms"].as_u64().unwrap()),
                "ask" => {
                    let (s, ack) = self.answer(id, &reply(&v)).await;
                    assert_eq!(s, StatusCode::OK, "{ack}");
                }
                "done" => return v,
                other => panic!("unexpected event {other}"),
            }
        }
    }

    async fn export(&self, query: &str) -> Vec<TranscriptEvent> {
        let (s, text) = self.call(Method::GET, &format!("/export{query}"), None).await;
        assert_eq!(s, StatusCode::OK);
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }
}

#[tokio::test]
async fn passage_is_timed_and_never_served_after_expiry() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p1", "seed": 4, "task": "factual_qa" })).await;
    let (s, first) = h.next(&id).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["type"], "show");
    assert_eq!(first["stimulus"]["duration_ms"], 180_000);
    assert!(first["instructions"].is_string());
    let passage = first["stimulus"]["payload"].as_str().unwrap().to_string();

    h.clock.advance(60_000);
    let (_, again) = h.next(&id).await;
    assert_eq!(again["stimulus"]["payload"], passage.as_str());
    assert_eq!(again["remaining_ms"], 120_000);

    h.clock.advance(120_000);
    for _ in 0..3 {
        let (_, v) = h.next(&id).await;
        assert_eq!(v["type"], "ask");
        assert!(!v.to_string().contains(&passage[..60]));
    }
    // every later response stays free of the passage
    loop {
        let (_, v) = h.next(&id).await;
        assert!(!v.to_string().contains(&passage[..60]));
        if v["type"] == "done" {
            break;
        }
        let (s, _) = h.answer(&id, "A").await;
        assert_eq!(s, StatusCode::OK);
    }
}

#[tokio::test]
async fn free_recall_story_gets_five_minutes() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p1", "seed": 1, "task": "narrative_free_recall" })).await;
    let (_, v) = h.next(&id).await;
    assert_eq!(v["stimulus"]["duration_ms"], 300_000);
    assert_eq!(v["stimulus"]["kind"], "story");
}

#[tokio::test]
async fn digits_have_a_server_cadence() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p1", "seed": 1, "task": "digit_span" })).await;
    let (_, v) = h.next(&id).await;
    assert_eq!(v["type"], "show");
    assert_eq!(v["remaining_ms"], 1000);
    h.clock.advance(1000);
    let (_, v) = h.next(&id).await;
    assert_eq!(v["type"], "blank");
    assert_eq!(v["remaining_ms"], 500);
    h.clock.advance(500);
    let (_, v) = h.next(&id).await;
    assert_eq!(v["type"], "show");
}

#[tokio::test]
async fn duplicate_active_session_conflicts() {
    let h = Harness::new();
    h.create(json!({ "participant_id": "p1", "task": "n_back" })).await;
    let (s, _) = h.json(Method::POST, "/sessions", Some(json!({ "participant_id": "p1", "task": "map_task" }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    h.create(json!({ "participant_id": "p2", "task": "map_task" })).await;
}

#[tokio::test]
async fn plans_are_seeded_permutations() {
    let h = Harness::new();
    let (_, a) = h.json(Method::POST, "/sessions", Some(json!({ "participant_id": "a", "seed": 5, "plan": {} }))).await;
    let (_, b) = h.json(Method::POST, "/sessions", Some(json!({ "participant_id": "b", "seed": 5, "plan": {} }))).await;
    assert_eq!(a["tasks"], b["tasks"]);
    assert_eq!(a["deadline_ms"], 3_600_000);
    let mut tasks: Vec<TaskId> = serde_json::from_value(a["tasks"].clone()).unwrap();
    tasks.sort();
    assert_eq!(tasks, TaskId::ALL.to_vec());
}

#[tokio::test]
async fn bad_requests() {
    let h = Harness::new();
    for body in [
        r#"{"participant_id": "p", "plan": {"tasks": ["n_back", "n_back"]}}"#,
        r#"{"participant_id": "p", "plan": {"tasks": []}}"#,
        r#"{"participant_id": "p", "task": "n_back", "plan": {}}"#,
        r#"{"participant_id": "p"}"#,
        r#"{"participant_id": "p", "task": "juggling"}"#,
        r#"{"participant_id": "#,
    ] {
        let (s, _) = h.call(Method::POST, "/sessions", Some(body.to_string())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
    let id = h.create(json!({ "participant_id": "p", "task": "craft_task" })).await;
    let (s, _) = h.call(Method::POST, &format!("/sessions/{id}/response"), Some("not json".into())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.next("nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = h.answer("nope", "A").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn answering_while_presenting_is_a_conflict() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p", "task": "map_task" })).await;
    let (s, _) = h.answer(&id, "A").await;
    assert_eq!(s, StatusCode::CONFLICT);
    h.next(&id).await;
    let (s, _) = h.answer(&id, "A").await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn mcq_answer_is_acknowledged_and_persisted() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p", "task": "narrative_qa", "seed": 2 })).await;
    let (_, v) = h.next(&id).await;
    h.clock.advance(v["remaining_ms"].as_u64().unwrap());
    let (_, q) = h.next(&id).await;
    assert_eq!(q["type"], "ask");
    assert_eq!(q["question"]["options"].as_array().unwrap().len(), 4);
    let (s, ack) = h.answer(&id, "B").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack, json!({ "accepted": true, "late": false }));
    let file = std::fs::read_to_string(h.dir.path().join(format!("sessions/{id}.jsonl"))).unwrap();
    assert!(file.lines().any(|l| l.contains("\"event_type\":\"responded\"")));
}

#[tokio::test]
async fn practice_gives_feedback_scored_blocks_do_not() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p", "task": "n_back", "seed": 8 })).await;
    let mut practice_acks = 0;
    let mut scored_acks = 0;
    loop {
        let (_, v) = h.next(&id).await;
        match v["type"].as_str().unwrap() {
            "show" | "blank" => h.clock.advance(v["remaining_ms"].as_u64().unwrap()),
            "ask" => {
                let (_, ack) = h.answer(&id, "different").await;
                if v["practice"] == true {
                    assert!(ack["correct"].is_boolean());
                    practice_acks += 1;
                } else {
                    assert!(ack.get("correct").is_none());
                    scored_acks += 1;
                }
            }
            _ => break,
        }
    }
    assert!(practice_acks > 0 && scored_acks > 0);
}

#[tokio::test]
async fn finished_sessions_are_gone_and_scores_match_their_logs() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p", "task": "digit_span", "seed": 3 })).await;
    let done = h.run_to_end(&id, |_| "1 2 3".into()).await;
    assert_eq!(done["expired"], false);
    let (s, _) = h.next(&id).await;
    assert_eq!(s, StatusCode::GONE);
    let (s, _) = h.answer(&id, "1").await;
    assert_eq!(s, StatusCode::GONE);
    let (s, result) = h.json(Method::GET, &format!("/sessions/{id}/result"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(result["status"], "finished");

    let events = h.export("").await;
    let scored: Vec<_> = events.iter().filter(|e| e.event_type == EventType::Scored).collect();
    assert_eq!(scored.len(), 1);
    let rescored = score_event_log(&events).unwrap();
    assert_eq!(scored[0].payload["score"]["value"], json!(rescored.value));
    assert_eq!(result["scores"][0]["value"], json!(rescored.value));
    // a new session is allowed once the old one is over
    h.create(json!({ "participant_id": "p", "task": "n_back" })).await;
}

#[tokio::test]
async fn export_filters_and_replays() {
    let h = Harness::new();
    assert!(h.export("").await.is_empty());
    let a = h.create(json!({ "participant_id": "a", "task": "digit_span", "seed": 1 })).await;
    h.run_to_end(&a, |_| "9".into()).await;
    let b = h.create(json!({ "participant_id": "b", "task": "word_recognition", "seed": 2 })).await;
    h.run_to_end(&b, |_| "new".into()).await;
    let c = h.create(json!({ "participant_id": "c", "task": "factual_qa", "seed": 3 })).await;
    h.run_to_end(&c, |q| if q["question"]["payload"].as_str().unwrap().len() % 2 == 0 { "A" } else { "C" }.into()).await;

    let digit = h.export("?task=digit_span").await;
    assert!(!digit.is_empty());
    assert!(digit.iter().all(|e| e.task == TaskId::DigitSpan));
    let (s, _) = h.call(Method::GET, "/export?task=juggling", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let all = group_transcripts(h.export("").await);
    assert_eq!(all.len(), 3);
    for t in all {
        let task = t.task().unwrap();
        let replayed = replay_transcript(&t, builtin_pack(task)).unwrap();
        assert_eq!(replayed.score(), t.recorded_score(), "{task}");
    }
}

#[tokio::test]
async fn late_answer_after_the_study_deadline_is_recorded_not_scored() {
    let h = Harness::new();
    let id = h.create(json!({ "participant_id": "p", "seed": 7, "plan": { "tasks": ["map_task"], "deadline_minutes": 60 } })).await;
    let (_, v) = h.next(&id).await;
    h.clock.advance(v["remaining_ms"].as_u64().unwrap());
    let (_, q) = h.next(&id).await;
    assert_eq!(q["type"], "ask");
    h.clock.advance(3_600_000);
    let (s, ack) = h.answer(&id, "A").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack, json!({ "accepted": false, "late": true }));
    let (s, _) = h.next(&id).await;
    assert_eq!(s, StatusCode::GONE);
    let (_, result) = h.json(Method::GET, &format!("/sessions/{id}/result"), None).await;
    assert_eq!(result["status"], "expired");
    let events = h.export("").await;
    let late: Vec<_> = events
        .iter()
        .filter(|e| e.event_type == EventType::Responded && e.payload["late"] == true)
        .collect();
    assert_eq!(late.len(), 1);
    assert!(late[0].payload.get("correct").is_none());
    assert!(events.iter().any(|e| e.payload["phase"] == "deadline_violation"));
    assert!(!events.iter().any(|e| e.event_type == EventType::Scored));
}

#[tokio::test]
async fn plan_runs_tasks_in_order() {
    let h = Harness::new();
    let (_, created) = h
        .json(Method::POST, "/sessions", Some(json!({ "participant_id": "p", "seed": 2, "plan": { "tasks": ["digit_span", "reverse_digit_span"] } })))
        .await;
    let id = created["session_id"].as_str().unwrap();
    let done = h.run_to_end(id, |_| "0".into()).await;
    let order: Vec<&str> = done["scores"].as_array().unwrap().iter().map(|s| s["task"].as_str().unwrap()).collect();
    let planned: Vec<&str> = created["tasks"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert_eq!(order, planned);
}

#[tokio::test]
async fn ui_bundle_is_mounted() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<html>ok</html>").unwrap();
    let mut cfg = ServiceConfig::new(dir.path().join("data"));
    cfg.ui_dir = Some(ui);
    let app = router(cfg);
    let resp = app
        .oneshot(Request::builder().uri("/ui/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&body[..], b"<html>ok</html>");
}
