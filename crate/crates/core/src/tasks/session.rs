//! `TaskSession`: a seeded, pregenerated schedule driven one event at a time.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::TaskConfig;
use crate::metrics::text::{free_recall_score, Embedder, TfEmbedder};
use crate::response::{OldNew, ParsedResponse, ResponseSpec, SameDiff};
use crate::rng::substream;
use crate::stimulus::{PackItem, Stimulus, StimulusKind, StimulusPack};
use crate::task::{TaskId, TaskScore};
use crate::transcript::{Clock, EventType, ResponseRecord, StartInfo, TranscriptEvent, VirtualClock};

use super::craft::gen_craft;
use super::generators::{
    gen_digits, gen_nback_stream, gen_variable_statements, gen_word_stream, NbackLabel,
    VariableStep, CITIES, PEOPLE,
};
use super::lexicon::lexicon;
use super::map::gen_map;
use super::scoring::score_event_log;
use super::{Expected, McqItem, TaskError, TrialMeta};

/// What the participant must answer at an ask step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskSpec {
    pub spec: ResponseSpec,
    pub expected: Expected,
    pub meta: TrialMeta,
    /// Memory load of the question: sequence length, n, active bindings,
    /// or the number of roads or rules studied.
    pub load: usize,
    /// Practice questions give immediate feedback and are not scored.
    pub practice: bool,
}

/// One scheduled step: a presentation, or a question when `ask` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub stimulus: Stimulus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ask: Option<AskSpec>,
    /// Stop-rule unit: span length, or variable-mapping attempt.
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "body", rename_all = "snake_case")]
pub enum Event {
    Show(Stimulus),
    Ask(Stimulus),
    Done(TaskScore),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Presenting,
    AwaitingResponse,
    Finished,
}

pub struct SessionBuilder {
    config: TaskConfig,
    pack: Option<StimulusPack>,
    session_id: Option<String>,
    participant_id: String,
    participant_info: Value,
    clock: Arc<dyn Clock>,
    embedder: Arc<dyn Embedder>,
}

impl SessionBuilder {
    pub fn new(config: TaskConfig) -> Self {
        SessionBuilder {
            config,
            pack: None,
            session_id: None,
            participant_id: "anonymous".into(),
            participant_info: Value::Null,
            clock: Arc::new(VirtualClock::default()),
            embedder: Arc::new(TfEmbedder),
        }
    }

    /// Supplies the pack directly instead of loading `config.stimulus_pack`.
    pub fn pack(mut self, pack: StimulusPack) -> Self {
        self.pack = Some(pack);
        self
    }

    pub fn session_id(mut self, id: impl Into<String>) -> Self {
        self.session_id = Some(id.into());
        self
    }

    pub fn participant(mut self, id: impl Into<String>, info: Value) -> Self {
        self.participant_id = id.into();
        self.participant_info = info;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn build(self) -> Result<TaskSession, TaskError> {
        let config = self.config;
        config.validate()?;
        let task = config.task;
        let pack = if task.needs_stimulus_pack() {
            let pack = match self.pack {
                Some(p) => p,
                None => match &config.stimulus_pack {
                    Some(path) => StimulusPack::load(path)?,
                    None => return Err(TaskError::MissingStimulusPack),
                },
            };
            pack.expect_task(task)?;
            pack.validate()?;
            Some(pack)
        } else {
            None
        };
        let (steps, item) = build_schedule(&config, pack.as_ref())?;
        let session_id = self
            .session_id
            .unwrap_or_else(|| format!("{}-{}", task, config.seed));
        let start_ms = self.clock.now_ms();
        let mut session = TaskSession {
            session_id,
            participant_id: self.participant_id,
            config: config.clone(),
            steps,
            cursor: 0,
            phase: Phase::Presenting,
            events: Vec::new(),
            clock: self.clock,
            start_ms,
            embedder: self.embedder,
            strikes: 0,
            span_results: Vec::new(),
            answered: 0,
            score: None,
        };
        let start = StartInfo {
            phase: "start".into(),
            config,
            pack_id: pack.as_ref().map(|p| p.pack_id.clone()),
            pack_checksum: pack.as_ref().map(|p| p.checksum.clone()),
            item_id: item.map(|i| i.id.clone()),
            participant: self.participant_info,
        };
        let payload = serde_json::to_value(start).expect("start info serializes");
        session.log(EventType::Timing, 0, payload);
        Ok(session)
    }
}

/// One participant's run through one task.
pub struct TaskSession {
    session_id: String,
    participant_id: String,
    config: TaskConfig,
    steps: Vec<Step>,
    cursor: usize,
    phase: Phase,
    events: Vec<TranscriptEvent>,
    clock: Arc<dyn Clock>,
    start_ms: u64,
    embedder: Arc<dyn Embedder>,
    strikes: usize,
    span_results: Vec<(usize, bool)>,
    answered: usize,
    score: Option<TaskScore>,
}

impl std::fmt::Debug for TaskSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskSession")
            .field("session_id", &self.session_id)
            .field("task", &self.config.task)
            .field("cursor", &self.cursor)
            .field("phase", &self.phase)
            .finish()
    }
}

impl TaskSession {
    /// Session with default ids, a virtual clock, and the offline embedder.
    pub fn create(config: TaskConfig) -> Result<Self, TaskError> {
        SessionBuilder::new(config).build()
    }

    pub fn task(&self) -> TaskId {
        self.config.task
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// Full pregenerated schedule, including answer keys.
    pub fn schedule(&self) -> &[Step] {
        &self.steps
    }

    /// Canonical JSON of the schedule; equal configs give equal bytes.
    pub fn schedule_json(&self) -> String {
        serde_json::to_string(&self.steps).expect("schedule serializes")
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn strikes(&self) -> usize {
        self.strikes
    }

    /// Number of questions answered so far.
    pub fn trial_index(&self) -> usize {
        self.answered
    }

    pub fn score(&self) -> Option<TaskScore> {
        self.score
    }

    /// The question awaiting a response, with its key.
    pub fn pending(&self) -> Option<&Step> {
        match self.phase {
            Phase::AwaitingResponse => self.steps.get(self.cursor),
            _ => None,
        }
    }

    pub fn next_event(&mut self) -> Result<Event, TaskError> {
        match self.phase {
            Phase::AwaitingResponse => return Err(TaskError::AwaitingResponse),
            Phase::Finished => return Err(TaskError::SessionFinished),
            Phase::Presenting => {}
        }
        let Some(step) = self.steps.get(self.cursor).cloned() else {
            return self.finish();
        };
        let trial = step.stimulus.trial;
        match &step.ask {
            None => {
                self.log(EventType::Shown, trial, json!({ "stimulus": step.stimulus }));
                let p = &self.config.params;
                let shown_for = step.stimulus.duration_ms.unwrap_or(p.item_ms + p.gap_ms);
                self.clock.on_presented(shown_for);
                self.cursor += 1;
                Ok(Event::Show(step.stimulus))
            }
            Some(ask) => {
                self.log(
                    EventType::Asked,
                    trial,
                    json!({ "stimulus": step.stimulus, "spec": ask.spec }),
                );
                self.phase = Phase::AwaitingResponse;
                Ok(Event::Ask(step.stimulus))
            }
        }
    }

    pub fn submit_response(&mut self, response: ParsedResponse) -> Result<Ack, TaskError> {
        self.submit_detailed(response, None, Vec::new())
    }

    /// Submits a response along with the raw text and any model exchanges
    /// that produced it; both are kept in the transcript.
    pub fn submit_detailed(
        &mut self,
        response: ParsedResponse,
        raw: Option<String>,
        exchanges: Vec<Value>,
    ) -> Result<Ack, TaskError> {
        let step = self.check_pending(&response)?.clone();
        let ask = step.ask.as_ref().expect("pending step is a question");
        let judged = ask.expected.judge(&response);
        let mut record = ResponseRecord {
            response,
            raw,
            correct: judged,
            expected: ask.expected.clone(),
            meta: ask.meta.clone(),
            similarity: None,
            bleu: None,
            late: false,
            exchanges,
        };
        if let Expected::FreeText(reference) = &ask.expected {
            let text = match &record.response {
                ParsedResponse::FreeText(t) => t.as_str(),
                _ => "",
            };
            let fr = free_recall_score(text, reference, self.embedder.as_ref());
            record.similarity = Some(fr.similarity);
            record.bleu = Some(fr.bleu);
        }
        let correct = record.correct.unwrap_or(false);
        let payload = serde_json::to_value(&record).expect("record serializes");
        self.log(EventType::Responded, step.stimulus.trial, payload);
        self.answered += 1;
        self.cursor += 1;
        self.phase = Phase::Presenting;
        self.apply_stop_rules(&ask.meta, correct);
        Ok(Ack {
            correct: ask.practice.then_some(correct),
        })
    }

    /// Records a response that arrived after a deadline. It is kept in the
    /// transcript with a violation flag and never scored; the session does
    /// not advance.
    pub fn record_late(&mut self, response: ParsedResponse, raw: Option<String>) -> Result<(), TaskError> {
        let step = self.check_pending(&response)?.clone();
        let ask = step.ask.as_ref().expect("pending step is a question");
        let record = ResponseRecord {
            response,
            raw,
            correct: None,
            expected: ask.expected.clone(),
            meta: ask.meta.clone(),
            similarity: None,
            bleu: None,
            late: true,
            exchanges: Vec::new(),
        };
        let trial = step.stimulus.trial;
        self.log(EventType::Responded, trial, serde_json::to_value(&record).expect("record serializes"));
        self.log(EventType::Timing, trial, json!({ "phase": "deadline_violation" }));
        Ok(())
    }

    /// Appends a free-form `timing` event.
    pub fn log_timing(&mut self, payload: Value) {
        let trial = self
            .steps
            .get(self.cursor.min(self.steps.len().saturating_sub(1)))
            .map_or(0, |s| s.stimulus.trial);
        self.log(EventType::Timing, trial, payload);
    }

    fn check_pending(&self, response: &ParsedResponse) -> Result<&Step, TaskError> {
        match self.phase {
            Phase::Finished => return Err(TaskError::SessionFinished),
            Phase::Presenting => return Err(TaskError::WrongPhase),
            Phase::AwaitingResponse => {}
        }
        let step = &self.steps[self.cursor];
        let ask = step.ask.as_ref().expect("pending step is a question");
        check_kind(&ask.spec, response)?;
        Ok(step)
    }

    fn apply_stop_rules(&mut self, meta: &TrialMeta, correct: bool) {
        match *meta {
            TrialMeta::Span { length, .. } => {
                self.span_results.push((length, correct));
                let at_length: Vec<bool> = self
                    .span_results
                    .iter()
                    .filter(|(l, _)| *l == length)
                    .map(|(_, c)| *c)
                    .collect();
                if at_length.len() == 2 && at_length.iter().all(|c| !c) {
                    self.cursor = self.steps.len();
                }
            }
            TrialMeta::Word { .. } => {
                if !correct {
                    self.strikes += 1;
                    if self.strikes == 3 {
                        self.cursor = self.steps.len();
                    }
                }
            }
            TrialMeta::Variable { attempt, .. } => {
                let attempt_over = self.steps.get(self.cursor).is_none_or(|s| s.segment != attempt);
                if !correct {
                    self.cursor = self
                        .steps
                        .iter()
                        .position(|s| s.segment > attempt)
                        .unwrap_or(self.steps.len());
                } else if attempt_over {
                    // a clean attempt already reaches the maximum
                    self.cursor = self.steps.len();
                }
            }
            _ => {}
        }
    }

    fn finish(&mut self) -> Result<Event, TaskError> {
        let score = score_event_log(&self.events)?;
        let trial = self.steps.last().map_or(0, |s| s.stimulus.trial);
        self.log(EventType::Scored, trial, json!({ "score": score }));
        self.phase = Phase::Finished;
        self.score = Some(score);
        Ok(Event::Done(score))
    }

    fn log(&mut self, event_type: EventType, trial: u32, payload: Value) {
        let now = self.clock.now_ms().saturating_sub(self.start_ms);
        let t_ms = self.events.last().map_or(now, |e| now.max(e.t_ms));
        self.events.push(TranscriptEvent {
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            task: self.config.task,
            trial,
            event_type,
            payload,
            t_ms,
        });
    }
}

fn check_kind(spec: &ResponseSpec, response: &ParsedResponse) -> Result<(), TaskError> {
    let Some(kind) = response.kind() else {
        // unparseable answers are accepted and scored incorrect
        return Ok(());
    };
    if kind != spec.kind() {
        return Err(TaskError::TypeMismatch(format!(
            "expected {:?}, got {kind:?}",
            spec.kind()
        )));
    }
    match (spec, response) {
        (ResponseSpec::OptionLetter { n_options }, r) => match r.option_index() {
            Some(i) if i < *n_options => Ok(()),
            _ => Err(TaskError::TypeMismatch(format!(
                "option outside A-{}",
                (b'A' + *n_options as u8 - 1) as char
            ))),
        },
        (_, ParsedResponse::Digits(d)) if d.iter().any(|x| *x > 9) => {
            Err(TaskError::TypeMismatch("digit outside 0-9".into()))
        }
        _ => Ok(()),
    }
}

fn ask(stimulus: Stimulus, segment: usize, spec: ResponseSpec, expected: Expected, meta: TrialMeta, load: usize) -> Step {
    Step {
        stimulus,
        ask: Some(AskSpec {
            spec,
            expected,
            meta,
            load,
            practice: false,
        }),
        segment,
    }
}

fn show(stimulus: Stimulus, segment: usize) -> Step {
    Step {
        stimulus,
        ask: None,
        segment,
    }
}

fn mcq_steps(items: &[McqItem], trial: u32, load: usize, out: &mut Vec<Step>) {
    for (q, item) in items.iter().enumerate() {
        out.push(ask(
            Stimulus::question(item.prompt.clone(), item.options.clone(), trial),
            trial as usize,
            ResponseSpec::OptionLetter {
                n_options: item.options.len(),
            },
            Expected::Option(item.answer_index),
            TrialMeta::Mcq {
                trial: trial as usize,
                question: q,
            },
            load,
        ));
    }
}

/// Pregenerates every step of the task from the config seed.
fn build_schedule<'p>(
    config: &TaskConfig,
    pack: Option<&'p StimulusPack>,
) -> Result<(Vec<Step>, Option<&'p PackItem>), TaskError> {
    let task = config.task;
    let p = &config.params;
    let mut rng = substream(config.seed, &format!("schedule/{task}"));
    let mut steps = Vec::new();
    let mut item = None;
    match task {
        TaskId::DigitSpan | TaskId::ReverseDigitSpan => {
            let reverse = task == TaskId::ReverseDigitSpan;
            let prompt = if reverse {
                "Type the digits in reverse order, from last to first."
            } else {
                "Type the digits in the same order they appeared."
            };
            let mut trial = 0u32;
            for length in p.start_span..=p.max_span {
                for index in 0..2 {
                    let digits = gen_digits(length, &mut rng);
                    for d in &digits {
                        steps.push(show(Stimulus::item(StimulusKind::Digit, d.to_string(), trial), length));
                    }
                    let mut truth = digits;
                    if reverse {
                        truth.reverse();
                    }
                    steps.push(ask(
                        Stimulus::question(prompt, Vec::new(), trial),
                        length,
                        ResponseSpec::Digits,
                        Expected::Digits(truth),
                        TrialMeta::Span { length, index },
                        length,
                    ));
                    trial += 1;
                }
            }
        }
        TaskId::NBack => {
            let mut blocks = Vec::new();
            if p.include_practice {
                blocks.push((gen_nback_stream(1, p.practice_length, p.match_rate, &mut rng)?, true));
            }
            for &n in &p.nback_levels {
                blocks.push((gen_nback_stream(n, p.block_length, p.match_rate, &mut rng)?, false));
            }
            for (block, (stream, practice)) in blocks.into_iter().enumerate() {
                let trial = block as u32;
                let n = stream.n;
                for (position, (&letter, label)) in stream.letters.iter().zip(&stream.labels).enumerate() {
                    steps.push(show(Stimulus::item(StimulusKind::Letter, letter.to_string(), trial), block));
                    let truth = match label {
                        NbackLabel::Ineligible => continue,
                        NbackLabel::Same => SameDiff::Same,
                        NbackLabel::Different => SameDiff::Different,
                    };
                    let back = if n == 1 { "one letter back".to_string() } else { format!("{n} letters back") };
                    let mut step = ask(
                        Stimulus::question(
                            format!("Current letter: {letter}. Is it the same as the letter {back}? Answer same or different."),
                            Vec::new(),
                            trial,
                        ),
                        block,
                        ResponseSpec::SameDiff,
                        Expected::SameDiff(truth),
                        TrialMeta::NBack { block, n, position, practice },
                        n,
                    );
                    if let Some(a) = step.ask.as_mut() {
                        a.practice = practice;
                    }
                    steps.push(step);
                }
            }
        }
        TaskId::WordRecognition => {
            let stream = gen_word_stream(lexicon(), p.word_cap, p.repeat_prob, &mut rng)?;
            let mut distinct = 0;
            for (position, (word, old)) in stream.words.iter().zip(&stream.old).enumerate() {
                if !old {
                    distinct += 1;
                }
                steps.push(show(Stimulus::item(StimulusKind::Word, word.clone(), 0), 0));
                steps.push(ask(
                    Stimulus::question(
                        format!("Has the word \"{word}\" appeared earlier in the list? Answer old or new."),
                        Vec::new(),
                        0,
                    ),
                    0,
                    ResponseSpec::OldNew,
                    Expected::OldNew(if *old { OldNew::Old } else { OldNew::New }),
                    TrialMeta::Word { position },
                    distinct,
                ));
            }
        }
        TaskId::VariableMapping => {
            let cities: Vec<String> = CITIES.iter().map(|c| c.to_string()).collect();
            for attempt in 0..p.attempts {
                let schedule = gen_variable_statements(p.max_bindings, &PEOPLE, &CITIES, p.move_prob, &mut rng)?;
                let trial = attempt as u32;
                let mut query = 0;
                for s in schedule.steps {
                    match s {
                        VariableStep::Statement { text, .. } => {
                            steps.push(show(Stimulus::item(StimulusKind::Statement, text, trial), attempt));
                        }
                        VariableStep::Query { person, truth, active } => {
                            steps.push(ask(
                                Stimulus::question(format!("Where does {person} live?"), Vec::new(), trial),
                                attempt,
                                ResponseSpec::City { cities: cities.clone() },
                                Expected::City(truth),
                                TrialMeta::Variable { attempt, query, active },
                                active,
                            ));
                            query += 1;
                        }
                    }
                }
            }
        }
        TaskId::FactualQa | TaskId::NarrativeQa | TaskId::NarrativeFreeRecall => {
            let pack = pack.ok_or(TaskError::MissingStimulusPack)?;
            let chosen = &pack.items[rng.gen_range(0..pack.items.len())];
            item = Some(chosen);
            if task == TaskId::NarrativeFreeRecall {
                steps.push(show(Stimulus::block(StimulusKind::Story, chosen.text.clone(), p.recall_reading_ms, 0), 0));
                steps.push(ask(
                    Stimulus::question("Recall the story as precisely as possible.", Vec::new(), 0),
                    0,
                    ResponseSpec::FreeText,
                    Expected::FreeText(chosen.reference().to_string()),
                    TrialMeta::FreeRecall,
                    0,
                ));
            } else {
                let kind = if task == TaskId::FactualQa { StimulusKind::Passage } else { StimulusKind::Story };
                steps.push(show(Stimulus::block(kind, chosen.text.clone(), p.reading_ms, 0), 0));
                let items: Vec<McqItem> = chosen
                    .questions
                    .iter()
                    .map(|q| McqItem {
                        prompt: q.prompt.clone(),
                        options: q.options.clone(),
                        answer_index: q.answer_index,
                    })
                    .collect();
                mcq_steps(&items, 0, items.len(), &mut steps);
            }
        }
        TaskId::MapTask => {
            for t in 0..p.trial_counts {
                let level = p.map_levels[t % p.map_levels.len()];
                let map = gen_map(level, p.questions_per_trial, p.options_per_question, &mut rng)?;
                let trial = t as u32;
                steps.push(show(Stimulus::block(StimulusKind::MapDescription, map.description(), p.study_ms, trial), t));
                mcq_steps(&map.mcq_items(), trial, map.edges.len(), &mut steps);
            }
        }
        TaskId::CraftTask => {
            for t in 0..p.trial_counts {
                let level = p.craft_levels[t % p.craft_levels.len()];
                let craft = gen_craft(level, p.questions_per_trial, p.options_per_question, &mut rng)?;
                let trial = t as u32;
                steps.push(show(Stimulus::block(StimulusKind::CraftRules, craft.description(), p.study_ms, trial), t));
                mcq_steps(&craft.mcq_items(), trial, craft.rules.len(), &mut steps);
            }
        }
    }
    Ok((steps, item))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::fixtures;

    fn run_perfect(session: &mut TaskSession) -> TaskScore {
        loop {
            match session.next_event().unwrap() {
                Event::Show(_) => {}
                Event::Ask(_) => {
                    let r = session.pending().unwrap().ask.as_ref().unwrap().expected.perfect_response();
                    session.submit_response(r).unwrap();
                }
                Event::Done(s) => return s,
            }
        }
    }

    #[test]
    fn equal_configs_give_identical_schedules() {
        let a = TaskSession::create(TaskConfig::new(TaskId::DigitSpan, 7)).unwrap();
        let b = TaskSession::create(TaskConfig::new(TaskId::DigitSpan, 7)).unwrap();
        assert_eq!(a.schedule_json(), b.schedule_json());
        let c = TaskSession::create(TaskConfig::new(TaskId::DigitSpan, 8)).unwrap();
        assert_ne!(a.schedule_json(), c.schedule_json());
    }

    #[test]
    fn text_tasks_require_a_pack() {
        let err = TaskSession::create(TaskConfig::new(TaskId::FactualQa, 1)).unwrap_err();
        assert!(matches!(err, TaskError::MissingStimulusPack));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = TaskConfig::new(TaskId::DigitSpan, 1);
        cfg.params.start_span = 0;
        assert!(matches!(TaskSession::create(cfg), Err(TaskError::InvalidConfig(_))));
    }

    #[test]
    fn nback_has_three_scored_blocks() {
        let s = TaskSession::create(TaskConfig::new(TaskId::NBack, 3)).unwrap();
        let blocks: std::collections::BTreeSet<_> = s
            .schedule()
            .iter()
            .filter_map(|st| st.ask.as_ref())
            .filter(|a| !a.practice)
            .map(|a| match a.meta {
                TrialMeta::NBack { block, .. } => block,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(blocks.len(), 3);
    }

    #[test]
    fn digit_span_starts_with_a_digit() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::DigitSpan, 1)).unwrap();
        match s.next_event().unwrap() {
            Event::Show(st) => assert_eq!(st.kind, StimulusKind::Digit),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn awaiting_and_phase_errors() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::WordRecognition, 1)).unwrap();
        assert!(matches!(
            s.submit_response(ParsedResponse::OldNew(OldNew::New)),
            Err(TaskError::WrongPhase)
        ));
        s.next_event().unwrap();
        s.next_event().unwrap();
        assert!(matches!(s.next_event(), Err(TaskError::AwaitingResponse)));
        assert!(matches!(
            s.submit_response(ParsedResponse::Digits(vec![1])),
            Err(TaskError::TypeMismatch(_))
        ));
    }

    #[test]
    fn old_on_first_word_is_a_strike() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::WordRecognition, 1)).unwrap();
        s.next_event().unwrap();
        s.next_event().unwrap();
        let ack = s.submit_response(ParsedResponse::OldNew(OldNew::Old)).unwrap();
        assert_eq!(ack.correct, None);
        assert_eq!(s.strikes(), 1);
        let rec: ResponseRecord = serde_json::from_value(s.events().last().unwrap().payload.clone()).unwrap();
        assert_eq!(rec.correct, Some(false));
    }

    #[test]
    fn third_strike_ends_word_recognition() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::WordRecognition, 4)).unwrap();
        let mut shown_after_third = 0;
        loop {
            match s.next_event().unwrap() {
                Event::Show(_) if s.strikes() == 3 => shown_after_third += 1,
                Event::Show(_) => {}
                Event::Ask(_) => {
                    let truth = s.pending().unwrap().ask.as_ref().unwrap().expected.clone();
                    let wrong = match truth {
                        Expected::OldNew(OldNew::Old) => OldNew::New,
                        _ => OldNew::Old,
                    };
                    s.submit_response(ParsedResponse::OldNew(wrong)).unwrap();
                }
                Event::Done(score) => {
                    assert_eq!(score.value, 0.0);
                    break;
                }
            }
        }
        assert_eq!(shown_after_third, 0);
        assert!(matches!(s.next_event(), Err(TaskError::SessionFinished)));
    }

    #[test]
    fn mcq_letter_out_of_range_is_type_mismatch() {
        let pack = fixtures::qa_pack(TaskId::FactualQa);
        let mut s = SessionBuilder::new(TaskConfig::new(TaskId::FactualQa, 1)).pack(pack).build().unwrap();
        match s.next_event().unwrap() {
            Event::Show(st) => assert_eq!(st.duration_ms, Some(180_000)),
            other => panic!("{other:?}"),
        }
        s.next_event().unwrap();
        assert!(matches!(
            s.submit_response(ParsedResponse::OptionLetter('E')),
            Err(TaskError::TypeMismatch(_))
        ));
        s.submit_response(ParsedResponse::OptionLetter('A')).unwrap();
    }

    #[test]
    fn perfect_responses_reach_every_ceiling() {
        for task in TaskId::ALL {
            let mut b = SessionBuilder::new(TaskConfig::new(task, 11));
            if task == TaskId::NarrativeFreeRecall {
                b = b.pack(fixtures::recall_pack());
            } else if task.needs_stimulus_pack() {
                b = b.pack(fixtures::qa_pack(task));
            }
            let mut s = b.build().unwrap();
            let score = run_perfect(&mut s);
            assert!((score.value - score.max).abs() < 1e-9, "{task}: {score:?}");
            let scored = s.events().iter().filter(|e| e.event_type == EventType::Scored).count();
            assert_eq!(scored, 1);
            assert_eq!(score_event_log(s.events()).unwrap(), score);
        }
    }

    #[test]
    fn practice_gives_feedback_and_is_not_scored() {
        let mut cfg = TaskConfig::new(TaskId::NBack, 5);
        cfg.params.include_practice = true;
        let mut s = TaskSession::create(cfg).unwrap();
        let mut feedback = 0;
        loop {
            match s.next_event().unwrap() {
                Event::Show(_) => {}
                Event::Ask(_) => {
                    let a = s.pending().unwrap().ask.clone().unwrap();
                    let r = if a.practice {
                        ParsedResponse::Unparseable("?".into())
                    } else {
                        a.expected.perfect_response()
                    };
                    if s.submit_response(r).unwrap().correct.is_some() {
                        feedback += 1;
                    }
                }
                Event::Done(score) => {
                    assert_eq!(score.value, 1.0);
                    break;
                }
            }
        }
        assert_eq!(feedback, 9);
    }

    #[test]
    fn variable_mapping_wrong_answer_jumps_to_next_attempt() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::VariableMapping, 2)).unwrap();
        let mut attempts_seen = Vec::new();
        loop {
            match s.next_event().unwrap() {
                Event::Show(st) => attempts_seen.push(st.trial),
                Event::Ask(_) => {
                    s.submit_response(ParsedResponse::City("Nowhere".into())).unwrap();
                }
                Event::Done(score) => {
                    assert_eq!(score.value, 0.0);
                    break;
                }
            }
        }
        attempts_seen.dedup();
        assert_eq!(attempts_seen, vec![0, 1, 2]);
        assert_eq!(s.trial_index(), 3);
    }

    #[test]
    fn virtual_time_accumulates_presentation() {
        let mut s = TaskSession::create(TaskConfig::new(TaskId::DigitSpan, 1)).unwrap();
        s.next_event().unwrap();
        s.next_event().unwrap();
        assert_eq!(s.events().last().unwrap().t_ms, 1_500);
    }
}
