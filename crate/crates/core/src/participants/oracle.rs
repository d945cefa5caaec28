//! Scripted participants that answer from the key.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Participant, ParticipantError, Reply};
use crate::response::{OldNew, ParsedResponse, SameDiff};
use crate::rng::{substream, SimRng};
use crate::stimulus::{Stimulus, StimulusKind};
use crate::tasks::generators::CITIES;
use crate::tasks::{AskSpec, Expected, TrialMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "profile", content = "capacity", rename_all = "snake_case")]
pub enum OracleProfile {
    Perfect,
    AlwaysWrong,
    /// Holds at most `c` items: digits, letters back, words, bindings,
    /// roads or rules, sentences.
    Capacity(usize),
}

impl fmt::Display for OracleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleProfile::Perfect => f.write_str("perfect"),
            OracleProfile::AlwaysWrong => f.write_str("always_wrong"),
            OracleProfile::Capacity(c) => write!(f, "capacity:{c}"),
        }
    }
}

impl FromStr for OracleProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "perfect" => Ok(OracleProfile::Perfect),
            "always_wrong" => Ok(OracleProfile::AlwaysWrong),
            _ => s
                .strip_prefix("capacity:")
                .and_then(|c| c.parse().ok())
                .map(OracleProfile::Capacity)
                .ok_or_else(|| format!("unknown oracle profile {s:?}; use perfect, always_wrong or capacity:N")),
        }
    }
}

/// Splits prose into sentences at `.`, `!` or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = cur.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            cur.clear();
        }
    }
    let s = cur.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

pub struct OracleParticipant {
    profile: OracleProfile,
    rng: SimRng,
    last_word: Option<String>,
    words: VecDeque<String>,
    passage: Vec<String>,
    retained: Option<Vec<String>>,
}

impl OracleParticipant {
    pub fn new(profile: OracleProfile, seed: u64) -> Self {
        OracleParticipant {
            profile,
            rng: substream(seed, &format!("oracle/{profile}")),
            last_word: None,
            words: VecDeque::new(),
            passage: Vec::new(),
            retained: None,
        }
    }

    fn wrong(&mut self, expected: &Expected, ask: &AskSpec) -> ParsedResponse {
        match expected {
            Expected::Digits(d) => ParsedResponse::Digits(d.iter().map(|x| (x + 1) % 10).collect()),
            Expected::SameDiff(SameDiff::Same) => ParsedResponse::SameDiff(SameDiff::Different),
            Expected::SameDiff(SameDiff::Different) => ParsedResponse::SameDiff(SameDiff::Same),
            Expected::OldNew(OldNew::Old) => ParsedResponse::OldNew(OldNew::New),
            Expected::OldNew(OldNew::New) => ParsedResponse::OldNew(OldNew::Old),
            Expected::City(c) => {
                let others: Vec<&&str> = CITIES.iter().filter(|x| !x.eq_ignore_ascii_case(c)).collect();
                ParsedResponse::City(others.choose(&mut self.rng).expect("several cities").to_string())
            }
            Expected::Option(i) => {
                let n = option_count(ask);
                ParsedResponse::OptionLetter((b'A' + ((i + 1) % n) as u8) as char)
            }
            Expected::FreeText(_) => ParsedResponse::FreeText(String::new()),
        }
    }

    fn guess_option(&mut self, ask: &AskSpec) -> ParsedResponse {
        let i = self.rng.gen_range(0..option_count(ask));
        ParsedResponse::OptionLetter((b'A' + i as u8) as char)
    }

    fn capacity(&mut self, c: usize, question: &Stimulus, ask: &AskSpec) -> ParsedResponse {
        let expected = &ask.expected;
        match (&ask.meta, expected) {
            (TrialMeta::Span { .. }, Expected::Digits(truth)) => {
                if truth.len() <= c {
                    return expected.perfect_response();
                }
                let mut out = truth[..c].to_vec();
                for &t in &truth[c..] {
                    // noise never lands on the true digit
                    let d = (t + self.rng.gen_range(1..10)) % 10;
                    out.push(d);
                }
                ParsedResponse::Digits(out)
            }
            (TrialMeta::NBack { n, .. }, _) => {
                if *n <= c {
                    expected.perfect_response()
                } else if self.rng.gen_bool(0.5) {
                    ParsedResponse::SameDiff(SameDiff::Same)
                } else {
                    ParsedResponse::SameDiff(SameDiff::Different)
                }
            }
            (TrialMeta::Word { .. }, _) => {
                let word = self.last_word.clone().unwrap_or_default();
                let old = self.words.contains(&word);
                self.words.retain(|w| *w != word);
                self.words.push_front(word);
                self.words.truncate(c);
                ParsedResponse::OldNew(if old { OldNew::Old } else { OldNew::New })
            }
            (TrialMeta::Variable { active, .. }, _) => {
                if *active <= c {
                    expected.perfect_response()
                } else {
                    self.wrong(expected, ask)
                }
            }
            (TrialMeta::Mcq { .. }, Expected::Option(i)) => {
                if self.passage.is_empty() {
                    // map and craft: the whole structure fits or it does not
                    return if ask.load <= c { expected.perfect_response() } else { self.guess_option(ask) };
                }
                if self.retained.is_none() {
                    let keep = c.min(self.passage.len());
                    self.retained = Some(self.passage.choose_multiple(&mut self.rng, keep).cloned().collect());
                }
                let answer = question.options.get(*i).map(|s| s.to_lowercase()).unwrap_or_default();
                let retained = self.retained.as_deref().unwrap_or_default();
                if !answer.is_empty() && retained.iter().any(|s| s.to_lowercase().contains(&answer)) {
                    expected.perfect_response()
                } else {
                    self.guess_option(ask)
                }
            }
            (TrialMeta::FreeRecall, _) => {
                ParsedResponse::FreeText(self.passage.iter().take(c).cloned().collect::<Vec<_>>().join(" "))
            }
            _ => self.wrong(expected, ask),
        }
    }
}

fn option_count(ask: &AskSpec) -> usize {
    match ask.spec {
        crate::response::ResponseSpec::OptionLetter { n_options } => n_options.max(1),
        _ => 1,
    }
}

impl Participant for OracleParticipant {
    fn describe(&self) -> Value {
        json!({ "kind": "oracle", "profile": self.profile.to_string() })
    }

    fn observe(&mut self, stimulus: &Stimulus) -> Result<(), ParticipantError> {
        let OracleProfile::Capacity(_) = self.profile else {
            return Ok(());
        };
        match stimulus.kind {
            StimulusKind::Word => self.last_word = Some(stimulus.payload.clone()),
            StimulusKind::Passage | StimulusKind::Story => {
                self.passage = split_sentences(&stimulus.payload);
                self.retained = None;
            }
            _ => {}
        }
        Ok(())
    }

    fn respond(&mut self, question: &Stimulus, ask: &AskSpec) -> Result<Reply, ParticipantError> {
        let response = match self.profile {
            OracleProfile::Perfect => ask.expected.perfect_response(),
            OracleProfile::AlwaysWrong => self.wrong(&ask.expected, ask),
            OracleProfile::Capacity(c) => self.capacity(c, question, ask),
        };
        Ok(Reply::plain(response))
    }
}
