//! Seeded stimulus generators for the procedural tasks.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TaskError;

/// Retry budget for generators that must satisfy an invariant.
pub const MAX_RETRIES: usize = 1_000;

/// N-back alphabet: eight visually distinct consonants.
pub const NBACK_ALPHABET: [char; 8] = ['B', 'C', 'D', 'F', 'G', 'H', 'K', 'L'];

pub const PEOPLE: [&str; 10] = [
    "Alice", "Ben", "Carla", "David", "Emma", "Felix", "Grace", "Henry", "Iris", "Jack",
];

pub const CITIES: [&str; 12] = [
    "New York", "Boston", "Chicago", "Denver", "Seattle", "Austin", "Miami", "Atlanta", "Phoenix",
    "Portland", "Dallas", "Houston",
];

/// A uniformly random digit sequence.
///
/// # Panics
/// If `length` is outside `1..=20`.
pub fn gen_digits<R: Rng + ?Sized>(length: usize, rng: &mut R) -> Vec<u8> {
    assert!((1..=20).contains(&length), "digit sequence length {length} outside 1..=20");
    (0..length).map(|_| rng.gen_range(0..10u8)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbackLabel {
    Ineligible,
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbackStream {
    pub n: usize,
    pub letters: Vec<char>,
    pub labels: Vec<NbackLabel>,
}

impl NbackStream {
    pub fn eligible(&self) -> usize {
        self.letters.len() - self.n
    }

    pub fn match_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == NbackLabel::Same).count()
    }
}

/// Letters for an `n`-back block whose realized match fraction lies within
/// 0.1 of `match_rate`.
pub fn gen_nback_stream<R: Rng + ?Sized>(
    n: usize,
    length: usize,
    match_rate: f64,
    rng: &mut R,
) -> Result<NbackStream, TaskError> {
    if n == 0 || length <= n {
        return Err(TaskError::GenerationFailed(format!(
            "n-back needs length > n >= 1, got n={n} length={length}"
        )));
    }
    let eligible = (length - n) as f64;
    for _ in 0..MAX_RETRIES {
        let mut letters = Vec::with_capacity(length);
        for i in 0..length {
            let letter = if i < n {
                *NBACK_ALPHABET.choose(rng).unwrap()
            } else if rng.gen_bool(match_rate) {
                letters[i - n]
            } else {
                let target = letters[i - n];
                loop {
                    let c = *NBACK_ALPHABET.choose(rng).unwrap();
                    if c != target {
                        break c;
                    }
                }
            };
            letters.push(letter);
        }
        let labels = label_nback(&letters, n);
        let stream = NbackStream { n, letters, labels };
        if (stream.match_count() as f64 / eligible - match_rate).abs() <= 0.1 {
            return Ok(stream);
        }
    }
    Err(TaskError::GenerationFailed(format!(
        "no {n}-back stream of length {length} near match rate {match_rate}"
    )))
}

/// Labels each position against the letter `n` steps back.
pub fn label_nback(letters: &[char], n: usize) -> Vec<NbackLabel> {
    (0..letters.len())
        .map(|i| {
            if i < n {
                NbackLabel::Ineligible
            } else if letters[i] == letters[i - n] {
                NbackLabel::Same
            } else {
                NbackLabel::Different
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStream {
    pub words: Vec<String>,
    /// `true` where the word already occurred earlier in the stream.
    pub old: Vec<bool>,
}

/// A continuous-recognition stream of at most `cap` words. The first three
/// items are always new; afterwards each item repeats an earlier word with
/// probability `repeat_prob`.
pub fn gen_word_stream<R: Rng + ?Sized>(
    lexicon: &[&str],
    cap: usize,
    repeat_prob: f64,
    rng: &mut R,
) -> Result<WordStream, TaskError> {
    let distinct: HashSet<&str> = lexicon.iter().copied().collect();
    if distinct.len() != lexicon.len() || lexicon.len() < cap {
        return Err(TaskError::LexiconTooSmall {
            needed: cap,
            available: distinct.len(),
        });
    }
    let fresh: Vec<&str> = lexicon.choose_multiple(rng, cap).copied().collect();
    let mut fresh = fresh.into_iter();
    let mut shown: Vec<&str> = Vec::new();
    let mut words = Vec::with_capacity(cap);
    let mut old = Vec::with_capacity(cap);
    for i in 0..cap {
        let repeat = i >= 3 && rng.gen_bool(repeat_prob);
        let word = if repeat {
            *shown.choose(rng).unwrap()
        } else {
            let w = fresh.next().expect("cap fresh words were drawn");
            shown.push(w);
            w
        };
        old.push(repeat);
        words.push(word.to_string());
    }
    Ok(WordStream { words, old })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum VariableStep {
    Statement {
        text: String,
        person: String,
        city: String,
        moved: bool,
    },
    Query {
        person: String,
        /// Current city of `person` at query time.
        truth: String,
        /// Active person-city bindings at query time.
        active: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchedule {
    pub steps: Vec<VariableStep>,
}

impl VariableSchedule {
    pub fn queries(&self) -> impl Iterator<Item = &VariableStep> {
        self.steps
            .iter()
            .filter(|s| matches!(s, VariableStep::Query { .. }))
    }
}

/// Statements binding people to cities, with a query after every two
/// statements. Runs until `max_bindings` people are active and queried once.
pub fn gen_variable_statements<R: Rng + ?Sized>(
    max_bindings: usize,
    people: &[&str],
    cities: &[&str],
    move_prob: f64,
    rng: &mut R,
) -> Result<VariableSchedule, TaskError> {
    if max_bindings == 0 || max_bindings > 10 || max_bindings > people.len() || cities.len() < 2 {
        return Err(TaskError::GenerationFailed(format!(
            "cannot bind {max_bindings} of {} people across {} cities",
            people.len(),
            cities.len()
        )));
    }
    let mut order: Vec<&str> = people.to_vec();
    order.shuffle(rng);
    let mut current: BTreeMap<&str, &str> = BTreeMap::new();
    let mut introduced: Vec<&str> = Vec::new();
    let mut steps = Vec::new();
    loop {
        for _ in 0..2 {
            let can_move = introduced.len() >= 2;
            let must_move = introduced.len() == max_bindings;
            if must_move || (can_move && rng.gen_bool(move_prob)) {
                let person = *introduced.choose(rng).unwrap();
                let from = current[person];
                let to = loop {
                    let c = *cities.choose(rng).unwrap();
                    if c != from {
                        break c;
                    }
                };
                current.insert(person, to);
                steps.push(VariableStep::Statement {
                    text: format!("{person} moved to {to}."),
                    person: person.into(),
                    city: to.into(),
                    moved: true,
                });
            } else {
                let person = order[introduced.len()];
                let city = *cities.choose(rng).unwrap();
                introduced.push(person);
                current.insert(person, city);
                steps.push(VariableStep::Statement {
                    text: format!("{person} lives in {city}."),
                    person: person.into(),
                    city: city.into(),
                    moved: false,
                });
            }
        }
        let person = *introduced.choose(rng).unwrap();
        steps.push(VariableStep::Query {
            person: person.into(),
            truth: current[person].into(),
            active: introduced.len(),
        });
        if introduced.len() == max_bindings {
            return Ok(VariableSchedule { steps });
        }
    }
}
