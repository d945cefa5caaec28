//! Per-session task configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::task::TaskId;

/// Tunable task parameters. Defaults reproduce the standard battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub start_span: usize,
    pub max_span: usize,
    pub nback_levels: Vec<usize>,
    pub block_length: usize,
    pub practice_length: usize,
    /// Practice block with feedback; enabled for human sessions only.
    pub include_practice: bool,
    pub match_rate: f64,
    pub word_cap: usize,
    pub repeat_prob: f64,
    pub max_bindings: usize,
    pub move_prob: f64,
    pub attempts: usize,
    pub trial_counts: usize,
    pub questions_per_trial: usize,
    pub options_per_question: usize,
    pub map_levels: Vec<usize>,
    pub craft_levels: Vec<usize>,
    pub reading_ms: u64,
    pub recall_reading_ms: u64,
    pub study_ms: u64,
    pub item_ms: u64,
    pub gap_ms: u64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            start_span: 3,
            max_span: 20,
            nback_levels: vec![1, 2, 3],
            block_length: 20,
            practice_length: 10,
            include_practice: false,
            match_rate: 0.3,
            word_cap: 100,
            repeat_prob: 0.4,
            max_bindings: 10,
            move_prob: 0.35,
            attempts: 3,
            trial_counts: 3,
            questions_per_trial: 5,
            options_per_question: 4,
            map_levels: vec![4, 5, 6],
            craft_levels: vec![5, 6, 7],
            reading_ms: 180_000,
            recall_reading_ms: 300_000,
            study_ms: 60_000,
            item_ms: 1_000,
            gap_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: TaskId,
    pub seed: u64,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus_pack: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid task config: {0}")]
pub struct InvalidConfig(pub String);

impl TaskConfig {
    pub fn new(task: TaskId, seed: u64) -> Self {
        TaskConfig {
            task,
            seed,
            params: TaskParams::default(),
            stimulus_pack: None,
        }
    }

    pub fn with_pack(mut self, path: impl Into<PathBuf>) -> Self {
        self.stimulus_pack = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let p = &self.params;
        let bad = |msg: String| Err(InvalidConfig(msg));
        if p.start_span < 1 {
            return bad("start_span must be at least 1".into());
        }
        if p.max_span > 20 || p.max_span < p.start_span {
            return bad(format!(
                "max_span {} must lie in [start_span, 20]",
                p.max_span
            ));
        }
        if !(p.match_rate > 0.0 && p.match_rate < 1.0) {
            return bad(format!("match_rate {} must lie in (0, 1)", p.match_rate));
        }
        if !(0.0..1.0).contains(&p.repeat_prob) || !(0.0..1.0).contains(&p.move_prob) {
            return bad("repeat_prob and move_prob must lie in [0, 1)".into());
        }
        if p.nback_levels.is_empty() || p.nback_levels.iter().any(|&n| n == 0 || n >= p.block_length) {
            return bad("n-back levels must be non-empty, each in [1, block_length)".into());
        }
        if p.include_practice && p.practice_length < 2 {
            return bad("practice block needs at least two letters".into());
        }
        if p.word_cap == 0 || p.word_cap > 100 {
            return bad(format!("word_cap {} must lie in [1, 100]", p.word_cap));
        }
        if p.max_bindings == 0 || p.max_bindings > 10 {
            return bad(format!("max_bindings {} must lie in [1, 10]", p.max_bindings));
        }
        if p.attempts == 0 || p.attempts > 3 {
            return bad("attempts must lie in [1, 3]".into());
        }
        if p.trial_counts == 0 || p.questions_per_trial == 0 {
            return bad("trial and question counts must be positive".into());
        }
        if p.options_per_question < 2 {
            return bad("questions need at least two options".into());
        }
        if p.map_levels.iter().any(|n| !(4..=6).contains(n))
            || p.craft_levels.iter().any(|n| !(5..=7).contains(n))
            || p.map_levels.is_empty()
            || p.craft_levels.is_empty()
        {
            return bad("map levels must be in 4..=6 and craft levels in 5..=7".into());
        }
        if [p.reading_ms, p.recall_reading_ms, p.study_ms, p.item_ms].contains(&0) {
            return bad("durations must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for t in TaskId::ALL {
            TaskConfig::new(t, 0).validate().unwrap();
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let mut c = TaskConfig::new(TaskId::DigitSpan, 0);
        c.params.start_span = 0;
        assert!(c.validate().is_err());
        let mut c = TaskConfig::new(TaskId::DigitSpan, 0);
        c.params.max_span = 21;
        assert!(c.validate().is_err());
        let mut c = TaskConfig::new(TaskId::NBack, 0);
        c.params.match_rate = 1.0;
        assert!(c.validate().is_err());
        let mut c = TaskConfig::new(TaskId::FactualQa, 0);
        c.params.reading_ms = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_params_fill_defaults() {
        let c: TaskConfig =
            serde_json::from_str(r#"{"task":"n_back","seed":3,"params":{"block_length":30}}"#).unwrap();
        assert_eq!(c.params.block_length, 30);
        assert_eq!(c.params.nback_levels, vec![1, 2, 3]);
    }
}
