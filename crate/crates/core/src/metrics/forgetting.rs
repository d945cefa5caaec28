use serde::{Deserialize, Serialize};

use super::MetricError;

/// Per-position comparison of a recalled digit sequence with the truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitAlignment {
    /// `true` marks an error. Missing and extra digits count as errors.
    pub errors: Vec<bool>,
    pub length_match: bool,
}

impl DigitAlignment {
    pub fn error_count(&self) -> usize {
        self.errors.iter().filter(|e| **e).count()
    }

    pub fn is_correct(&self) -> bool {
        self.error_count() == 0
    }
}

pub fn digit_alignment(truth: &[u8], pred: &[u8]) -> DigitAlignment {
    let n = truth.len().max(pred.len());
    let errors = (0..n).map(|i| truth.get(i) != pred.get(i) || i >= truth.len()).collect();
    DigitAlignment {
        errors,
        length_match: truth.len() == pred.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPatternStats {
    pub length_match_rate: f64,
    /// p(err at i | err at i-1), pooled over positions; 0 when no error
    /// is ever followed by another position.
    pub conditional_error_rate: f64,
    pub n_trials: usize,
}

/// Statistics over incorrect trials; correct alignments are ignored.
pub fn error_pattern_stats(alignments: &[DigitAlignment]) -> Result<ErrorPatternStats, MetricError> {
    let wrong: Vec<&DigitAlignment> = alignments.iter().filter(|a| !a.is_correct()).collect();
    if wrong.is_empty() {
        return Err(MetricError::NoErrors);
    }
    let mut prev_wrong = 0usize;
    let mut both = 0usize;
    for a in &wrong {
        for w in a.errors.windows(2) {
            if w[0] {
                prev_wrong += 1;
                if w[1] {
                    both += 1;
                }
            }
        }
    }
    let matched = wrong.iter().filter(|a| a.length_match).count();
    Ok(ErrorPatternStats {
        length_match_rate: matched as f64 / wrong.len() as f64,
        conditional_error_rate: if prev_wrong == 0 { 0.0 } else { both as f64 / prev_wrong as f64 },
        n_trials: wrong.len(),
    })
}
