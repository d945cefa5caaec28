use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::task::TaskId;

/// Scores of one population on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub samples: Vec<f64>,
    pub range: (f64, f64),
    pub label: String,
}

impl ScoreDistribution {
    pub fn new(samples: Vec<f64>, range: (f64, f64), label: impl Into<String>) -> Result<Self, MetricError> {
        if samples.is_empty() {
            return Err(MetricError::EmptySample);
        }
        if let Some(&value) = samples.iter().find(|v| !(range.0..=range.1).contains(*v)) {
            return Err(MetricError::OutOfRange { value, range });
        }
        Ok(ScoreDistribution {
            samples,
            range,
            label: label.into(),
        })
    }

    pub fn for_task(task: TaskId, samples: Vec<f64>, label: impl Into<String>) -> Result<Self, MetricError> {
        Self::new(samples, task.score_range(), label)
    }

    /// Samples mapped affinely onto [0, 1] by the range.
    pub fn normalized(&self) -> Vec<f64> {
        let (lo, hi) = self.range;
        self.samples.iter().map(|v| (v - lo) / (hi - lo)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Area between the two empirical CDFs, by a sweep over the merged sorted samples.
pub fn wasserstein_1d(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut area = 0.0;
    let mut prev = xs[0].min(ys[0]);
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        let fx = i as f64 / nx;
        let fy = j as f64 / ny;
        area += (fx - fy).abs() * (next - prev);
        while i < xs.len() && xs[i] == next {
            i += 1;
        }
        while j < ys.len() && ys[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(area)
}

/// One minus the Wasserstein distance between range-normalized samples.
pub fn humanlikeness(human: &ScoreDistribution, model: &ScoreDistribution) -> Result<f64, MetricError> {
    if human.range != model.range {
        return Err(MetricError::RangeMismatch(human.range, model.range));
    }
    let w = wasserstein_1d(&human.normalized(), &model.normalized())?;
    Ok((1.0 - w).clamp(0.0, 1.0))
}
