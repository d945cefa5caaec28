use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use memsim_core::rng::substream;
use memsim_core::TaskId;

pub const DEFAULT_DEADLINE_MINUTES: u64 = 60;

/// Ordered tasks for one participant under one overall deadline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub participant_id: String,
    pub tasks: Vec<TaskId>,
    pub deadline_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid plan: {0}")]
pub struct InvalidPlan(pub String);

impl StudyPlan {
    /// `tasks` (all ten by default) in an order drawn from `seed` alone,
    /// so participants created with the same seed see the same order.
    pub fn randomized(
        participant_id: &str,
        seed: u64,
        tasks: Option<Vec<TaskId>>,
        deadline_minutes: u64,
    ) -> Result<Self, InvalidPlan> {
        let mut tasks = tasks.unwrap_or_else(|| TaskId::ALL.to_vec());
        if tasks.is_empty() {
            return Err(InvalidPlan("no tasks".into()));
        }
        if tasks.iter().collect::<BTreeSet<_>>().len() != tasks.len() {
            return Err(InvalidPlan("a task appears twice".into()));
        }
        if deadline_minutes == 0 {
            return Err(InvalidPlan("deadline must be positive".into()));
        }
        // a fixed base order keeps the permutation independent of how the list was written
        tasks.sort();
        tasks.shuffle(&mut substream(seed, "study-plan"));
        Ok(StudyPlan {
            participant_id: participant_id.to_string(),
            tasks,
            deadline_ms: deadline_minutes * 60_000,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_plan_is_a_permutation() {
        let p = StudyPlan::randomized("a", 3, None, DEFAULT_DEADLINE_MINUTES).unwrap();
        let mut sorted = p.tasks.clone();
        sorted.sort();
        assert_eq!(sorted, TaskId::ALL.to_vec());
        assert_eq!(p.deadline_ms, 3_600_000);
    }

    #[test]
    fn order_depends_on_seed_only() {
        let a = StudyPlan::randomized("a", 9, None, 60).unwrap();
        let b = StudyPlan::randomized("b", 9, None, 60).unwrap();
        assert_eq!(a.tasks, b.tasks);
        let orders: BTreeSet<Vec<TaskId>> =
            (0..20).map(|s| StudyPlan::randomized("a", s, None, 60).unwrap().tasks).collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn bad_plans() {
        assert!(StudyPlan::randomized("a", 1, Some(vec![]), 60).is_err());
        assert!(StudyPlan::randomized("a", 1, Some(vec![TaskId::NBack, TaskId::NBack]), 60).is_err());
        assert!(StudyPlan::randomized("a", 1, None, 0).is_err());
    }
}
