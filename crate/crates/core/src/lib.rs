//! Human-memory task battery, participants, the capacity-limited memory
//! agent, and humanlikeness metrics.

pub mod compactor;
pub mod config;
pub mod harness;
pub mod metrics;
pub mod participants;
pub mod report;
pub mod rerank;
pub mod response;
pub mod rng;
pub mod stimulus;
pub mod task;
pub mod tasks;
pub mod transcript;

pub use config::{TaskConfig, TaskParams};
pub use task::{TaskId, TaskScore};
