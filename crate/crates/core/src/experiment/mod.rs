//! Training runs: configuration, the epoch loop, checkpoints and artifacts.

pub mod checkpoint;
pub mod config;
#[cfg(feature = "fetch")]
pub mod fetch;
pub mod grid;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod runner;

pub use config::{ModelKind, RunConfig, ScheduleUnit};
pub use metrics::{fmt_sig, moving_average, EpochRow, StepRow, TimingRow, TrainRecord};
pub use model::{BatchOutcome, Model};
pub use runner::{evaluate, train, EvalResult, PreparedData, RunSummary};
