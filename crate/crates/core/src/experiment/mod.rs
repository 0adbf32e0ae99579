//! Experiment configuration, presets, checkpoints and CSV artifacts.

mod checkpoint;
mod config;
mod run;

pub use checkpoint::{Checkpoint, CHECKPOINT_HEADER};
pub use config::{ExperimentConfig, ModelKind, Scale, BURGERS_EPSILON, HEAT_KAPPA};
pub use run::{
    run_experiment, snapshot_csv, Mode, RunSummary, Session, CHECKS_HEADER, SNAPSHOT_HEADER,
    SNAPSHOT_ITERATION,
};

#[cfg(test)]
mod tests;
