//! Batch experiment runner: reference solve, sampling, training and scoring
//! for each selected test, with every intermediate written to disk.

pub mod config;
pub mod run;

pub use config::{RunConfig, TestSettings};
pub use run::{run, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ocp_pinn::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
