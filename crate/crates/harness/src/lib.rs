//! Experiment workbench: task generators, the landscape scanner, run
//! artifact plumbing, and one driver per demonstration. The `evodev`
//! binary maps each driver to a subcommand; every run is deterministic
//! given its seed and writes plot-ready JSON-lines and CSV artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod landscape;
pub mod tasks;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("task error: {0}")]
    Task(String),
    #[error(transparent)]
    Graph(#[from] evodev_core::graph::GraphError),
    #[error(transparent)]
    Growth(#[from] evodev_core::growth::GrowthError),
    #[error(transparent)]
    Csv(#[from] evodev_core::csv::CsvError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
