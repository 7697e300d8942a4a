//! Configuration, orchestration and report writing for `discspec`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{canned, validate, CriterionKind, ScanConfig};
pub use report::Report;
pub use run::{build_setup, run_scan, with_workers};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}")]
    Core(String),
}
