// SPDX-License-Identifier: Apache-2.0

//! Configuration, experiment driver and output writers behind the `scp-sdn`
//! binary.

use std::path::PathBuf;

pub mod config;
pub mod emit;
pub mod run;

pub use config::{parse_config, parse_connections, Args, Format, Layer, Preset, RunConfig};
pub use emit::{emit, render, sig6};
pub use run::{run_experiment, signaling_config, PartialRun, ResultRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("no scenario given; pass --scenario, --preset or set `scenario` in the config file")]
    MissingScenario,
    #[error("invalid `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot render output: {0}")]
    Render(String),
    #[error(transparent)]
    Sim(#[from] scp_sdn::simulator::SimError),
    #[error(transparent)]
    Scenario(#[from] scp_sdn::scenarios::ScenarioError),
}

impl CliError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Args(_)
            | CliError::MissingScenario
            | CliError::Invalid { .. }
            | CliError::Read { .. }
            | CliError::File { .. } => 1,
            CliError::Sim(scp_sdn::simulator::SimError::Config(_)) => 1,
            CliError::Write { .. } | CliError::Render(_) | CliError::Sim(_) | CliError::Scenario(_) => 2,
        }
    }
}
