//! Library side of the `amigo-bench` binary: subcommand implementations,
//! the in-process demo and its model-driven probes.

pub mod commands;
pub mod demo;
pub mod model_probes;

use std::fmt;

/// Scenario used by `demo` when none is given.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

/// Failure of a subcommand, classified for the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: flags, config, scenario or data. Exit 1.
    Validation(String),
    /// A component failed while running. Exit 2.
    Runtime(String),
    /// Filesystem or socket trouble. Exit 3.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    /// Prefixes the message with the stage that failed.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{stage}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{stage}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{stage}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<amigo_analysis::AnalysisError> for CliError {
    fn from(e: amigo_analysis::AnalysisError) -> Self {
        use amigo_analysis::AnalysisError as E;
        match e {
            E::Io { .. } | E::Write { .. } | E::Registry(amigo_core::RegistryError::Io(_)) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<amigo_simnet::ScenarioError> for CliError {
    fn from(e: amigo_simnet::ScenarioError) -> Self {
        match e {
            amigo_simnet::ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<amigo_agent::AgentError> for CliError {
    fn from(e: amigo_agent::AgentError) -> Self {
        use amigo_agent::AgentError as E;
        match e {
            E::Config(_) | E::Validation(_) | E::Timeline(_) => CliError::Validation(e.to_string()),
            E::Io { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<amigo_simnet::SimnetError> for CliError {
    fn from(e: amigo_simnet::SimnetError) -> Self {
        CliError::Io(e.to_string())
    }
}
