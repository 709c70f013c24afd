//! Measurement endpoint agent.
//!
//! The agent is a single control loop driven by [`Agent::tick`]: it reports
//! status on its report interval, applies the instructions the server hands
//! back, and runs the experiments whose schedule gates are all open. Time is
//! always passed in, so the same code runs on a wall clock or a simulated one.

mod agent;
pub mod config;
pub mod control;
mod error;
pub mod runner;
pub mod schedule;
pub mod sensors;
pub mod spool;
pub mod state;

pub use agent::{Agent, ReportOutcome};
pub use config::AgentConfig;
pub use control::{ControlError, ControlPlane, HttpControlPlane, Offline, Switch, Switchable, UploadReply};
pub use error::AgentError;
pub use runner::{LiveProbes, ProbeRunner};
pub use schedule::{evaluate, should_run, Decision, Gates};
pub use sensors::{HostSensors, ScriptedSensors, SensorReading, SensorSource, Timeline, TimelineStep};
pub use spool::Spool;
pub use state::{AgentState, DataLedger};
