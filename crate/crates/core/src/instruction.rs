use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Server-to-agent automation command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstructionKind {
    Pause { duration_s: i64 },
    Resume,
    RunNow { experiment_id: String },
    OpenTunnel { host: String, port: u16 },
    UpdateConfig { key: String, value: String },
    /// Any kind this build does not know. Never accepted by the server;
    /// agents answer it with a failed outcome.
    #[serde(other)]
    Unsupported,
}

impl InstructionKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstructionKind::Pause { .. } => "pause",
            InstructionKind::Resume => "resume",
            InstructionKind::RunNow { .. } => "run_now",
            InstructionKind::OpenTunnel { .. } => "open_tunnel",
            InstructionKind::UpdateConfig { .. } => "update_config",
            InstructionKind::Unsupported => "unsupported",
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        match self {
            InstructionKind::Pause { duration_s } if *duration_s <= 0 => Err(
                ValidationError::new("kind.duration_s", "pause duration must be positive"),
            ),
            InstructionKind::RunNow { experiment_id } if experiment_id.trim().is_empty() => Err(
                ValidationError::new("kind.experiment_id", "must not be empty"),
            ),
            InstructionKind::OpenTunnel { host, port } => {
                if host.trim().is_empty() {
                    Err(ValidationError::new("kind.host", "must not be empty"))
                } else if *port == 0 {
                    Err(ValidationError::new("kind.port", "must be non-zero"))
                } else {
                    Ok(())
                }
            }
            InstructionKind::UpdateConfig { key, .. } if key.trim().is_empty() => {
                Err(ValidationError::new("kind.key", "must not be empty"))
            }
            InstructionKind::Unsupported => {
                Err(ValidationError::new("kind.type", "unknown instruction kind"))
            }
            _ => Ok(()),
        }
    }
}

/// Lifecycle: `Pending -> Delivered -> {Acked, Failed}`. Ordering follows the
/// lifecycle so `a < b` means `b` is later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionState {
    Pending,
    Delivered,
    Acked,
    Failed,
}

impl InstructionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, InstructionState::Acked | InstructionState::Failed)
    }

    pub fn rank(self) -> u8 {
        match self {
            InstructionState::Pending => 0,
            InstructionState::Delivered => 1,
            InstructionState::Acked | InstructionState::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckOutcome {
    Acked,
    Failed,
}

impl From<AckOutcome> for InstructionState {
    fn from(o: AckOutcome) -> Self {
        match o {
            AckOutcome::Acked => InstructionState::Acked,
            AckOutcome::Failed => InstructionState::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: String,
    pub device_id: String,
    pub created_at: DateTime<Utc>,
    pub kind: InstructionKind,
    pub state: InstructionState,
    #[serde(default)]
    pub outcome: Option<String>,
}

impl Instruction {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.device_id.trim().is_empty() {
            return Err(ValidationError::new("device_id", "must not be empty"));
        }
        self.kind.validate()?;
        if self.state.is_terminal() != self.outcome.is_some() {
            return Err(ValidationError::new(
                "outcome",
                "present iff the instruction is acked or failed",
            ));
        }
        Ok(())
    }
}

/// Admin request body for enqueueing. Server-owned fields (`created_at`,
/// `state`) are ignored if a full [`Instruction`] is posted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewInstruction {
    pub device_id: String,
    pub kind: InstructionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_wire_format() {
        let kind = InstructionKind::OpenTunnel {
            host: "ctrl.example".into(),
            port: 2222,
        };
        let json = serde_json::to_string(&kind).unwrap();
        assert_eq!(json, r#"{"type":"open_tunnel","host":"ctrl.example","port":2222}"#);
        let unknown: InstructionKind =
            serde_json::from_str(r#"{"type":"self_destruct"}"#).unwrap();
        assert_eq!(unknown, InstructionKind::Unsupported);
        assert!(unknown.validate().is_err());
    }

    #[test]
    fn pause_needs_positive_duration() {
        assert!(InstructionKind::Pause { duration_s: 1800 }.validate().is_ok());
        assert!(InstructionKind::Pause { duration_s: -300 }.validate().is_err());
        assert!(InstructionKind::Pause { duration_s: 0 }.validate().is_err());
    }

    #[test]
    fn full_instruction_parses_as_new_instruction() {
        let full = Instruction {
            id: "i1".into(),
            device_id: "d".into(),
            created_at: "2024-01-01T00:00:00Z".parse().unwrap(),
            kind: InstructionKind::Resume,
            state: InstructionState::Pending,
            outcome: None,
        };
        let new: NewInstruction =
            serde_json::from_value(serde_json::to_value(&full).unwrap()).unwrap();
        assert_eq!(new.device_id, "d");
        assert_eq!(new.id.as_deref(), Some("i1"));
    }

    #[test]
    fn outcome_iff_terminal() {
        let mut i = Instruction {
            id: "i1".into(),
            device_id: "d".into(),
            created_at: "2024-01-01T00:00:00Z".parse().unwrap(),
            kind: InstructionKind::Resume,
            state: InstructionState::Acked,
            outcome: None,
        };
        assert!(i.validate().is_err());
        i.outcome = Some("ok".into());
        assert!(i.validate().is_ok());
        i.state = InstructionState::Delivered;
        assert!(i.validate().is_err());
    }
}
