use std::collections::VecDeque;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use amigo_core::{
    AckOutcome, Connectivity, DeviceStatus, ExperimentSpec, Instruction, InstructionKind, MeasurementRecord,
    RecordId,
};
use chrono::{DateTime, Duration, Timelike, Utc};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::config::AgentConfig;
use crate::control::{ControlError, ControlPlane};
use crate::error::AgentError;
use crate::runner::ProbeRunner;
use crate::schedule::{evaluate, Decision};
use crate::sensors::SensorSource;
use crate::spool::Spool;
use crate::state::{AgentState, PendingAck};

const UPLOAD_BATCH: usize = 50;
const DECISION_MEMORY: usize = 200_000;

/// What one report exchange achieved.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportOutcome {
    pub status_sent: bool,
    pub instructions_applied: usize,
    pub uploaded: usize,
    pub spooled_after: usize,
    pub error: Option<String>,
}

pub struct Agent {
    config: AgentConfig,
    state: AgentState,
    spool: Spool,
    sensors: Box<dyn SensorSource>,
    probes: Box<dyn ProbeRunner>,
    control: Box<dyn ControlPlane>,
    rng: StdRng,
    decisions: VecDeque<Decision>,
    decision_sink: Option<File>,
    last_status: Option<DeviceStatus>,
}

fn device_seed(seed: u64, device_id: &str) -> u64 {
    device_id
        .bytes()
        .fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

impl Agent {
    /// Restores state and spool from `config.spool_dir`.
    pub fn new(
        config: AgentConfig,
        sensors: Box<dyn SensorSource>,
        probes: Box<dyn ProbeRunner>,
        control: Box<dyn ControlPlane>,
        now: DateTime<Utc>,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        let state = AgentState::load_or_new(&config.spool_dir, now)?;
        let spool = Spool::open(&config.spool_dir)?;
        let rng = match config.seed {
            Some(seed) => StdRng::seed_from_u64(device_seed(seed, &config.device_id)),
            None => StdRng::from_os_rng(),
        };
        Ok(Self {
            config,
            state,
            spool,
            sensors,
            probes,
            control,
            rng,
            decisions: VecDeque::new(),
            decision_sink: None,
            last_status: None,
        })
    }

    /// Also appends every decision to a JSONL file.
    pub fn log_decisions_to(&mut self, path: &Path) -> Result<(), AgentError> {
        let f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| AgentError::Io {
                context: format!("opening {}", path.display()),
                source,
            })?;
        self.decision_sink = Some(f);
        Ok(())
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn spool(&self) -> &Spool {
        &self.spool
    }

    pub fn decisions(&self) -> impl Iterator<Item = &Decision> {
        self.decisions.iter()
    }

    pub fn last_status(&self) -> Option<&DeviceStatus> {
        self.last_status.as_ref()
    }

    pub fn collect_status(&mut self, now: DateTime<Utc>) -> DeviceStatus {
        let r = self.sensors.read(now);
        let status = DeviceStatus {
            device_id: self.config.device_id.clone(),
            timestamp: now,
            battery_pct: r.battery_pct.filter(|b| *b <= 100),
            connectivity: r.connectivity.unwrap_or(Connectivity::None),
            operator_name: r.operator_name.unwrap_or_default(),
            network_id: r.network_id.unwrap_or_default(),
            gps: r.gps,
            data_used_today: self.state.ledger.used(now),
            agent_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        self.last_status = Some(status.clone());
        status
    }

    pub fn account_data(&mut self, bytes: u64, now: DateTime<Utc>) {
        self.state.ledger.account(bytes, now);
    }

    /// Clears transient state; spool and ledger survive.
    pub fn nightly_reset(&mut self, now: DateTime<Utc>) {
        tracing::info!(device = %self.config.device_id, "nightly reset");
        self.state.paused_until = None;
        self.state.run_now.clear();
        self.state.last_reset_day = Some(now.date_naive());
    }

    pub fn apply_instruction(&mut self, instr: &Instruction, now: DateTime<Utc>) -> (AckOutcome, String) {
        match &instr.kind {
            InstructionKind::Pause { duration_s } if *duration_s > 0 => {
                let until = now + Duration::seconds(*duration_s);
                self.state.paused_until = Some(until);
                (AckOutcome::Acked, format!("paused until {}", until.to_rfc3339()))
            }
            InstructionKind::Pause { duration_s } => {
                (AckOutcome::Failed, format!("pause duration {duration_s}s is not positive"))
            }
            InstructionKind::Resume => {
                self.state.paused_until = None;
                (AckOutcome::Acked, "resumed".into())
            }
            InstructionKind::RunNow { experiment_id } => {
                if self.config.experiment(experiment_id).is_some() {
                    self.state.run_now.insert(experiment_id.clone());
                    (AckOutcome::Acked, format!("{experiment_id} will run at the next eligible tick"))
                } else {
                    (AckOutcome::Failed, format!("unknown experiment {experiment_id:?}"))
                }
            }
            InstructionKind::OpenTunnel { host, port } => {
                tracing::info!("tunnel requested to {host}:{port} (not executed)");
                (AckOutcome::Acked, format!("stub: tunnel requested {host}:{port}"))
            }
            InstructionKind::UpdateConfig { key, value } => match self.config.update(key, value) {
                Ok(()) => {
                    if key == "server_url" {
                        self.control.set_server_url(&self.config.server_url);
                    }
                    (AckOutcome::Acked, format!("{key} = {value}"))
                }
                Err(e) => (AckOutcome::Failed, e.to_string()),
            },
            InstructionKind::Unsupported => (AckOutcome::Failed, "unsupported instruction kind".into()),
        }
    }

    /// Runs every target of the experiment, spooling one record each.
    pub fn run_experiment(&mut self, spec: &ExperimentSpec, now: DateTime<Utc>) -> Result<Vec<MeasurementRecord>, AgentError> {
        let targets: Vec<Option<String>> = if spec.kind.needs_targets() {
            spec.targets().into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let network_id = self
            .last_status
            .as_ref()
            .map(|s| s.network_id.clone())
            .unwrap_or_default();
        let mut out = Vec::with_capacity(targets.len());
        for target in targets {
            let payload = self.probes.run(spec, target.as_deref(), now);
            let record = MeasurementRecord {
                record_id: RecordId::random(&mut self.rng),
                device_id: self.config.device_id.clone(),
                network_id: network_id.clone(),
                experiment_kind: spec.kind,
                timestamp: now,
                payload,
            };
            self.account_data(record.payload.bytes_transferred(), now);
            self.spool.push(record.clone())?;
            out.push(record);
        }
        self.state.last_run.insert(spec.id.clone(), now);
        self.state.run_now.remove(&spec.id);
        Ok(out)
    }

    fn flush_acks(&mut self) -> Result<(), ControlError> {
        while let Some(ack) = self.state.pending_acks.first().cloned() {
            match self.control.ack(&self.config.device_id, &ack.id, ack.outcome, &ack.detail) {
                Ok(()) => {}
                Err(ControlError::Refused { status, body }) => {
                    tracing::warn!("ack {} refused ({status}): {body}", ack.id);
                }
                Err(e) => return Err(e),
            }
            self.state.pending_acks.remove(0);
        }
        Ok(())
    }

    fn drain_spool(&mut self) -> Result<usize, AgentError> {
        let mut uploaded = 0;
        while !self.spool.is_empty() {
            let batch = self.spool.peek(UPLOAD_BATCH);
            match self.control.submit(&self.config.device_id, &batch) {
                Ok(reply) => {
                    for r in &reply.rejected {
                        tracing::warn!("server rejected record {}: {}", r.record_id, r.reason);
                    }
                    self.spool.pop_front(batch.len())?;
                    uploaded += batch.len();
                }
                Err(e) => {
                    tracing::debug!("upload deferred: {e}");
                    break;
                }
            }
        }
        Ok(uploaded)
    }

    /// Status report, instruction handling and spool upload. Network failures
    /// leave everything in place for the next report.
    pub fn report_tick(&mut self, now: DateTime<Utc>) -> Result<ReportOutcome, AgentError> {
        self.state.last_report = Some(now);
        let mut out = ReportOutcome::default();
        let status = self.collect_status(now);
        let result = (|| -> Result<(), ControlError> {
            self.flush_acks()?;
            let pending = self.control.post_status(&status)?;
            out.status_sent = true;
            if pending > 0 {
                for instr in self.control.fetch_instructions(&self.config.device_id)? {
                    let (outcome, detail) = self.apply_instruction(&instr, now);
                    tracing::info!(id = %instr.id, kind = instr.kind.name(), ?outcome, "{detail}");
                    self.state.pending_acks.push(PendingAck {
                        id: instr.id.clone(),
                        outcome,
                        detail,
                    });
                    out.instructions_applied += 1;
                }
                self.flush_acks()?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            tracing::debug!(device = %self.config.device_id, "report failed: {e}");
            out.error = Some(e.to_string());
        }
        if out.status_sent {
            out.uploaded = self.drain_spool()?;
        }
        out.spooled_after = self.spool.len();
        Ok(out)
    }

    fn report_due(&self, now: DateTime<Utc>) -> bool {
        self.state
            .last_report
            .is_none_or(|t| now >= t + Duration::seconds(self.config.report_interval_s as i64))
    }

    fn record_decision(&mut self, d: Decision) {
        if let Some(sink) = self.decision_sink.as_mut() {
            if let Ok(line) = amigo_core::jsonl::to_line(&d) {
                let _ = sink.write_all(&line);
            }
        }
        if self.decisions.len() == DECISION_MEMORY {
            self.decisions.pop_front();
        }
        self.decisions.push_back(d);
    }

    /// One step of the control loop at `now`.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Result<Option<ReportOutcome>, AgentError> {
        let before = self.state.clone();
        self.account_data(0, now);
        if now.hour() == self.config.nightly_reset_hour_utc && self.state.last_reset_day != Some(now.date_naive()) {
            self.nightly_reset(now);
        }
        let report = if self.report_due(now) {
            Some(self.report_tick(now)?)
        } else {
            None
        };

        let mut status = self.collect_status(now);
        let specs = self.config.experiments.clone();
        for spec in &specs {
            status.data_used_today = self.state.ledger.used(now);
            let gates = evaluate(spec, &self.state, &status, now);
            let ran = gates.all();
            self.record_decision(Decision {
                at: now,
                experiment_id: spec.id.clone(),
                ran,
                forced: self.state.run_now.contains(&spec.id),
                gates,
                battery_pct: status.battery_pct,
                connectivity: status.connectivity,
                data_used_today: status.data_used_today,
                paused_until: self.state.paused_until,
                last_run: self.state.last_run.get(&spec.id).copied(),
                rule: spec.schedule.clone(),
            });
            if ran {
                self.run_experiment(spec, now)?;
            }
        }
        if self.state != before {
            self.state.save(&self.config.spool_dir)?;
        }
        Ok(report)
    }

    /// Ticks from `start` (inclusive) to `end` (exclusive) in `step` increments.
    pub fn run_simulated(&mut self, start: DateTime<Utc>, end: DateTime<Utc>, step: Duration) -> Result<(), AgentError> {
        let mut now = start;
        while now < end {
            self.tick(now)?;
            now += step;
        }
        Ok(())
    }
}
