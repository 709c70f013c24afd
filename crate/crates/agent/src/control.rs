//! The agent's view of the control server.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use amigo_core::{AckOutcome, DeviceStatus, Instruction, MeasurementRecord};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    /// Could not reach the server or got no usable answer; retry later.
    #[error("transport: {0}")]
    Transport(String),
    /// The server understood and refused; retrying will not help.
    #[error("server refused ({status}): {body}")]
    Refused { status: u16, body: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UploadRejection {
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UploadReply {
    pub accepted: usize,
    #[serde(default)]
    pub rejected: Vec<UploadRejection>,
}

pub trait ControlPlane: Send {
    /// Returns the number of instructions waiting for the device.
    fn post_status(&mut self, status: &DeviceStatus) -> Result<usize, ControlError>;
    fn fetch_instructions(&mut self, device_id: &str) -> Result<Vec<Instruction>, ControlError>;
    fn ack(&mut self, device_id: &str, id: &str, outcome: AckOutcome, detail: &str) -> Result<(), ControlError>;
    fn submit(&mut self, device_id: &str, records: &[MeasurementRecord]) -> Result<UploadReply, ControlError>;
    fn set_server_url(&mut self, _url: &str) {}
}

pub struct HttpControlPlane {
    client: reqwest::blocking::Client,
    base: String,
}

impl HttpControlPlane {
    pub fn new(base: &str, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .build()
            .expect("http client");
        Self {
            client,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    /// Joins percent-encoded path segments onto the base URL.
    fn url(&self, segments: &[&str]) -> String {
        match url::Url::parse(&self.base) {
            Ok(mut u) => {
                if let Ok(mut path) = u.path_segments_mut() {
                    path.pop_if_empty().extend(segments);
                }
                u.to_string()
            }
            // Let the request fail with a transport error.
            Err(_) => format!("{}/{}", self.base, segments.join("/")),
        }
    }

    fn send<T: serde::de::DeserializeOwned>(
        &self,
        req: reqwest::blocking::RequestBuilder,
    ) -> Result<T, ControlError> {
        let resp = req.send().map_err(|e| ControlError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(ControlError::Transport(format!("server error {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ControlError::Refused {
                status: status.as_u16(),
                body,
            });
        }
        resp.json().map_err(|e| ControlError::Transport(format!("bad response body: {e}")))
    }
}

#[derive(Deserialize)]
struct Pending {
    pending: usize,
}

impl ControlPlane for HttpControlPlane {
    fn post_status(&mut self, status: &DeviceStatus) -> Result<usize, ControlError> {
        let p: Pending = self.send(self.client.post(self.url(&["api", "v1", "status"])).json(status))?;
        Ok(p.pending)
    }

    fn fetch_instructions(&mut self, device_id: &str) -> Result<Vec<Instruction>, ControlError> {
        self.send(self.client.get(self.url(&["api", "v1", "instructions", device_id])))
    }

    fn ack(&mut self, device_id: &str, id: &str, outcome: AckOutcome, detail: &str) -> Result<(), ControlError> {
        let url = self.url(&["api", "v1", "instructions", device_id, id, "ack"]);
        let _: serde_json::Value = self.send(
            self.client
                .post(url)
                .json(&json!({ "outcome": outcome, "detail": detail })),
        )?;
        Ok(())
    }

    fn submit(&mut self, device_id: &str, records: &[MeasurementRecord]) -> Result<UploadReply, ControlError> {
        let url = self.url(&["api", "v1", "results", device_id]);
        self.send(self.client.post(url).json(records))
    }

    fn set_server_url(&mut self, url: &str) {
        self.base = url.trim_end_matches('/').to_string();
    }
}

/// Wraps a control plane with an on/off switch; while off every call fails
/// with a transport error. Used to simulate outages.
pub struct Switchable<C> {
    inner: C,
    up: Arc<AtomicBool>,
}

#[derive(Clone)]
pub struct Switch(Arc<AtomicBool>);

impl Switch {
    pub fn set_up(&self, up: bool) {
        self.0.store(up, Ordering::SeqCst);
    }

    pub fn is_up(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: ControlPlane> Switchable<C> {
    pub fn new(inner: C) -> (Self, Switch) {
        let up = Arc::new(AtomicBool::new(true));
        (Self { inner, up: up.clone() }, Switch(up))
    }

    fn check(&self) -> Result<(), ControlError> {
        if self.up.load(Ordering::SeqCst) {
            Ok(())
        } else {
            Err(ControlError::Transport("link down".into()))
        }
    }
}

impl<C: ControlPlane> ControlPlane for Switchable<C> {
    fn post_status(&mut self, status: &DeviceStatus) -> Result<usize, ControlError> {
        self.check()?;
        self.inner.post_status(status)
    }

    fn fetch_instructions(&mut self, device_id: &str) -> Result<Vec<Instruction>, ControlError> {
        self.check()?;
        self.inner.fetch_instructions(device_id)
    }

    fn ack(&mut self, device_id: &str, id: &str, outcome: AckOutcome, detail: &str) -> Result<(), ControlError> {
        self.check()?;
        self.inner.ack(device_id, id, outcome, detail)
    }

    fn submit(&mut self, device_id: &str, records: &[MeasurementRecord]) -> Result<UploadReply, ControlError> {
        self.check()?;
        self.inner.submit(device_id, records)
    }

    fn set_server_url(&mut self, url: &str) {
        self.inner.set_server_url(url);
    }
}

/// A control plane that is never reachable, for agents running without a
/// server.
pub struct Offline;

impl ControlPlane for Offline {
    fn post_status(&mut self, _: &DeviceStatus) -> Result<usize, ControlError> {
        Err(ControlError::Transport("offline".into()))
    }

    fn fetch_instructions(&mut self, _: &str) -> Result<Vec<Instruction>, ControlError> {
        Err(ControlError::Transport("offline".into()))
    }

    fn ack(&mut self, _: &str, _: &str, _: AckOutcome, _: &str) -> Result<(), ControlError> {
        Err(ControlError::Transport("offline".into()))
    }

    fn submit(&mut self, _: &str, _: &[MeasurementRecord]) -> Result<UploadReply, ControlError> {
        Err(ControlError::Transport("offline".into()))
    }
}
