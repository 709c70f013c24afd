//! Shared vocabulary for the measurement platform.
//!
//! Everything that crosses a process boundary lives here: device status
//! reports, automation instructions, experiment definitions, measurement
//! records and the network registry, together with the classifiers that
//! bucket raw measurements into the speed/latency/page-speed classes used
//! by the reports.

pub mod classify;
pub mod clock;
pub mod error;
pub mod experiment;
pub mod instruction;
pub mod jsonl;
pub mod record;
pub mod registry;
pub mod status;

pub use classify::{
    classify_latency, classify_resolver, classify_speed, classify_speed_index, CacheStatus,
    LatencyClass, ResolverClass, SpeedClass, SpeedIndexClass,
};
pub use clock::{Clock, SimClock, SystemClock};
pub use error::{ClassifyError, ValidationError};
pub use experiment::{ConnectivityRule, ExperimentKind, ExperimentSpec, ScheduleRule};
pub use instruction::{AckOutcome, Instruction, InstructionKind, InstructionState, NewInstruction};
pub use record::{
    CdnResult, DnsResult, HopStat, LatencyResult, MeasurementRecord, Payload, RecordId, Resolution,
    SpeedtestResult, WebPhase, WebResult, YoutubeSample, YoutubeStatSeries,
};
pub use registry::{Continent, NetworkInfo, NetworkRegistry, RegistryError};
pub use status::{Connectivity, DeviceStatus, GeoPoint};

/// One gibibyte, the unit the daily data cap is expressed in.
pub const GIB: u64 = 1 << 30;
