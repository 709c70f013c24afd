//! The run predicate and the decision log that records every evaluation.

use amigo_core::{Connectivity, ConnectivityRule, DeviceStatus, ExperimentSpec, ScheduleRule};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::state::AgentState;

/// Each scheduling condition evaluated separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gates {
    pub interval: bool,
    pub connectivity: bool,
    pub battery: bool,
    pub data_cap: bool,
    pub not_paused: bool,
}

impl Gates {
    pub fn all(&self) -> bool {
        self.interval && self.connectivity && self.battery && self.data_cap && self.not_paused
    }
}

pub fn connectivity_allowed(rule: ConnectivityRule, c: Connectivity) -> bool {
    match rule {
        ConnectivityRule::MobileOnly => c == Connectivity::Mobile,
        ConnectivityRule::Any => c != Connectivity::None,
    }
}

/// Evaluates every gate. A pending `run_now` waives only the interval.
pub fn evaluate(spec: &ExperimentSpec, state: &AgentState, status: &DeviceStatus, now: DateTime<Utc>) -> Gates {
    let rule = &spec.schedule;
    let interval = state.run_now.contains(&spec.id)
        || state
            .last_run
            .get(&spec.id)
            .is_none_or(|last| now >= *last + Duration::seconds(rule.interval_s as i64));
    Gates {
        interval,
        connectivity: connectivity_allowed(rule.connectivity_required, status.connectivity),
        battery: status.battery_pct.is_some_and(|b| b >= rule.battery_floor_pct),
        data_cap: status.data_used_today < rule.daily_data_cap,
        not_paused: !state.is_paused(now),
    }
}

pub fn should_run(spec: &ExperimentSpec, state: &AgentState, status: &DeviceStatus, now: DateTime<Utc>) -> bool {
    evaluate(spec, state, status, now).all()
}

/// One evaluation of one experiment, with the inputs it saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub at: DateTime<Utc>,
    pub experiment_id: String,
    pub ran: bool,
    pub forced: bool,
    pub gates: Gates,
    pub battery_pct: Option<u8>,
    pub connectivity: Connectivity,
    pub data_used_today: u64,
    pub paused_until: Option<DateTime<Utc>>,
    pub last_run: Option<DateTime<Utc>>,
    pub rule: ScheduleRule,
}

#[cfg(test)]
mod tests {
    use super::*;
    use amigo_core::{ExperimentKind, GIB};
    use std::collections::BTreeMap;

    fn now() -> DateTime<Utc> {
        "2024-03-01T12:00:00Z".parse().unwrap()
    }

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            id: "dns".into(),
            kind: ExperimentKind::Dns,
            params: BTreeMap::from([("targets".to_string(), "example.com".to_string())]),
            schedule: ScheduleRule::default(),
        }
    }

    fn status(battery: u8, c: Connectivity, used: u64) -> DeviceStatus {
        DeviceStatus {
            device_id: "me".into(),
            timestamp: now(),
            battery_pct: Some(battery),
            connectivity: c,
            operator_name: String::new(),
            network_id: String::new(),
            gps: None,
            data_used_today: used,
            agent_version: String::new(),
        }
    }

    fn ran_ago(mins: i64) -> AgentState {
        let mut s = AgentState::new(now());
        s.last_run.insert("dns".into(), now() - Duration::minutes(mins));
        s
    }

    #[test]
    fn policy_examples() {
        let sp = spec();
        assert!(!should_run(&sp, &ran_ago(40), &status(10, Connectivity::Mobile, 0), now()));
        assert!(!should_run(&sp, &ran_ago(40), &status(80, Connectivity::Both, 0), now()));
        assert!(!should_run(&sp, &ran_ago(29), &status(80, Connectivity::Mobile, 0), now()));
        assert!(should_run(&sp, &ran_ago(31), &status(80, Connectivity::Mobile, 0), now()));
        assert!(should_run(&sp, &ran_ago(30), &status(80, Connectivity::Mobile, 0), now()));
        let used = 4 * GIB + GIB / 10;
        assert!(!should_run(&sp, &ran_ago(40), &status(80, Connectivity::Mobile, used), now()));
        let mut paused = ran_ago(40);
        paused.paused_until = Some(now() + Duration::minutes(10));
        assert!(!should_run(&sp, &paused, &status(80, Connectivity::Mobile, 0), now()));
        assert!(should_run(&sp, &AgentState::new(now()), &status(15, Connectivity::Mobile, 0), now()));
    }

    #[test]
    fn run_now_waives_only_the_interval() {
        let sp = spec();
        let mut s = ran_ago(1);
        s.run_now.insert("dns".into());
        assert!(should_run(&sp, &s, &status(80, Connectivity::Mobile, 0), now()));
        assert!(!should_run(&sp, &s, &status(5, Connectivity::Mobile, 0), now()));
    }

    #[test]
    fn missing_battery_reading_blocks() {
        let mut st = status(80, Connectivity::Mobile, 0);
        st.battery_pct = None;
        assert!(!evaluate(&spec(), &AgentState::new(now()), &st, now()).battery);
    }
}
