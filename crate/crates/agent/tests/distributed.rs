mod support;

use std::collections::HashSet;
use std::sync::Arc;

use amigo_agent::{Agent, AgentConfig, HttpControlPlane, ScriptedSensors, Switchable};
use amigo_core::{Clock, ExperimentKind, InstructionKind, InstructionState, NewInstruction, SimClock};
use amigo_server::{spawn, ServerHandle, Store};
use chrono::Duration;

use support::*;

struct Server {
    rt: tokio::runtime::Runtime,
    handle: Option<ServerHandle>,
}

impl Server {
    fn start(dir: &std::path::Path, clock: SimClock) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        let shared: Arc<dyn Clock> = Arc::new(clock);
        let store = Store::open(dir, shared).unwrap();
        let handle = rt.block_on(async {
            let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            spawn(l, store).await.unwrap()
        });
        Self { rt, handle: Some(handle) }
    }

    fn url(&self) -> String {
        format!("http://{}", self.handle.as_ref().unwrap().addr)
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.handle.as_ref().unwrap().state.store()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = self.rt.block_on(h.shutdown());
        }
    }
}

fn always_mobile() -> amigo_agent::Timeline {
    let mut t = random_timeline(0, 1);
    for s in &mut t.steps {
        s.reading.battery_pct = Some(90);
        s.reading.connectivity = Some(amigo_core::Connectivity::Mobile);
    }
    t
}

#[test]
fn outage_then_recovery_stores_every_record_exactly_once() {
    let server_dir = tempfile::tempdir().unwrap();
    let agent_dir = tempfile::tempdir().unwrap();
    let clock = SimClock::new(t0());
    let server = Server::start(server_dir.path(), clock.clone());

    let mut cfg = AgentConfig::new("me-net", server.url(), agent_dir.path());
    cfg.seed = Some(5);
    cfg.schedule.interval_s = 300;
    cfg.experiments = vec![spec("dns", ExperimentKind::Dns, &[("targets", "a.example,b.example")])];
    for e in &mut cfg.experiments {
        e.schedule.interval_s = 300;
    }
    let (plane, switch) = Switchable::new(HttpControlPlane::new(&server.url(), std::time::Duration::from_secs(5)));
    let (probes, _) = RecordingProbes::new(0);
    let mut agent = Agent::new(
        cfg,
        Box::new(ScriptedSensors::new(always_mobile())),
        Box::new(probes),
        Box::new(plane),
        t0(),
    )
    .unwrap();

    let mut produced = HashSet::new();
    let mut report_ticks = 0;
    let mut now = t0();
    for minute in 0..60 {
        clock.set(now);
        // Reports land on minutes 0, 5, 10, ...; the link is down for the
        // three reports at 15, 20 and 25.
        switch.set_up(!(15..30).contains(&minute));
        if let Some(r) = agent.tick(now).unwrap() {
            report_ticks += 1;
            if !switch.is_up() {
                assert!(!r.status_sent);
                assert!(r.error.is_some());
            }
        }
        produced.extend(agent.spool().iter().map(|r| r.record_id.to_string()));
        now += Duration::minutes(1);
    }
    assert_eq!(report_ticks, 12);
    // One more report after the last experiments flushes the spool.
    clock.set(now + Duration::minutes(5));
    switch.set_up(true);
    agent.report_tick(now + Duration::minutes(5)).unwrap();
    assert_eq!(agent.spool().len(), 0);

    let store = server.store();
    let stored: Vec<String> = store.index().records().iter().map(|r| r.record_id.to_string()).collect();
    let unique: HashSet<_> = stored.iter().cloned().collect();
    assert_eq!(stored.len(), unique.len());
    assert_eq!(unique, produced);
    assert_eq!(produced.len(), 24);
}

#[test]
fn instructions_flow_through_the_lifecycle() {
    let server_dir = tempfile::tempdir().unwrap();
    let agent_dir = tempfile::tempdir().unwrap();
    let clock = SimClock::new(t0());
    let server = Server::start(server_dir.path(), clock.clone());

    let mut cfg = AgentConfig::new("me-ins", server.url(), agent_dir.path());
    cfg.experiments = vec![spec("dns", ExperimentKind::Dns, &[("targets", "a.example")])];
    let plane = HttpControlPlane::new(&server.url(), std::time::Duration::from_secs(5));
    let (probes, calls) = RecordingProbes::new(0);
    let mut agent = Agent::new(
        cfg,
        Box::new(ScriptedSensors::new(always_mobile())),
        Box::new(probes),
        Box::new(plane),
        t0(),
    )
    .unwrap();

    agent.tick(t0()).unwrap();
    let enqueue = |kind| {
        server
            .store()
            .enqueue_instruction(NewInstruction { device_id: "me-ins".into(), kind, id: None })
            .unwrap()
            .id
    };
    let pause = enqueue(InstructionKind::Pause { duration_s: 3600 });
    let tunnel = enqueue(InstructionKind::OpenTunnel { host: "ctrl.example".into(), port: 2222 });
    let bad = enqueue(InstructionKind::UpdateConfig { key: "colour".into(), value: "blue".into() });
    let run_now = enqueue(InstructionKind::RunNow { experiment_id: "dns".into() });

    let at = t0() + Duration::minutes(5);
    clock.set(at);
    let report = agent.tick(at).unwrap().unwrap();
    assert_eq!(report.instructions_applied, 4);
    {
        let store = server.store();
        let state = |id: &str| store.index().instruction(id).unwrap().clone();
        assert_eq!(state(&pause).state, InstructionState::Acked);
        assert_eq!(state(&tunnel).outcome.as_deref(), Some("stub: tunnel requested ctrl.example:2222"));
        assert_eq!(state(&bad).state, InstructionState::Failed);
        assert_eq!(state(&run_now).state, InstructionState::Acked);
    }
    // Paused, so the forced run waits.
    assert_eq!(calls.lock().unwrap().len(), 1);
    assert!(agent.state().is_paused(at));

    let resume = enqueue(InstructionKind::Resume);
    let at = at + Duration::minutes(5);
    clock.set(at);
    agent.tick(at).unwrap();
    assert_eq!(server.store().index().instruction(&resume).unwrap().state, InstructionState::Acked);
    // Resumed with a forced run pending: runs although 10 < 30 minutes.
    assert_eq!(calls.lock().unwrap().len(), 2);
}
