mod support;

use amigo_agent::{Agent, AgentConfig, Offline, ScriptedSensors};
use amigo_core::{ExperimentKind, Instruction, InstructionKind, InstructionState};
use chrono::{Duration, Timelike};

use support::*;

const SPEED_BYTES: u64 = 300 * 1024 * 1024;

struct Run {
    calls: Vec<(chrono::DateTime<chrono::Utc>, String, u64)>,
    decisions: Vec<amigo_agent::Decision>,
    pauses: Vec<(chrono::DateTime<chrono::Utc>, i64)>,
}

fn simulate(seed: u64, dir: &std::path::Path) -> (Run, amigo_agent::Timeline) {
    let timeline = random_timeline(seed, 2);
    let mut cfg = AgentConfig::new("me-sched", "http://127.0.0.1:9", dir);
    cfg.seed = Some(seed);
    cfg.experiments = vec![
        spec("speed", ExperimentKind::Speedtest, &[("server", "127.0.0.1:1")]),
        spec("dns", ExperimentKind::Dns, &[("targets", "a.example,b.example")]),
    ];
    let (probes, calls) = RecordingProbes::new(SPEED_BYTES);
    let mut agent = Agent::new(
        cfg,
        Box::new(ScriptedSensors::new(timeline.clone())),
        Box::new(probes),
        Box::new(Offline),
        t0(),
    )
    .unwrap();

    let mut pauses = Vec::new();
    let mut now = t0();
    let end = t0() + Duration::days(2);
    let mut n = 0u64;
    while now < end {
        // A pause every ~7 hours, some spanning the nightly reset.
        if n % 420 == 200 {
            let secs = if n % 840 == 200 { 3600 } else { 6 * 3600 };
            let instr = Instruction {
                id: format!("p{n}"),
                device_id: "me-sched".into(),
                created_at: now,
                kind: InstructionKind::Pause { duration_s: secs },
                state: InstructionState::Delivered,
                outcome: None,
            };
            agent.apply_instruction(&instr, now);
            pauses.push((now, secs));
        }
        agent.tick(now).unwrap();
        now += Duration::minutes(1);
        n += 1;
    }
    let calls = calls.lock().unwrap().clone();
    let decisions = agent.decisions().cloned().collect();
    (Run { calls, decisions, pauses }, timeline)
}

#[test]
fn two_day_timeline_has_no_policy_violations() {
    for seed in [1u64, 7, 99] {
        let dir = tempfile::tempdir().unwrap();
        let (run, timeline) = simulate(seed, dir.path());
        assert!(run.decisions.len() >= 200);
        let windows = pause_windows(&run.pauses);
        let v = audit(&run.calls, &timeline, &windows, Duration::minutes(30), 15, cap_bytes());
        assert!(v.is_empty(), "seed {seed}: {v:#?}");

        // The decision log agrees with what actually ran.
        let ran: Vec<_> = run.decisions.iter().filter(|d| d.ran).map(|d| (d.at, d.experiment_id.clone())).collect();
        let mut executed: Vec<_> = run.calls.iter().map(|(t, id, _)| (*t, id.clone())).collect();
        executed.dedup();
        assert_eq!(ran, executed);
        assert!(!ran.is_empty());
    }
}

#[test]
fn cap_blocks_and_day_rollover_unblocks() {
    let dir = tempfile::tempdir().unwrap();
    let (run, _) = simulate(7, dir.path());
    let capped: Vec<_> = run
        .decisions
        .iter()
        .filter(|d| d.experiment_id == "speed" && !d.gates.data_cap)
        .collect();
    assert!(!capped.is_empty(), "timeline never reached the cap");
    let first_cap_day = capped[0].at.date_naive();
    let next_day_run = run
        .calls
        .iter()
        .find(|(t, id, _)| id == "speed" && t.date_naive() > first_cap_day);
    assert!(next_day_run.is_some(), "no speedtest after rollover");
    let day2: Vec<_> = run.decisions.iter().filter(|d| d.at.date_naive() > first_cap_day).collect();
    assert_eq!(day2.first().map(|d| d.data_used_today), Some(0));
}

#[test]
fn identical_inputs_give_identical_decision_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, _) = simulate(42, a.path());
    let (rb, _) = simulate(42, b.path());
    assert_eq!(ra.decisions, rb.decisions);
    assert_eq!(ra.calls, rb.calls);
}

#[test]
fn nightly_reset_clears_pause_but_keeps_spool_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let timeline = random_timeline(3, 1);
    let mut cfg = AgentConfig::new("me-reset", "http://127.0.0.1:9", dir.path());
    cfg.seed = Some(3);
    cfg.experiments = vec![spec("dns", ExperimentKind::Dns, &[("targets", "a.example")])];
    let (probes, _) = RecordingProbes::new(0);
    let mut agent = Agent::new(
        cfg,
        Box::new(ScriptedSensors::new(timeline)),
        Box::new(probes),
        Box::new(Offline),
        t0(),
    )
    .unwrap();
    let spec = agent.config().experiments[0].clone();
    for i in 0..5 {
        agent.run_experiment(&spec, t0() + Duration::minutes(i)).unwrap();
    }
    agent.account_data(1000, t0() + Duration::hours(1));
    let pause = Instruction {
        id: "p".into(),
        device_id: "me-reset".into(),
        created_at: t0(),
        kind: InstructionKind::Pause { duration_s: 86_400 },
        state: InstructionState::Delivered,
        outcome: None,
    };
    let at = t0() + Duration::hours(2);
    agent.apply_instruction(&pause, at);
    assert!(agent.state().is_paused(at));
    let reset_at = t0() + Duration::hours(3);
    assert_eq!(reset_at.hour(), 3);
    agent.tick(reset_at).unwrap();
    assert!(!agent.state().is_paused(reset_at));
    assert!(agent.spool().len() >= 5);
    assert_eq!(agent.state().ledger.used(reset_at), 1000);
}
