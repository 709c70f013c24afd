//! In-process fleet simulation: simnet, server and N agents on one
//! simulated clock, followed by analysis of everything the server stored.
//!
//! Agents tick in lockstep and in a fixed order, talk to the server over
//! real HTTP, and measure through [`ModelProbes`], so a given seed always
//! yields the same stored records and byte-identical reports. A live
//! preflight first runs each experiment once against simnet to prove the
//! wiring of each experiment spec actually works.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration as StdDuration;

use amigo_agent::{
    Agent, AgentConfig, HttpControlPlane, LiveProbes, ProbeRunner, ScriptedSensors, SensorReading,
    Timeline, TimelineStep,
};
use amigo_analysis::{emit_report, Dataset, Format, Manifest};
use amigo_core::{
    Connectivity, ExperimentKind, ExperimentSpec, InstructionKind, InstructionState,
    NetworkInfo, NetworkRegistry, NewInstruction, Payload, ScheduleRule, SimClock,
};
use amigo_server::{Store, LOG_FILE};
use amigo_simnet::{BindPlan, Scenario, ServiceAddrs};
use chrono::{DateTime, Duration, TimeZone, Timelike, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::model_probes::{ModelProbes, NetworkProfile, PROFILES};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub scenario: Scenario,
    pub agents: usize,
    pub days: u32,
    pub seed: u64,
    pub out: PathBuf,
    /// Simulated seconds per lockstep tick.
    pub tick_s: i64,
    pub start: DateTime<Utc>,
}

impl DemoOptions {
    pub fn new(scenario: Scenario, out: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            agents: 4,
            days: 2,
            seed: 7,
            out: out.into(),
            tick_s: 60,
            start: Utc.with_ymd_and_hms(2024, 3, 4, 0, 0, 0).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstructionSummary {
    pub device_id: String,
    pub kind: String,
    pub state: InstructionState,
    pub outcome: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub report_dir: PathBuf,
    pub records_stored: usize,
    pub decisions: usize,
    pub runs: usize,
    pub instructions: Vec<InstructionSummary>,
    pub manifest: Manifest,
}

fn io(context: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{context}: {e}"))
}

pub fn run_demo(opts: &DemoOptions) -> Result<DemoSummary, CliError> {
    if opts.agents == 0 {
        return Err(CliError::Validation("validate: at least one agent is required".into()));
    }
    if opts.days == 0 || opts.tick_s <= 0 {
        return Err(CliError::Validation("validate: days and tick must be positive".into()));
    }
    opts.scenario.validate().map_err(|e| CliError::from(e).in_stage("scenario-check"))?;
    prepare_out_dir(&opts.out)?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(io("runtime"))?;

    let simnet = runtime
        .block_on(amigo_simnet::serve(opts.scenario.clone(), BindPlan::localhost_ephemeral()))
        .map_err(|e| CliError::from(e).in_stage("simnet"))?;
    let addrs = simnet.addrs;

    let clock = SimClock::new(opts.start);
    let data_dir = opts.out.join("server");
    let store = Store::open(&data_dir, Arc::new(clock.clone()))
        .map_err(|e| CliError::Io(format!("server: {e}")))?;
    let server = runtime
        .block_on(async {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
            amigo_server::spawn(listener, store).await
        })
        .map_err(io("server"))?;
    let server_url = format!("http://{}", server.addr);

    let specs = experiment_specs(&opts.scenario, &addrs);
    preflight(&specs).map_err(|e| e.in_stage("preflight"))?;

    let scenario = Arc::new(opts.scenario.clone());
    let mut agents = Vec::with_capacity(opts.agents);
    for i in 0..opts.agents {
        let profile = PROFILES[i % PROFILES.len()].clone();
        let device_id = format!("me-{:02}", i + 1);
        let mut config = AgentConfig::new(&device_id, &server_url, opts.out.join("agents").join(&device_id));
        config.experiments = specs.clone();
        config.seed = Some(opts.seed);
        let timeline = sensor_timeline(opts.seed, i, &profile, opts.start, opts.days);
        let probes = ModelProbes::new(scenario.clone(), profile, &device_id, i);
        let control = HttpControlPlane::new(&server_url, StdDuration::from_secs(10));
        let mut agent = Agent::new(
            config,
            Box::new(ScriptedSensors::new(timeline)),
            Box::new(probes),
            Box::new(control),
            opts.start,
        )
        .map_err(|e| CliError::from(e).in_stage("agents"))?;
        agent
            .log_decisions_to(&opts.out.join("agents").join(&device_id).join("decisions.jsonl"))
            .map_err(|e| CliError::from(e).in_stage("agents"))?;
        agents.push(agent);
    }

    // Operator actions at fixed simulated instants.
    let mut script: Vec<(DateTime<Utc>, usize, InstructionKind)> = vec![
        (opts.start + Duration::hours(6), 0, InstructionKind::Pause { duration_s: 2 * 3600 }),
        (
            opts.start + Duration::hours(9),
            1 % opts.agents,
            InstructionKind::RunNow { experiment_id: "speedtest".into() },
        ),
        (
            opts.start + Duration::hours(20),
            opts.agents - 1,
            InstructionKind::UpdateConfig { key: "schedule.interval_s".into(), value: "2700".into() },
        ),
    ];
    script.reverse();

    let end = opts.start + Duration::days(i64::from(opts.days));
    let step = Duration::seconds(opts.tick_s);
    let mut now = opts.start;
    while now < end {
        clock.set(now);
        while script.last().is_some_and(|(at, _, _)| *at <= now) {
            let (_, target, kind) = script.pop().unwrap();
            let device_id = agents[target].config().device_id.clone();
            server
                .state
                .store()
                .enqueue_instruction(NewInstruction { id: None, device_id, kind })
                .map_err(|e| CliError::Runtime(format!("agents: enqueue: {e}")))?;
        }
        for agent in &mut agents {
            agent.tick(now).map_err(|e| CliError::from(e).in_stage("agents"))?;
        }
        now += step;
    }
    clock.set(end);
    for agent in &mut agents {
        let out = agent.report_tick(end).map_err(|e| CliError::from(e).in_stage("agents"))?;
        if out.spooled_after > 0 {
            return Err(CliError::Runtime(format!(
                "agents: {} records left unsent on {}: {}",
                out.spooled_after,
                agent.config().device_id,
                out.error.unwrap_or_default()
            )));
        }
    }
    let decisions: usize = agents.iter().map(|a| a.decisions().count()).sum();
    let runs: usize = agents.iter().map(|a| a.decisions().filter(|d| d.ran).count()).sum();
    drop(agents);

    let instructions = {
        let store = server.state.store();
        let mut list: Vec<InstructionSummary> = store
            .index()
            .all_instructions()
            .map(|i| InstructionSummary {
                device_id: i.device_id.clone(),
                kind: i.kind.name().to_string(),
                state: i.state,
                outcome: i.outcome.clone(),
            })
            .collect();
        list.sort_by(|a, b| (&a.device_id, &a.kind).cmp(&(&b.device_id, &b.kind)));
        list
    };
    runtime
        .block_on(server.shutdown())
        .map_err(|e| CliError::Runtime(format!("shutdown: server: {e}")))?;
    runtime.block_on(simnet.shutdown());
    drop(runtime);

    let registry_path = opts.out.join("registry.csv");
    write_registry(&registry_path)?;
    let ds = Dataset::load(&[data_dir.join(LOG_FILE)], &registry_path)
        .map_err(|e| CliError::from(e).in_stage("analyze"))?;
    let report_dir = opts.out.join("report");
    let manifest = emit_report(&ds, &report_dir, &[Format::Json, Format::Csv])
        .map_err(|e| CliError::from(e).in_stage("analyze"))?;
    Ok(DemoSummary {
        report_dir,
        records_stored: ds.records.len() + ds.quarantined.len(),
        decisions,
        runs,
        instructions,
        manifest,
    })
}

fn prepare_out_dir(out: &Path) -> Result<(), CliError> {
    if out.exists() {
        let mut entries = std::fs::read_dir(out).map_err(io("output directory"))?;
        if entries.next().is_some() {
            return Err(CliError::Validation(format!(
                "validate: output directory {} is not empty",
                out.display()
            )));
        }
    }
    std::fs::create_dir_all(out.join("agents")).map_err(io("output directory"))
}

fn write_registry(path: &Path) -> Result<(), CliError> {
    let mut registry = NetworkRegistry::new();
    for p in &PROFILES {
        registry
            .insert(
                p.network_id,
                NetworkInfo {
                    operator_name: p.operator.into(),
                    country: p.country.into(),
                    continent: p.continent,
                },
            )
            .expect("profile ids are unique");
    }
    let file = std::fs::File::create(path).map_err(io("registry"))?;
    registry
        .to_csv(file)
        .map_err(|e| CliError::Io(format!("registry: {e}")))
}

fn spec(id: &str, kind: ExperimentKind, interval_s: u64, params: &[(&str, String)]) -> ExperimentSpec {
    ExperimentSpec {
        id: id.into(),
        kind,
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        schedule: ScheduleRule {
            interval_s,
            ..ScheduleRule::default()
        },
    }
}

/// The demo fleet's experiments, addressed at the running simnet.
pub fn experiment_specs(scenario: &Scenario, addrs: &ServiceAddrs) -> Vec<ExperimentSpec> {
    let http_port = addrs.http.port();
    let join = |v: Vec<String>| v.join(",");
    let mut domains: Vec<String> = scenario.dns.records.keys().cloned().collect();
    domains.extend(scenario.dns.fail_domains.iter().cloned());
    let cdn_targets = scenario
        .assets
        .iter()
        .filter(|a| a.path.ends_with(".js"))
        .map(|a| {
            let name = match a.cache_policy.header_style {
                amigo_simnet::HeaderStyle::Cf => "cloudflare",
                _ => "jsdelivr",
            };
            format!("{name}=http://cdn.example:{http_port}{}", a.path)
        })
        .collect();
    let pages = scenario
        .assets
        .iter()
        .filter(|a| a.path.ends_with(".html"))
        .map(|a| format!("http://www.example:{http_port}{}", a.path))
        .collect();
    let resolver = addrs.dns.to_string();
    vec![
        spec(
            "speedtest",
            ExperimentKind::Speedtest,
            1800,
            &[("server", addrs.throughput.to_string()), ("duration_s", "10".into())],
        ),
        spec(
            "latency",
            ExperimentKind::Latency,
            1800,
            &[
                ("server", addrs.hop.to_string()),
                ("targets", join(scenario.targets.iter().map(|t| t.name.clone()).collect())),
            ],
        ),
        spec(
            "dns",
            ExperimentKind::Dns,
            1800,
            &[("resolver", resolver.clone()), ("targets", join(domains))],
        ),
        spec(
            "cdn",
            ExperimentKind::Cdn,
            1800,
            &[("resolver", resolver.clone()), ("targets", join(cdn_targets))],
        ),
        spec(
            "web",
            ExperimentKind::Web,
            3600,
            &[("resolver", resolver), ("targets", join(pages))],
        ),
    ]
}

/// Runs every experiment once with live probes against simnet. Speed tests
/// are shortened to one second.
fn preflight(specs: &[ExperimentSpec]) -> Result<(), CliError> {
    let mut probes = LiveProbes {
        timeout: StdDuration::from_secs(5),
    };
    for spec in specs {
        let mut spec = spec.clone();
        if spec.kind == ExperimentKind::Speedtest {
            spec.params.insert("duration_s".into(), "1".into());
        }
        let targets: Vec<Option<String>> = if spec.kind.needs_targets() {
            spec.targets().into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        for target in targets {
            let payload = probes.run(&spec, target.as_deref(), Utc::now());
            let failure = match &payload {
                Payload::Speedtest(s) => s.error.clone(),
                Payload::Latency(l) => (!l.complete).then(|| "trace incomplete".to_string()),
                Payload::Dns(d) => {
                    // names listed as failing must fail, the rest must resolve
                    let should_fail = target.as_deref().is_some_and(|t| t.starts_with("broken."));
                    (d.success == should_fail).then(|| format!("unexpected outcome {:?}", d.error))
                }
                Payload::Cdn(c) => (!c.is_success()).then(|| format!("status {} {:?}", c.http_status, c.error)),
                Payload::Web(w) => w.failed_phase.map(|p| format!("failed at {p:?}")),
                _ => None,
            };
            if let Some(why) = failure {
                return Err(CliError::Runtime(format!(
                    "{} {}: {why}",
                    spec.id,
                    target.unwrap_or_default()
                )));
            }
        }
    }
    Ok(())
}

/// Two simulated days of a phone in someone's pocket: mobile most of the
/// time, WiFi in the evening, charging overnight, the odd coverage gap.
fn sensor_timeline(seed: u64, index: usize, profile: &NetworkProfile, start: DateTime<Utc>, days: u32) -> Timeline {
    let mut rng = StdRng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut battery: f64 = rng.random_range(50.0..95.0);
    let mut steps = Vec::new();
    let step_s = 600;
    let mut at = 0i64;
    while at < i64::from(days) * 86_400 {
        let hour = (start + Duration::seconds(at)).hour();
        let charging = hour < 6;
        battery = if charging {
            (battery + 6.0).min(100.0)
        } else {
            (battery - rng.random_range(0.0..2.5)).max(3.0)
        };
        let connectivity = if (19..23).contains(&hour) && rng.random_bool(0.7) {
            Connectivity::Wifi
        } else if rng.random_bool(0.04) {
            Connectivity::None
        } else {
            Connectivity::Mobile
        };
        steps.push(TimelineStep {
            at_s: at,
            reading: SensorReading {
                battery_pct: Some(battery.round() as u8),
                connectivity: Some(connectivity),
                operator_name: Some(profile.operator.to_string()),
                network_id: Some(profile.network_id.to_string()),
                gps: None,
            },
        });
        at += step_s;
    }
    Timeline::new(start, steps)
}
