//! One function per subcommand. Long-running services stop on Ctrl-C.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration as StdDuration;

use amigo_agent::{Agent, AgentConfig, HostSensors, HttpControlPlane, LiveProbes, ScriptedSensors, SensorSource, Timeline};
use amigo_analysis::{emit_report, Dataset, Format, Manifest};
use amigo_core::SystemClock;
use amigo_server::Store;
use amigo_simnet::{BindPlan, Scenario};
use chrono::{Duration, Utc};

use crate::CliError;

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(format!("runtime: {e}")))
}

pub fn server(listen: SocketAddr, data_dir: &Path) -> Result<(), CliError> {
    let store = Store::open(data_dir, Arc::new(SystemClock))
        .map_err(|e| CliError::Io(format!("opening store in {}: {e}", data_dir.display())))?;
    let rt = runtime()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| CliError::Io(format!("binding {listen}: {e}")))?;
        let handle = amigo_server::spawn(listener, store)
            .await
            .map_err(|e| CliError::Io(e.to_string()))?;
        println!("server listening on http://{}", handle.addr);
        let _ = tokio::signal::ctrl_c().await;
        handle
            .shutdown()
            .await
            .map_err(|e| CliError::Runtime(format!("server: {e}")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ClockMode {
    /// Wall clock; ticks every `--tick-s` seconds until interrupted.
    Real,
    /// Steps through the sensor timeline as fast as possible.
    Simulated,
}

pub struct AgentOptions {
    pub config: PathBuf,
    pub scripted_sensors: Option<PathBuf>,
    pub clock: ClockMode,
    pub tick_s: u64,
    pub max_ticks: Option<u64>,
}

pub fn agent(opts: &AgentOptions) -> Result<(), CliError> {
    let config = AgentConfig::load(&opts.config)?;
    if opts.tick_s == 0 {
        return Err(CliError::Validation("--tick-s must be positive".into()));
    }
    let timeline = opts.scripted_sensors.as_deref().map(Timeline::load).transpose()?;
    if opts.clock == ClockMode::Simulated && timeline.is_none() {
        return Err(CliError::Validation(
            "--clock simulated needs --scripted-sensors".into(),
        ));
    }
    let (sensors, start): (Box<dyn SensorSource>, _) = match &timeline {
        Some(t) if opts.clock == ClockMode::Simulated => (Box::new(ScriptedSensors::new(t.clone())), t.start),
        Some(t) => (Box::new(ScriptedSensors::new(t.clone())), Utc::now()),
        None => (Box::new(HostSensors::new(None, None)), Utc::now()),
    };
    let control = HttpControlPlane::new(&config.server_url, StdDuration::from_secs(10));
    let mut agent = Agent::new(config, sensors, Box::new(LiveProbes::default()), Box::new(control), start)?;

    let step = Duration::seconds(opts.tick_s as i64);
    let mut ticks = 0u64;
    let mut now = start;
    loop {
        if opts.max_ticks.is_some_and(|m| ticks >= m) {
            break;
        }
        if let Some(t) = &timeline {
            if opts.clock == ClockMode::Simulated && now > t.end() {
                break;
            }
        }
        if let Some(report) = agent.tick(now)? {
            if let Some(err) = report.error {
                tracing::warn!("report failed: {err}");
            }
        }
        ticks += 1;
        match opts.clock {
            ClockMode::Simulated => now += step,
            ClockMode::Real => {
                std::thread::sleep(StdDuration::from_secs(opts.tick_s));
                now = Utc::now();
            }
        }
    }
    let runs = agent.decisions().filter(|d| d.ran).count();
    println!(
        "{} ticks, {runs} experiment runs, {} records spooled",
        ticks,
        agent.spool().len()
    );
    Ok(())
}

pub fn simnet(scenario_path: &Path, bind: SocketAddr) -> Result<(), CliError> {
    let scenario = amigo_simnet::load_scenario(scenario_path)?;
    let rt = runtime()?;
    rt.block_on(async {
        let handle = amigo_simnet::serve(scenario, BindPlan::from(bind)).await?;
        let a = handle.addrs;
        println!("hop        {}", a.hop);
        println!("throughput {}", a.throughput);
        println!("dns        {}", a.dns);
        println!("http       http://{}", a.http);
        let _ = tokio::signal::ctrl_c().await;
        handle.shutdown().await;
        Ok(())
    })
}

pub fn analyze(inputs: &[PathBuf], registry: &Path, out: &Path, formats: &[Format]) -> Result<Manifest, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Validation("at least one --input is required".into()));
    }
    let ds = Dataset::load(inputs, registry)?;
    if !ds.quarantined.is_empty() {
        eprintln!(
            "{} records quarantined: network not in {}",
            ds.quarantined.len(),
            registry.display()
        );
    }
    let manifest = emit_report(&ds, out, formats)?;
    for s in &manifest.sections {
        println!("{:<18} {:>6} rows", s.name, s.rows);
    }
    Ok(manifest)
}

/// Prints one PASS/FAIL line per scenario invariant.
pub fn scenario_check(path: &Path) -> Result<(), CliError> {
    let scenario = Scenario::read_unchecked(path)?;
    let mut failed = 0;
    for (check, _) in scenario.checks() {
        let mark = if check.passed { "PASS" } else { "FAIL" };
        if check.passed {
            println!("{mark} {}", check.name);
        } else {
            failed += 1;
            println!("{mark} {}: {}", check.name, check.detail);
        }
    }
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} scenario check(s) failed")));
    }
    Ok(())
}
