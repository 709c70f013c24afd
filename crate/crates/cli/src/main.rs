use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use amigo_analysis::Format;
use amigo_bench::commands::{self, AgentOptions, ClockMode};
use amigo_bench::demo::{run_demo, DemoOptions};
use amigo_bench::{CliError, DEFAULT_SCENARIO};
use amigo_simnet::Scenario;
use clap::{Parser, Subcommand};

/// Measurement platform test bench: control server, endpoint agent, mock
/// network, offline analysis and a self-contained demo.
///
/// Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "amigo-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the control server.
    Server {
        #[arg(long, env = "AMIGO_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Directory holding the append-only store.
        #[arg(long, env = "AMIGO_DATA_DIR", default_value = "amigo-data")]
        data_dir: PathBuf,
    },
    /// Run one endpoint agent with live probes.
    Agent {
        /// Agent config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Sensor timeline (TOML or JSON) replacing the host sensors.
        #[arg(long)]
        scripted_sensors: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "real")]
        clock: ClockMode,
        /// Seconds between control-loop ticks.
        #[arg(long, default_value_t = 60)]
        tick_s: u64,
        /// Stop after this many ticks.
        #[arg(long)]
        max_ticks: Option<u64>,
    },
    /// Serve the mock network described by a scenario.
    Simnet {
        #[arg(long)]
        scenario: PathBuf,
        /// Base address; the hop, throughput, DNS and HTTP services take
        /// consecutive ports from here (port 0 picks ephemeral ports).
        #[arg(long, default_value = "127.0.0.1:7000")]
        bind: SocketAddr,
    },
    /// Aggregate record files into report sections.
    Analyze {
        /// Record JSONL files or directories of them (agent spools or the
        /// server store).
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// CSV with columns network_id, operator, country, continent.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "json,csv")]
        format: Vec<Format>,
    },
    /// Validate a scenario file, printing each check.
    ScenarioCheck {
        scenario: PathBuf,
    },
    /// Simulate a small fleet end to end and analyse what it collected.
    Demo {
        /// Scenario file; the built-in default when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        agents: usize,
        #[arg(long, default_value_t = 2)]
        days: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory; must be empty or absent.
        #[arg(long)]
        out: PathBuf,
        /// Simulated seconds per tick.
        #[arg(long, default_value_t = 60)]
        tick_s: i64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Server { listen, data_dir } => commands::server(listen, &data_dir),
        Command::Agent {
            config,
            scripted_sensors,
            clock,
            tick_s,
            max_ticks,
        } => commands::agent(&AgentOptions {
            config,
            scripted_sensors,
            clock,
            tick_s,
            max_ticks,
        }),
        Command::Simnet { scenario, bind } => commands::simnet(&scenario, bind),
        Command::Analyze {
            input,
            registry,
            out,
            format,
        } => commands::analyze(&input, &registry, &out, &format).map(|_| ()),
        Command::ScenarioCheck { scenario } => commands::scenario_check(&scenario),
        Command::Demo {
            scenario,
            agents,
            days,
            seed,
            out,
            tick_s,
        } => {
            let scenario = match scenario {
                Some(path) => {
                    commands::scenario_check(&path).map_err(|e| e.in_stage("scenario-check"))?;
                    Scenario::read_unchecked(&path)?
                }
                None => Scenario::from_toml(DEFAULT_SCENARIO)?,
            };
            let mut opts = DemoOptions::new(scenario, out);
            opts.agents = agents;
            opts.days = days;
            opts.seed = seed;
            opts.tick_s = tick_s;
            let summary = run_demo(&opts)?;
            eprintln!(
                "{} records stored, {} decisions, {} runs",
                summary.records_stored, summary.decisions, summary.runs
            );
            for i in &summary.instructions {
                eprintln!(
                    "instruction {} -> {}: {:?} {}",
                    i.kind,
                    i.device_id,
                    i.state,
                    i.outcome.as_deref().unwrap_or("")
                );
            }
            println!("{}", summary.report_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version land here too
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
