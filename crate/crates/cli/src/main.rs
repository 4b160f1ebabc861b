use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use torpedo_core::bridge::{read_replay, BridgeConfig};
use torpedo_core::harness::{
    emit_plot, load_mission_file, load_scenario_file, read_log, run_mission, write_log,
    CommandSource, RunOptions, ScenarioConfig, SimError, CHANNELS,
};

#[derive(Parser)]
#[command(
    name = "torpedo-sim",
    version,
    about = "Torpedo AUV dynamics simulator with a TCP sensor/command bridge"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mission and write the trajectory log.
    Simulate(SimulateArgs),
    /// Check a scenario (and optionally a mission) without running it.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        mission: Option<PathBuf>,
    },
    /// Render a trajectory CSV as SVG.
    Plot {
        /// Trajectory CSV written by `simulate`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = default_channels())]
        channels: Vec<String>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON. Built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    mission: PathBuf,
    /// Trajectory CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG plot output.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = default_channels())]
    channels: Vec<String>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Serve the bridge on this localhost port.
    #[arg(long, conflicts_with = "replay")]
    bridge_port: Option<u16>,
    /// Bind address for the bridge instead of localhost.
    #[arg(long, requires = "bridge_port")]
    bridge_host: Option<String>,
    /// Clients to wait for before the first tick.
    #[arg(long, default_value_t = 0, requires = "bridge_port")]
    wait_clients: usize,
    /// Seconds to wait for those clients.
    #[arg(long, default_value_t = 30.0)]
    wait_timeout: f64,
    /// Pace ticks to wall-clock time.
    #[arg(long, conflicts_with = "fast")]
    realtime: bool,
    /// Run as fast as possible (default).
    #[arg(long)]
    fast: bool,
    /// Record received commands to a replay file.
    #[arg(long, requires = "bridge_port")]
    record: Option<PathBuf>,
    /// Feed commands from a replay file instead of the bridge.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn default_channels() -> Vec<String> {
    CHANNELS.iter().map(|c| c.to_string()).collect()
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => load_scenario_file(p).map_err(|e| anyhow::anyhow!("{}:\n{e}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = load_config(args.scenario.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mission = load_mission_file(&args.mission, cfg.dt)
        .map_err(|e| anyhow::anyhow!("{}:\n{e}", args.mission.display()))?;
    let channels: Vec<&str> = args.channels.iter().map(String::as_str).collect();

    let commands = if let Some(port) = args.bridge_port {
        let mut config = BridgeConfig::localhost(port);
        if let Some(host) = &args.bridge_host {
            config.bind = format!("{host}:{port}").parse().context("bridge address")?;
        }
        config.queue_bound = cfg.queue_bound;
        eprintln!("bridge listening on {}", config.bind);
        CommandSource::Bridge {
            config,
            wait_for_clients: args.wait_clients,
            wait_timeout: Duration::from_secs_f64(args.wait_timeout),
        }
    } else if let Some(path) = &args.replay {
        CommandSource::Replay(read_replay(path)?)
    } else {
        CommandSource::None
    };

    let options = RunOptions {
        realtime: args.realtime,
        commands,
        record: args.record.clone(),
    };
    let out = match run_mission(&cfg, &mission, options) {
        Ok(out) => out,
        Err(SimError::NonFinite {
            tick,
            fault,
            last_row,
        }) => {
            bail!(
                "state became non-finite at tick {tick} ({fault}); last valid row: t = {} s, position {:?}",
                last_row.time,
                last_row.position
            );
        }
        Err(e) => return Err(e.into()),
    };

    write_log(&out.log, &args.out)?;
    if let Some(plot) = &args.plot {
        emit_plot(&out.log, &channels, plot)?;
    }
    let broaches = out.log.rows.iter().filter(|r| r.broach).count();
    eprintln!(
        "{} rows, {} collision rows, {broaches} broach rows, {} commands, {:.0}x real time, max residual {:.1e}",
        out.log.rows.len(),
        out.log.collision_count(),
        out.commands.len(),
        out.realtime_factor(),
        out.max_residual
    );
    Ok(())
}

fn validate(scenario: Option<PathBuf>, mission: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(scenario.as_deref())?;
    if let Some(m) = mission {
        let mission =
            load_mission_file(&m, cfg.dt).map_err(|e| anyhow::anyhow!("{}:\n{e}", m.display()))?;
        eprintln!(
            "mission ok: {} setpoints, {} s",
            mission.setpoints.len(),
            mission.end_time
        );
    }
    eprintln!(
        "scenario ok: dt {} s, {} fins, seed {}",
        cfg.dt,
        cfg.fins.len(),
        cfg.seed
    );
    Ok(())
}

fn plot(log: PathBuf, out: PathBuf, channels: Vec<String>) -> Result<()> {
    let log = read_log(&log)?;
    let channels: Vec<&str> = channels.iter().map(String::as_str).collect();
    emit_plot(&log, &channels, &out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Validate { scenario, mission } => validate(scenario, mission),
        Command::Plot { log, out, channels } => plot(log, out, channels),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
