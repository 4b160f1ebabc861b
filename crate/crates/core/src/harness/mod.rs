//! Scenario loading, the simulation loop, logging and plotting.

pub mod config;
pub mod log;
pub mod plot;
pub mod sim;

pub use config::{
    load_mission, load_mission_file, load_scenario, load_scenario_file, ConfigErrors, Mission,
    ScenarioConfig,
};
pub use log::{read_log, write_log, LogRow, TrajectoryLog};
pub use plot::{emit_plot, render_svg, PlotError, CHANNELS};
pub use sim::{run_mission, CommandSource, RunOptions, RunOutput, SimError};
