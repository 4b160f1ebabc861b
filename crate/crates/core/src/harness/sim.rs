//! The fixed-step simulation loop.
//!
//! Tick `k` advances the state from row `k` to row `k + 1`:
//!
//! 1. promote bridge commands received before tick `k`;
//! 2. drain the bridge mailbox (or the replay) and stage what arrived;
//! 3. run the autopilot when due, on the latest measurements;
//! 4. set actuator commands for the active mode and advance the actuators;
//! 5. integrate one RK4 step with the actuators held;
//! 6. resolve seafloor and surface contact;
//! 7. sample due sensors, publish, and log row `k + 1`.

use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use nalgebra::{Vector3, Vector6};
use thiserror::Error;

use super::config::{Mission, ScenarioConfig};
use super::log::{LogRow, MeasuredSnapshot, TrajectoryLog};
use crate::actuation::{actuator_step, allocate_fins, total_actuation, ActuatorState};
use crate::autopilot::{
    heading_step, AltitudeHold, DepthController, Setpoint, SetpointMode, SpeedController,
};
use crate::bridge::{
    encode_frame, BridgeConfig, BridgeServer, ClientId, CommandLatch, CommandLimits, ControlMode,
    Frame, ReplayError, ReplaySource, ReplayWriter,
};
use crate::hydrodynamics::{relative_velocity, HydroModel, ParamError, VehicleState, Wrench};
use crate::kinematics::{integrate_step, state_derivative, IntegrationFault};
use crate::sensors::{
    terrain_depth, Measurement, Reading, ScheduledSensor, SensorKind, TerrainField,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid vehicle parameters: {0}")]
    Params(#[from] ParamError),
    #[error("invalid mission: {0}")]
    Mission(#[from] super::config::ConfigErrors),
    #[error("state became non-finite at tick {tick}: {fault}")]
    NonFinite {
        tick: u64,
        fault: IntegrationFault,
        last_row: Box<LogRow>,
    },
    #[error("bridge: {0}")]
    Bridge(#[from] std::io::Error),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Where external commands come from.
#[derive(Debug, Default)]
pub enum CommandSource {
    #[default]
    None,
    /// Live TCP bridge.
    Bridge {
        config: BridgeConfig,
        /// Clients to wait for before the first tick.
        wait_for_clients: usize,
        wait_timeout: Duration,
    },
    /// A server the caller already bound, e.g. on an ephemeral port.
    Attached(BridgeServer),
    /// Frames recorded from an earlier run.
    Replay(Vec<(u64, Frame)>),
}

#[derive(Debug, Default)]
pub struct RunOptions {
    /// Hold each tick to `dt` of wall time.
    pub realtime: bool,
    pub commands: CommandSource,
    /// Write every received command frame to this file.
    pub record: Option<PathBuf>,
}

/// A command frame accepted into the latch.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandEvent {
    pub tick: u64,
    pub frame: Frame,
}

#[derive(Debug)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    /// Largest equation-of-motion residual seen over all ticks.
    pub max_residual: f64,
    pub commands: Vec<CommandEvent>,
    pub faults: Vec<Frame>,
    pub wall_time: Duration,
}

impl RunOutput {
    /// Simulated seconds per wall-clock second.
    pub fn realtime_factor(&self) -> f64 {
        let sim = self.log.rows.last().map_or(0.0, |r| r.time);
        sim / self.wall_time.as_secs_f64().max(1e-12)
    }
}

/// Autopilot state carried between updates.
#[derive(Debug, Default)]
struct Autopilot {
    depth: DepthController,
    speed: SpeedController,
    altitude: AltitudeHold,
    stern: f64,
    rudder: f64,
    thrust: f64,
    depth_target: Option<f64>,
}

impl Autopilot {
    fn update(
        &mut self,
        sp: &Setpoint,
        m: &MeasuredSnapshot,
        cfg: &ScenarioConfig,
        delta_max: f64,
    ) {
        let gains = &cfg.autopilot;
        let dt = 1.0 / gains.rate_hz;
        let (Some(depth), Some(imu)) = (m.depth, m.imu) else {
            return;
        };
        let target = match sp.mode {
            SetpointMode::Depth => sp.value,
            SetpointMode::Altitude => self.altitude.update(m.altitude, sp.value, depth),
        };
        self.depth_target = Some(target);
        let out = self
            .depth
            .step(depth, imu[1], imu[4], target, gains, delta_max, dt);
        self.stern = out.stern;
        let psi = m.heading.unwrap_or(imu[2]);
        self.rudder = heading_step(psi, imu[5], sp.heading, gains, delta_max);
        if let Some(v) = m.dvl_velocity {
            self.thrust = self
                .speed
                .step(v[0], sp.speed, gains, cfg.thruster.n_max, dt);
        }
    }
}

fn absorb(snapshot: &mut MeasuredSnapshot, m: &Measurement) {
    if !m.valid {
        return;
    }
    match m.reading {
        Reading::Depth { depth } => snapshot.depth = Some(depth),
        Reading::Imu {
            roll,
            pitch,
            yaw,
            p,
            q,
            r,
        } => snapshot.imu = Some([roll, pitch, yaw, p, q, r]),
        Reading::Mag { heading } => snapshot.heading = Some(heading),
        Reading::Dvl { altitude, velocity } => {
            snapshot.altitude = Some(altitude);
            snapshot.dvl_velocity = Some(velocity);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Contact {
    collision: bool,
    broach: bool,
}

/// Clamps the vehicle between the surface and the seafloor and removes the
/// world-vertical velocity that drives it further out of bounds.
fn resolve_contact(state: &mut VehicleState, terrain: &TerrainField) -> Contact {
    let floor = terrain_depth(terrain, state.position.x, state.position.y);
    let mut contact = Contact::default();
    let z = state.position.z;
    let clamp_vertical = |state: &mut VehicleState, keep: fn(f64) -> bool| {
        let v_body = Vector3::new(state.nu[0], state.nu[1], state.nu[2]);
        let mut v_world = state.attitude.transform_vector(&v_body);
        if !keep(v_world.z) {
            v_world.z = 0.0;
            let v = state.attitude.inverse_transform_vector(&v_world);
            state.nu[0] = v.x;
            state.nu[1] = v.y;
            state.nu[2] = v.z;
        }
    };
    if floor - z <= 0.0 {
        contact.collision = true;
        state.position.z = floor;
        clamp_vertical(state, |vz| vz <= 0.0);
    }
    if state.position.z <= 0.0 {
        contact.broach = true;
        state.position.z = 0.0;
        clamp_vertical(state, |vz| vz >= 0.0);
    }
    contact
}

struct Publisher {
    server: Option<BridgeServer>,
}

impl Publisher {
    fn publish(&self, tick: u64, stamp_ns: u64, measurements: &[Measurement], faults: &[Frame]) {
        let Some(server) = &self.server else { return };
        server.set_time(stamp_ns);
        let mut bytes = Vec::new();
        for frame in crate::bridge::tick_frames(tick, stamp_ns, measurements, faults) {
            if let Ok(b) = encode_frame(&frame) {
                bytes.extend_from_slice(&b);
            }
        }
        server.broadcast(&bytes);
    }
}

/// Runs a mission to completion and returns the trajectory log.
pub fn run_mission(
    cfg: &ScenarioConfig,
    mission: &Mission,
    options: RunOptions,
) -> Result<RunOutput, SimError> {
    mission.validate(cfg.dt)?;
    let model = HydroModel::new(cfg.vehicle.clone())?;
    let dt = cfg.dt;
    let dt_ns = cfg.dt_ns();
    let n_ticks = mission.ticks(dt);
    let ap_period = cfg.autopilot_period().max(1);
    let delta_max = cfg
        .fins
        .iter()
        .map(|f| f.delta_max)
        .fold(f64::INFINITY, f64::min);
    let limits = CommandLimits {
        delta_max: cfg.fins.iter().map(|f| f.delta_max).collect(),
        n_max: cfg.thruster.n_max,
    };

    let (server, mut replay) = match options.commands {
        CommandSource::None => (None, None),
        CommandSource::Bridge {
            config,
            wait_for_clients,
            wait_timeout,
        } => {
            let server = BridgeServer::bind(&config)?;
            if wait_for_clients > 0 {
                server.wait_for_clients(wait_for_clients, wait_timeout);
            }
            (Some(server), None)
        }
        CommandSource::Attached(server) => (Some(server), None),
        CommandSource::Replay(records) => (None, Some(ReplaySource::new(records))),
    };
    let publisher = Publisher { server };
    let mut recorder = options
        .record
        .as_deref()
        .map(ReplayWriter::create)
        .transpose()?;

    let mut sensors: Vec<ScheduledSensor> = SensorKind::ALL
        .iter()
        .map(|&k| ScheduledSensor::new(k, cfg.sensors.get(k).clone(), cfg.physics_rate(), cfg.seed))
        .collect();

    let mut state = cfg.initial_state.clone();
    let mut act = ActuatorState::new(cfg.fins.len());
    let mut latch = CommandLatch::new();
    let mut autopilot = Autopilot::default();
    let mut measured = MeasuredSnapshot::default();
    let mut log = TrajectoryLog::new(cfg.fins.len());
    log.rows.reserve(n_ticks as usize + 1);
    let mut commands = Vec::new();
    let mut all_faults = Vec::new();
    let mut max_residual: f64 = 0.0;

    let started = Instant::now();

    // Row 0: initial contact, sensors and publication.
    let contact = resolve_contact(&mut state, &cfg.terrain);
    let due: Vec<Measurement> = sensors
        .iter_mut()
        .map(|s| s.sample(&state, &cfg.terrain, 0))
        .collect();
    due.iter().for_each(|m| absorb(&mut measured, m));
    publisher.publish(0, 0, &due, &[]);
    let first_sp = *mission.setpoint_at(0, dt);
    log.rows.push(make_row(
        0,
        dt,
        &state,
        &act,
        &latch,
        Some(first_sp),
        None,
        &measured,
        cfg,
        contact,
    ));

    for tick in 0..n_ticks {
        // Commands.
        latch.begin_tick(tick);
        let inbound: Vec<(Option<ClientId>, Frame)> = match (&publisher.server, &mut replay) {
            (Some(server), _) => server
                .drain()
                .into_iter()
                .map(|i| (Some(i.client), i.frame))
                .collect(),
            (None, Some(src)) => src.take(tick).into_iter().map(|f| (None, f)).collect(),
            (None, None) => Vec::new(),
        };
        let mut tick_faults = Vec::new();
        for (client, frame) in inbound {
            if let Some(rec) = recorder.as_mut() {
                rec.record(tick, &frame)?;
            }
            match latch.apply_command(&frame, tick, &limits) {
                Ok(accepted) => {
                    tick_faults.extend(accepted.faults);
                    commands.push(CommandEvent { tick, frame });
                }
                Err(e) => {
                    let fault = Frame::fault(tick * dt_ns, e.code(), e.to_string());
                    if let (Some(server), Some(id)) = (&publisher.server, client) {
                        server.send_to(id, &fault);
                    }
                    all_faults.push(fault);
                }
            }
        }

        // Autopilot and actuator commands.
        let mode = latch.active_mode();
        let setpoint: Option<Setpoint> = match mode {
            ControlMode::Mission => Some(*mission.setpoint_at(tick, dt)),
            ControlMode::Setpoint => latch.setpoint().map(Setpoint::from),
            ControlMode::Fins | ControlMode::Wrench => None,
        };
        let mut wrench_cmd = Wrench::zero();
        match mode {
            ControlMode::Mission | ControlMode::Setpoint => {
                let sp = setpoint.expect("setpoint modes carry a setpoint");
                if tick % ap_period == 0 {
                    autopilot.update(&sp, &measured, cfg, delta_max);
                }
                act.delta_cmds = allocate_fins(&cfg.fins, autopilot.stern, autopilot.rudder);
                act.n_cmd = autopilot.thrust;
            }
            ControlMode::Fins => {
                let c = latch.fins().expect("fins mode has a command");
                act.delta_cmds.clone_from(&c.deltas);
                act.n_cmd = c.thruster;
            }
            ControlMode::Wrench => {
                let c = latch.wrench().expect("wrench mode has a command");
                wrench_cmd = Wrench::new(Vector3::from(c.force), Vector3::from(c.torque));
                act.delta_cmds.iter_mut().for_each(|d| *d = 0.0);
                act.n_cmd = 0.0;
            }
        }
        act = actuator_step(&act, &cfg.fins, &cfg.thruster, dt);

        // Dynamics.
        let tau_at = |s: &VehicleState| -> Wrench {
            let nu_r = relative_velocity(s, &cfg.environment);
            total_actuation(&cfg.fins, &act, &cfg.thruster, &nu_r, cfg.environment.rho)
                .expect("actuator state sized from the fin list")
                + wrench_cmd
        };
        {
            let tau = tau_at(&state);
            let nu_dot = model.acceleration(&state, &tau, &cfg.environment);
            let res = model.residual(&state, &tau, &cfg.environment, &nu_dot);
            max_residual = max_residual.max(res);
        }
        let next = integrate_step(&state, dt, |s| {
            let tau = tau_at(s);
            state_derivative(s, model.acceleration(s, &tau, &cfg.environment))
        });
        state = match next {
            Ok(s) => s,
            Err(fault) => {
                return Err(SimError::NonFinite {
                    tick,
                    fault,
                    last_row: Box::new(log.rows.last().cloned().expect("row 0 exists")),
                })
            }
        };
        let contact = resolve_contact(&mut state, &cfg.terrain);

        // Sensors, publication, log.
        let k = tick + 1;
        let stamp_ns = k * dt_ns;
        let due: Vec<Measurement> = sensors
            .iter_mut()
            .filter(|s| s.is_due(k))
            .map(|s| s.sample(&state, &cfg.terrain, stamp_ns))
            .collect();
        due.iter().for_each(|m| absorb(&mut measured, m));
        publisher.publish(k, stamp_ns, &due, &tick_faults);
        all_faults.extend(tick_faults);

        let depth_target = match mode {
            ControlMode::Mission | ControlMode::Setpoint => autopilot.depth_target,
            _ => None,
        };
        log.rows.push(make_row(
            k,
            dt,
            &state,
            &act,
            &latch,
            setpoint,
            depth_target,
            &measured,
            cfg,
            contact,
        ));

        if options.realtime {
            let target = started + Duration::from_nanos(stamp_ns);
            let now = Instant::now();
            if target > now {
                thread::sleep(target - now);
            }
        }
    }

    if let Some(rec) = recorder {
        rec.finish()?;
    }
    Ok(RunOutput {
        log,
        max_residual,
        commands,
        faults: all_faults,
        wall_time: started.elapsed(),
    })
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    tick: u64,
    dt: f64,
    state: &VehicleState,
    act: &ActuatorState,
    latch: &CommandLatch,
    setpoint: Option<Setpoint>,
    depth_target: Option<f64>,
    measured: &MeasuredSnapshot,
    cfg: &ScenarioConfig,
    contact: Contact,
) -> LogRow {
    let (roll, pitch, yaw) = state.euler();
    let nu: Vector6<f64> = state.nu;
    LogRow {
        tick,
        time: tick as f64 * dt,
        position: state.position.into(),
        euler: [roll, pitch, yaw],
        nu: nu.into(),
        deltas: act.deltas.clone(),
        shaft_speed: act.n,
        mode: latch.active_mode(),
        setpoint,
        depth_target,
        measured: measured.clone(),
        altitude: terrain_depth(&cfg.terrain, state.position.x, state.position.y)
            - state.position.z,
        collision: contact.collision,
        broach: contact.broach,
    }
}
