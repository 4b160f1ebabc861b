//! Scenario and mission files.
//!
//! Every section is optional and falls back to a REMUS 100-like vehicle.
//! Unknown keys and invalid values are collected into one error list, each
//! entry carrying the dotted path of the offending field.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{FinSpec, ThrusterSpec};
use crate::autopilot::{AutopilotGains, Setpoint};
use crate::hydrodynamics::{Environment, HydroParams, VehicleState};
use crate::sensors::{SensorConfig, SensorKind, Sigma, TerrainField, TerrainGrid};

/// Tolerance when checking that rates and durations land on whole ticks.
const TICK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// Dotted field path, e.g. `vehicle.fins[2].area`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigErrors {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.issues.len())?;
        for issue in &self.issues {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn mentions(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path)
    }
}

#[derive(Default)]
struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, format!("must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.push(path, format!("must be finite and >= 0, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, values: &[f64]) {
        if values.iter().any(|v| !v.is_finite()) {
            self.push(path, "must be finite");
        }
    }

    fn finish<T>(self, value: T) -> Result<T, ConfigErrors> {
        if self.0.is_empty() {
            Ok(value)
        } else {
            Err(ConfigErrors { issues: self.0 })
        }
    }
}

/// Parses JSON, reporting type errors with their path and every unknown key.
fn parse_strict<T: DeserializeOwned>(text: &str, issues: &mut Issues) -> Option<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let mut on_unknown = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let result = serde_path_to_error::deserialize(serde_ignored::Deserializer::new(
        &mut de,
        &mut on_unknown,
    ));
    let value = match result {
        Ok(v) => match de.end() {
            Ok(()) => Some(v),
            Err(e) => {
                issues.push("<document>", e.to_string());
                None
            }
        },
        Err(e) => {
            let path = e.path().to_string();
            let path = if path == "." {
                "<document>".to_string()
            } else {
                path
            };
            issues.push(path, e.into_inner().to_string());
            None
        }
    };
    for path in unknown {
        issues.push(path, "unknown key");
    }
    value
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioFile {
    pub dt: f64,
    pub seed: u64,
    pub environment: EnvironmentFile,
    pub vehicle: VehicleFile,
    pub autopilot: AutopilotGains,
    pub sensors: SensorsFile,
    pub terrain: TerrainFile,
    pub initial_state: InitialStateFile,
    pub bridge: BridgeFile,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            dt: 0.01,
            seed: 0,
            environment: EnvironmentFile::default(),
            vehicle: VehicleFile::default(),
            autopilot: AutopilotGains::default(),
            sensors: SensorsFile::default(),
            terrain: TerrainFile::default(),
            initial_state: InitialStateFile::default(),
            bridge: BridgeFile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentFile {
    pub rho: f64,
    pub gravity: f64,
    pub current: [f64; 3],
}

impl Default for EnvironmentFile {
    fn default() -> Self {
        let env = Environment::default();
        Self {
            rho: env.rho,
            gravity: env.gravity,
            current: env.current.into(),
        }
    }
}

/// Inertia as principal moments `[Ix, Iy, Iz]` or a full 3x3 tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertiaFile {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl InertiaFile {
    fn matrix(&self) -> Matrix3<f64> {
        match self {
            InertiaFile::Diagonal(d) => Matrix3::from_diagonal(&Vector3::from(*d)),
            InertiaFile::Full(rows) => Matrix3::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleFile {
    pub mass: f64,
    pub inertia: InertiaFile,
    pub length: f64,
    pub diameter: f64,
    /// Omit to derive from a prolate spheroid of the hull dimensions.
    pub added_mass: Option<[f64; 6]>,
    pub linear_damping: [f64; 6],
    pub quadratic_damping: [f64; 6],
    /// Defaults to `mass * gravity`.
    pub weight: Option<f64>,
    /// Defaults to the weight (neutral trim).
    pub buoyancy: Option<f64>,
    pub center_of_buoyancy: [f64; 3],
    pub fins: Vec<FinSpec>,
    pub thruster: ThrusterSpec,
}

/// Hull of length 1.6 m and diameter 0.19 m treated as a neutrally buoyant
/// prolate spheroid for mass and inertia.
pub const DEFAULT_LENGTH: f64 = 1.6;
pub const DEFAULT_DIAMETER: f64 = 0.19;

impl Default for VehicleFile {
    fn default() -> Self {
        let rho = Environment::default().rho;
        let a = 0.5 * DEFAULT_LENGTH;
        let b = 0.5 * DEFAULT_DIAMETER;
        let mass = rho * 4.0 / 3.0 * PI * a * b * b;
        let ix = 0.4 * mass * b * b;
        let iy = 0.2 * mass * (a * a + b * b);
        Self {
            mass,
            inertia: InertiaFile::Diagonal([ix, iy, iy]),
            length: DEFAULT_LENGTH,
            diameter: DEFAULT_DIAMETER,
            added_mass: None,
            linear_damping: [1.6, 3.0, 3.0, 0.5, 10.8, 10.8],
            quadratic_damping: [6.1, 171.5, 171.5, 0.1, 22.0, 22.0],
            weight: None,
            buoyancy: None,
            center_of_buoyancy: [0.0, 0.0, -0.02],
            fins: default_fins(),
            thruster: ThrusterSpec::default(),
        }
    }
}

/// Four tail fins in a `+` layout: starboard, bottom, port, top.
pub fn default_fins() -> Vec<FinSpec> {
    [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]
        .into_iter()
        .map(|theta| FinSpec {
            x_off: -0.7,
            r: 0.12,
            theta,
            area: 0.00665,
            lift_coeff: 3.12,
            delta_max: 15f64.to_radians(),
            tau_actuator: 0.1,
        })
        .collect()
}

/// Sensor overrides; omitted fields keep the per-sensor defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorFile {
    pub rate_hz: Option<f64>,
    pub sigma: Option<Sigma>,
    pub dropout_prob: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorsFile {
    pub depth: SensorFile,
    pub imu: SensorFile,
    pub mag: SensorFile,
    pub dvl: SensorFile,
}

pub fn default_sensor(kind: SensorKind) -> SensorConfig {
    let (rate_hz, sigma, seed) = match kind {
        SensorKind::Depth => (10.0, Sigma::Uniform(0.01), 1),
        SensorKind::Imu => (
            50.0,
            Sigma::PerChannel(vec![0.002, 0.002, 0.005, 0.001, 0.001, 0.001]),
            2,
        ),
        SensorKind::Mag => (10.0, Sigma::Uniform(0.005), 3),
        SensorKind::Dvl => (5.0, Sigma::PerChannel(vec![0.02, 0.005, 0.005, 0.005]), 4),
    };
    SensorConfig {
        rate_hz,
        sigma,
        dropout_prob: 0.0,
        seed,
    }
}

impl SensorFile {
    fn resolve(&self, kind: SensorKind) -> SensorConfig {
        let d = default_sensor(kind);
        SensorConfig {
            rate_hz: self.rate_hz.unwrap_or(d.rate_hz),
            sigma: self.sigma.clone().unwrap_or(d.sigma),
            dropout_prob: self.dropout_prob.unwrap_or(d.dropout_prob),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

impl SensorsFile {
    fn get(&self, kind: SensorKind) -> &SensorFile {
        match kind {
            SensorKind::Depth => &self.depth,
            SensorKind::Imu => &self.imu,
            SensorKind::Mag => &self.mag,
            SensorKind::Dvl => &self.dvl,
        }
    }
}

/// `kind` is one of `flat`, `slope`, `bumps` or `heightmap`; the other
/// fields apply to the kinds that use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainFile {
    pub kind: String,
    pub depth: f64,
    pub gradient: [f64; 2],
    pub amplitude: f64,
    pub wavelength: f64,
    /// Heightmap CSV, relative to the scenario file.
    pub path: Option<PathBuf>,
}

impl Default for TerrainFile {
    fn default() -> Self {
        Self {
            kind: "flat".into(),
            depth: 50.0,
            gradient: [0.0; 2],
            amplitude: 0.0,
            wavelength: 40.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialStateFile {
    pub position: [f64; 3],
    /// Roll, pitch, yaw, rad.
    pub euler: [f64; 3],
    pub nu: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeFile {
    pub queue_bound: usize,
}

impl Default for BridgeFile {
    fn default() -> Self {
        Self {
            queue_bound: crate::bridge::server::DEFAULT_QUEUE_BOUND,
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved configuration

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSuite {
    pub depth: SensorConfig,
    pub imu: SensorConfig,
    pub mag: SensorConfig,
    pub dvl: SensorConfig,
}

impl SensorSuite {
    pub fn get(&self, kind: SensorKind) -> &SensorConfig {
        match kind {
            SensorKind::Depth => &self.depth,
            SensorKind::Imu => &self.imu,
            SensorKind::Mag => &self.mag,
            SensorKind::Dvl => &self.dvl,
        }
    }

    pub fn get_mut(&mut self, kind: SensorKind) -> &mut SensorConfig {
        match kind {
            SensorKind::Depth => &mut self.depth,
            SensorKind::Imu => &mut self.imu,
            SensorKind::Mag => &mut self.mag,
            SensorKind::Dvl => &mut self.dvl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub environment: Environment,
    pub vehicle: HydroParams,
    pub fins: Vec<FinSpec>,
    pub thruster: ThrusterSpec,
    pub autopilot: AutopilotGains,
    pub sensors: SensorSuite,
    pub terrain: TerrainField,
    pub dt: f64,
    pub seed: u64,
    pub initial_state: VehicleState,
    pub queue_bound: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        resolve(&ScenarioFile::default(), Path::new(".")).expect("built-in defaults are valid")
    }
}

impl ScenarioConfig {
    /// Physics ticks per second.
    pub fn physics_rate(&self) -> u64 {
        (1.0 / self.dt).round() as u64
    }

    /// Tick length in integer nanoseconds.
    pub fn dt_ns(&self) -> u64 {
        (self.dt * 1e9).round() as u64
    }

    pub fn autopilot_period(&self) -> u64 {
        (self.physics_rate() as f64 / self.autopilot.rate_hz).round() as u64
    }
}

/// Parses and validates a scenario; relative paths resolve against the
/// working directory.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    load_scenario_in(text, Path::new("."))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig, ConfigErrors> {
    let text = read_text(path)?;
    load_scenario_in(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn load_scenario_in(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigErrors> {
    let mut issues = Issues::default();
    let file: Option<ScenarioFile> = parse_strict(text, &mut issues);
    match file {
        Some(file) => match resolve(&file, base_dir) {
            Ok(cfg) => issues.finish(cfg),
            Err(e) => {
                issues.0.extend(e.issues);
                issues.finish(ScenarioConfig::default())
            }
        },
        None => issues.finish(ScenarioConfig::default()),
    }
}

fn read_text(path: &Path) -> Result<String, ConfigErrors> {
    std::fs::read_to_string(path).map_err(|e| ConfigErrors {
        issues: vec![ConfigIssue {
            path: path.display().to_string(),
            message: e.to_string(),
        }],
    })
}

fn rate_divides(physics_rate: u64, rate_hz: f64) -> bool {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return false;
    }
    let period = physics_rate as f64 / rate_hz;
    period >= 1.0 - TICK_TOL && (period - period.round()).abs() < TICK_TOL * period.max(1.0)
}

fn resolve(file: &ScenarioFile, base_dir: &Path) -> Result<ScenarioConfig, ConfigErrors> {
    let mut is = Issues::default();

    // Timing
    let dt = file.dt;
    is.positive("dt", dt);
    let mut physics_rate = None;
    if dt.is_finite() && dt > 0.0 {
        let rate = 1.0 / dt;
        if (rate - rate.round()).abs() < TICK_TOL * rate
            && (dt * 1e9 - (dt * 1e9).round()).abs() < 1e-6
        {
            physics_rate = Some(rate.round() as u64);
        } else {
            is.push(
                "dt",
                format!("1/dt must be a whole number of Hz with whole-ns ticks, got dt = {dt}"),
            );
        }
    }

    // Environment
    let env = Environment {
        rho: file.environment.rho,
        gravity: file.environment.gravity,
        current: Vector3::from(file.environment.current),
    };
    is.positive("environment.rho", env.rho);
    is.positive("environment.gravity", env.gravity);
    is.finite("environment.current", &file.environment.current);

    // Hull
    let v = &file.vehicle;
    is.positive("vehicle.mass", v.mass);
    is.positive("vehicle.length", v.length);
    is.positive("vehicle.diameter", v.diameter);
    let inertia = v.inertia.matrix();
    if inertia.iter().any(|x| !x.is_finite()) {
        is.push("vehicle.inertia", "must be finite");
    } else if (inertia - inertia.transpose()).amax() > 1e-12 * inertia.amax().max(1.0)
        || nalgebra::Cholesky::new(inertia).is_none()
    {
        is.push("vehicle.inertia", "must be symmetric positive definite");
    }
    match v.added_mass {
        Some(am) if am.iter().any(|x| !x.is_finite() || *x < 0.0) => {
            is.push("vehicle.added_mass", "coefficients must be finite and >= 0")
        }
        None if v.diameter >= v.length => is.push(
            "vehicle.added_mass",
            "must be given explicitly unless length > diameter",
        ),
        _ => {}
    }
    for (i, x) in v.linear_damping.iter().enumerate() {
        is.non_negative(&format!("vehicle.linear_damping[{i}]"), *x);
    }
    for (i, x) in v.quadratic_damping.iter().enumerate() {
        is.non_negative(&format!("vehicle.quadratic_damping[{i}]"), *x);
    }
    let weight = v.weight.unwrap_or(v.mass * env.gravity);
    let buoyancy = v.buoyancy.unwrap_or(weight);
    is.non_negative("vehicle.weight", weight);
    is.non_negative("vehicle.buoyancy", buoyancy);
    is.finite("vehicle.center_of_buoyancy", &v.center_of_buoyancy);

    // Fins and thruster
    if v.fins.is_empty() {
        is.push("vehicle.fins", "at least one fin is required");
    }
    for (i, fin) in v.fins.iter().enumerate() {
        let p = |f: &str| format!("vehicle.fins[{i}].{f}");
        is.finite(&p("x_off"), &[fin.x_off]);
        is.finite(&p("theta"), &[fin.theta]);
        is.non_negative(&p("r"), fin.r);
        is.positive(&p("area"), fin.area);
        is.non_negative(&p("lift_coeff"), fin.lift_coeff);
        if !(fin.delta_max > 0.0 && fin.delta_max < FRAC_PI_2) {
            is.push(
                p("delta_max"),
                format!("must lie in (0, pi/2), got {}", fin.delta_max),
            );
        }
        is.positive(&p("tau_actuator"), fin.tau_actuator);
        if dt > 0.0 && fin.tau_actuator > 0.0 && dt > fin.tau_actuator {
            is.push(p("tau_actuator"), format!("must be at least dt = {dt}"));
        }
    }
    let th = &v.thruster;
    is.non_negative("vehicle.thruster.k_thrust", th.k_thrust);
    is.positive("vehicle.thruster.tau_motor", th.tau_motor);
    is.positive("vehicle.thruster.n_max", th.n_max);
    is.finite("vehicle.thruster.k_roll_reaction", &[th.k_roll_reaction]);
    if dt > 0.0 && th.tau_motor > 0.0 && dt > th.tau_motor {
        is.push(
            "vehicle.thruster.tau_motor",
            format!("must be at least dt = {dt}"),
        );
    }

    // Autopilot
    for (field, reason) in file.autopilot.violations() {
        is.push(format!("autopilot.{field}"), reason);
    }
    if let Some(rate) = physics_rate {
        if file.autopilot.rate_hz > 0.0 && !rate_divides(rate, file.autopilot.rate_hz) {
            is.push(
                "autopilot.rate_hz",
                format!(
                    "{} Hz does not divide the {rate} Hz physics rate",
                    file.autopilot.rate_hz
                ),
            );
        }
    }

    // Sensors
    let mut resolved = Vec::new();
    for kind in SensorKind::ALL {
        let cfg = file.sensors.get(kind).resolve(kind);
        let p = |f: &str| format!("sensors.{kind}.{f}");
        if !(cfg.rate_hz.is_finite() && cfg.rate_hz > 0.0) {
            is.push(
                p("rate_hz"),
                format!("must be positive, got {}", cfg.rate_hz),
            );
        } else if let Some(rate) = physics_rate {
            if !rate_divides(rate, cfg.rate_hz) {
                is.push(
                    p("rate_hz"),
                    format!(
                        "{} Hz does not divide the {rate} Hz physics rate",
                        cfg.rate_hz
                    ),
                );
            }
        }
        if !cfg.sigma.fits(kind.channels()) {
            is.push(p("sigma"), format!("needs 1 or {} values", kind.channels()));
        }
        if cfg
            .sigma
            .values()
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            is.push(p("sigma"), "must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&cfg.dropout_prob) {
            is.push(
                p("dropout_prob"),
                format!("must lie in [0, 1], got {}", cfg.dropout_prob),
            );
        }
        resolved.push(cfg);
    }
    let mut resolved = resolved.into_iter();
    let sensors = SensorSuite {
        depth: resolved.next().expect("four sensors"),
        imu: resolved.next().expect("four sensors"),
        mag: resolved.next().expect("four sensors"),
        dvl: resolved.next().expect("four sensors"),
    };

    // Terrain
    let t = &file.terrain;
    let terrain = match t.kind.as_str() {
        "flat" => Some(TerrainField::Flat { depth: t.depth }),
        "slope" => Some(TerrainField::Slope {
            depth: t.depth,
            gradient: t.gradient,
        }),
        "bumps" => Some(TerrainField::Bumps {
            depth: t.depth,
            amplitude: t.amplitude,
            wavelength: t.wavelength,
        }),
        "heightmap" => match &t.path {
            None => {
                is.push("terrain.path", "required for heightmap terrain");
                None
            }
            Some(rel) => match TerrainGrid::load(&base_dir.join(rel)) {
                Ok(grid) => Some(TerrainField::Grid(grid)),
                Err(e) => {
                    is.push("terrain.path", e.to_string());
                    None
                }
            },
        },
        other => {
            is.push(
                "terrain.kind",
                format!("unknown terrain {other:?}; expected flat, slope, bumps or heightmap"),
            );
            None
        }
    };
    if let Some(Err(reason)) = terrain.as_ref().map(TerrainField::validate) {
        is.push("terrain", reason);
    }

    // Initial state
    let init = &file.initial_state;
    is.finite("initial_state.position", &init.position);
    is.finite("initial_state.euler", &init.euler);
    is.finite("initial_state.nu", &init.nu);

    if file.bridge.queue_bound == 0 {
        is.push("bridge.queue_bound", "must be at least 1");
    }

    let vehicle = HydroParams {
        mass: v.mass,
        inertia,
        length: v.length,
        diameter: v.diameter,
        added_mass: v.added_mass,
        linear_damping: v.linear_damping,
        quadratic_damping: v.quadratic_damping,
        weight,
        buoyancy,
        r_b: Vector3::from(v.center_of_buoyancy),
    };
    if is.0.is_empty() {
        if let Err(e) = vehicle.validate() {
            is.push("vehicle", e.to_string());
        }
    }

    let initial_state = VehicleState::new(
        Vector3::from(init.position),
        init.euler,
        Vector6::from(init.nu),
    );
    let cfg = ScenarioConfig {
        environment: env,
        vehicle,
        fins: v.fins.clone(),
        thruster: *th,
        autopilot: file.autopilot,
        sensors,
        terrain: terrain.unwrap_or(TerrainField::Flat { depth: 0.0 }),
        dt,
        seed: file.seed,
        initial_state,
        queue_bound: file.bridge.queue_bound,
    };
    is.finish(cfg)
}

// ---------------------------------------------------------------------------
// Missions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionEntry {
    /// Activation time, s.
    pub t: f64,
    pub setpoint: Setpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mission {
    pub end_time: f64,
    pub setpoints: Vec<MissionEntry>,
}

impl Mission {
    /// Single setpoint held for the whole run.
    pub fn constant(end_time: f64, setpoint: Setpoint) -> Self {
        Self {
            end_time,
            setpoints: vec![MissionEntry { t: 0.0, setpoint }],
        }
    }

    pub fn validate(&self, dt: f64) -> Result<(), ConfigErrors> {
        let mut is = Issues::default();
        is.positive("end_time", self.end_time);
        if dt > 0.0 && self.end_time.is_finite() {
            let ticks = self.end_time / dt;
            if (ticks - ticks.round()).abs() > 1e-6 {
                is.push(
                    "end_time",
                    format!("must be a whole number of {dt} s ticks"),
                );
            }
        }
        if self.setpoints.is_empty() {
            is.push("setpoints", "at least one setpoint is required");
        } else if self.setpoints[0].t != 0.0 {
            is.push("setpoints[0].t", "first setpoint must start at t = 0");
        }
        for (i, w) in self.setpoints.windows(2).enumerate() {
            if w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater) {
                is.push(
                    format!("setpoints[{}].t", i + 1),
                    "times must be strictly increasing",
                );
            }
        }
        for (i, e) in self.setpoints.iter().enumerate() {
            let sp = &e.setpoint;
            is.finite(&format!("setpoints[{i}].t"), &[e.t]);
            is.finite(&format!("setpoints[{i}].setpoint.value"), &[sp.value]);
            is.finite(&format!("setpoints[{i}].setpoint.heading"), &[sp.heading]);
            is.non_negative(&format!("setpoints[{i}].setpoint.speed"), sp.speed);
        }
        is.finish(())
    }

    /// Number of physics ticks, so the log has `ticks + 1` rows.
    pub fn ticks(&self, dt: f64) -> u64 {
        (self.end_time / dt).round() as u64
    }

    /// Setpoint in force at `tick`.
    pub fn setpoint_at(&self, tick: u64, dt: f64) -> &Setpoint {
        let t = tick as f64 * dt;
        let idx = self
            .setpoints
            .iter()
            .rposition(|e| e.t <= t + 0.5 * dt)
            .unwrap_or(0);
        &self.setpoints[idx].setpoint
    }
}

pub fn load_mission(text: &str, dt: f64) -> Result<Mission, ConfigErrors> {
    let mut is = Issues::default();
    let mission: Option<Mission> = parse_strict(text, &mut is);
    match mission {
        Some(m) => {
            if let Err(e) = m.validate(dt) {
                is.0.extend(e.issues);
            }
            is.finish(m)
        }
        None => Err(ConfigErrors { issues: is.0 }),
    }
}

pub fn load_mission_file(path: &Path, dt: f64) -> Result<Mission, ConfigErrors> {
    load_mission(&read_text(path)?, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autopilot::SetpointMode;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = load_scenario("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.physics_rate(), 100);
        assert_eq!(cfg.dt_ns(), 10_000_000);
        assert_eq!(cfg.fins.len(), 4);
        assert_eq!(cfg.vehicle.weight, cfg.vehicle.buoyancy);
    }

    #[test]
    fn mass_override_keeps_other_defaults() {
        let cfg = load_scenario(r#"{"vehicle": {"mass": 40.0}}"#).unwrap();
        let d = ScenarioConfig::default();
        assert_eq!(cfg.vehicle.mass, 40.0);
        assert_eq!(cfg.vehicle.weight, 40.0 * 9.81);
        assert_eq!(cfg.vehicle.inertia, d.vehicle.inertia);
        assert_eq!(cfg.fins, d.fins);
        assert_eq!(cfg.autopilot, d.autopilot);
        assert_eq!(cfg.sensors, d.sensors);
    }

    #[test]
    fn nested_partial_overrides() {
        let cfg = load_scenario(
            r#"{"autopilot": {"depth": {"kp": 1.5}}, "sensors": {"depth": {"sigma": 0.02}}}"#,
        )
        .unwrap();
        let d = ScenarioConfig::default();
        assert_eq!(cfg.autopilot.depth.kp, 1.5);
        assert_eq!(cfg.autopilot.depth.ki, d.autopilot.depth.ki);
        assert_eq!(cfg.sensors.depth.sigma, Sigma::Uniform(0.02));
        assert_eq!(cfg.sensors.depth.rate_hz, 10.0);
    }

    #[test]
    fn negative_mass_names_field() {
        let err = load_scenario(r#"{"vehicle": {"mass": -1}}"#).unwrap_err();
        assert!(err.mentions("vehicle.mass"), "{err}");
    }

    #[test]
    fn sensor_rate_must_divide_physics_rate() {
        let err = load_scenario(r#"{"sensors": {"depth": {"rate_hz": 30}}}"#).unwrap_err();
        assert!(err.mentions("sensors.depth.rate_hz"), "{err}");
    }

    #[test]
    fn errors_are_aggregated_with_unknown_keys() {
        let err = load_scenario(
            r#"{"dt": 0.01, "vehicel": {}, "vehicle": {"mass": -1, "fins": [], "bogus": 1},
                "sensors": {"imu": {"rate_hz": 30, "sigma": [1, 2]}}, "terrain": {"kind": "lava"}}"#,
        )
        .unwrap_err();
        for path in [
            "vehicel",
            "vehicle.bogus",
            "vehicle.mass",
            "vehicle.fins",
            "sensors.imu.rate_hz",
            "sensors.imu.sigma",
            "terrain.kind",
        ] {
            assert!(err.mentions(path), "missing {path} in {err}");
        }
    }

    #[test]
    fn type_errors_carry_path() {
        let err = load_scenario(r#"{"vehicle": {"thruster": {"n_max": "fast"}}}"#).unwrap_err();
        assert!(err.mentions("vehicle.thruster.n_max"), "{err}");
    }

    #[test]
    fn time_constant_below_dt_rejected() {
        let err = load_scenario(r#"{"dt": 0.2}"#).unwrap_err();
        assert!(err.mentions("vehicle.fins[0].tau_actuator"), "{err}");
        assert!(err.mentions("vehicle.thruster.tau_motor"), "{err}");
    }

    #[test]
    fn heightmap_relative_to_scenario() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("floor.csv"),
            "origin_x,origin_y,cell_size\n0,0,1\n5,5\n5,5\n",
        )
        .unwrap();
        let scen = dir.path().join("s.json");
        std::fs::write(
            &scen,
            r#"{"terrain": {"kind": "heightmap", "path": "floor.csv"}}"#,
        )
        .unwrap();
        let cfg = load_scenario_file(&scen).unwrap();
        assert!(matches!(cfg.terrain, TerrainField::Grid(_)));
    }

    fn sp(value: f64) -> Setpoint {
        Setpoint {
            mode: SetpointMode::Depth,
            value,
            heading: 0.0,
            speed: 1.5,
        }
    }

    #[test]
    fn mission_lookup_and_validation() {
        let m = load_mission(
            r#"{"end_time": 10, "setpoints": [
                {"t": 0, "setpoint": {"mode": "depth", "value": 1, "heading": 0, "speed": 1.5}},
                {"t": 5, "setpoint": {"mode": "altitude", "value": 3, "heading": 0, "speed": 1.5}}]}"#,
            0.01,
        )
        .unwrap();
        assert_eq!(m.ticks(0.01), 1000);
        assert_eq!(m.setpoint_at(499, 0.01).value, 1.0);
        assert_eq!(m.setpoint_at(500, 0.01).value, 3.0);

        let bad = Mission {
            end_time: 10.0,
            setpoints: vec![
                MissionEntry {
                    t: 1.0,
                    setpoint: sp(1.0),
                },
                MissionEntry {
                    t: 1.0,
                    setpoint: sp(2.0),
                },
            ],
        };
        let err = bad.validate(0.01).unwrap_err();
        assert!(err.mentions("setpoints[0].t"));
        assert!(err.mentions("setpoints[1].t"));
    }

    #[test]
    fn mission_rejects_unknown_fields() {
        let err =
            load_mission(r#"{"end_time": 1, "setpoints": [], "extra": 0}"#, 0.01).unwrap_err();
        assert!(!err.issues.is_empty());
    }
}
