//! Fin and thruster forces plus first-order actuator lag.
//!
//! Each fin is located by its center of pressure `(x_off, r, theta)` around
//! the body x axis, with `theta` measured from +y_b and the COP at
//! `(x_off, r cos(theta), r sin(theta))`. A deflection `delta` produces a
//! lift-like force tangential to the hull:
//!
//! ```text
//! v_r = sqrt(v_x^2 + (v_y sin(theta))^2 + (v_z cos(theta))^2)
//! f   = 1/2 rho v_r^2 A C_L delta
//! F   = [0, f sin(theta), -f cos(theta)]
//! M   = R x F
//! ```
//!
//! The total wrench is the plain sum over fins plus the thruster.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydrodynamics::Wrench;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuationError {
    #[error("actuator state has {got} fin deflections but the vehicle has {expected} fins")]
    FinCountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinSpec {
    /// Longitudinal COP offset from the COM, m.
    pub x_off: f64,
    /// Radial COP distance from the body x axis, m.
    pub r: f64,
    /// Angular COP position from +y_b, rad.
    pub theta: f64,
    /// Planform area, m^2.
    pub area: f64,
    pub lift_coeff: f64,
    /// Symmetric deflection limit, rad.
    pub delta_max: f64,
    /// First-order actuator time constant, s.
    pub tau_actuator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThrusterSpec {
    /// Thrust coefficient in `T = k_thrust |n| n`, N s^2 / rev^2.
    pub k_thrust: f64,
    /// Shaft-speed time constant, s.
    pub tau_motor: f64,
    /// Shaft-speed limit, rev/s.
    pub n_max: f64,
    /// Propeller roll-reaction coefficient, N m s^2 / rev^2.
    pub k_roll_reaction: f64,
}

impl Default for ThrusterSpec {
    fn default() -> Self {
        Self {
            k_thrust: 0.18,
            tau_motor: 0.1,
            n_max: 25.0,
            k_roll_reaction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActuatorState {
    pub deltas: Vec<f64>,
    pub delta_cmds: Vec<f64>,
    pub n: f64,
    pub n_cmd: f64,
}

impl ActuatorState {
    pub fn new(fin_count: usize) -> Self {
        Self {
            deltas: vec![0.0; fin_count],
            delta_cmds: vec![0.0; fin_count],
            n: 0.0,
            n_cmd: 0.0,
        }
    }
}

/// Flow speed in the plane of a fin at angular position `theta`.
pub fn fin_relative_speed(nu_r_linear: &Vector3<f64>, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (nu_r_linear.x.powi(2) + (nu_r_linear.y * s).powi(2) + (nu_r_linear.z * c).powi(2)).sqrt()
}

pub fn fin_force_magnitude(rho: f64, v_r: f64, area: f64, lift_coeff: f64, delta: f64) -> f64 {
    0.5 * rho * v_r * v_r * area * lift_coeff * delta
}

/// Center-of-pressure position of a fin in the body frame.
pub fn fin_cop(fin: &FinSpec) -> Vector3<f64> {
    let (s, c) = fin.theta.sin_cos();
    Vector3::new(fin.x_off, fin.r * c, fin.r * s)
}

pub fn fin_wrench(fin: &FinSpec, delta: f64, nu_r: &Vector6<f64>, rho: f64) -> Wrench {
    let linear = nu_r.fixed_rows::<3>(0).into_owned();
    let v_r = fin_relative_speed(&linear, fin.theta);
    let f = fin_force_magnitude(rho, v_r, fin.area, fin.lift_coeff, delta);
    let (s, c) = fin.theta.sin_cos();
    let force = Vector3::new(0.0, f * s, -f * c);
    let torque = fin_cop(fin).cross(&force);
    Wrench::new(force, torque)
}

pub fn thrust_wrench(spec: &ThrusterSpec, n: f64) -> Wrench {
    let n2 = n.abs() * n;
    Wrench::new(
        Vector3::new(spec.k_thrust * n2, 0.0, 0.0),
        Vector3::new(-spec.k_roll_reaction * n2, 0.0, 0.0),
    )
}

pub fn total_actuation(
    fins: &[FinSpec],
    act: &ActuatorState,
    spec: &ThrusterSpec,
    nu_r: &Vector6<f64>,
    rho: f64,
) -> Result<Wrench, ActuationError> {
    if act.deltas.len() != fins.len() {
        return Err(ActuationError::FinCountMismatch {
            expected: fins.len(),
            got: act.deltas.len(),
        });
    }
    let fin_sum: Wrench = fins
        .iter()
        .zip(&act.deltas)
        .map(|(fin, &delta)| fin_wrench(fin, delta, nu_r, rho))
        .sum();
    Ok(fin_sum + thrust_wrench(spec, act.n))
}

/// One explicit first-order lag update followed by the position clamps.
///
/// Expects `dt` no larger than any time constant, which scenario validation
/// guarantees.
pub fn actuator_step(
    act: &ActuatorState,
    fins: &[FinSpec],
    spec: &ThrusterSpec,
    dt: f64,
) -> ActuatorState {
    let deltas = fins
        .iter()
        .zip(act.deltas.iter().zip(&act.delta_cmds))
        .map(|(fin, (&delta, &cmd))| {
            let next = delta + dt / fin.tau_actuator * (cmd - delta);
            next.clamp(-fin.delta_max, fin.delta_max)
        })
        .collect();
    let n = (act.n + dt / spec.tau_motor * (act.n_cmd - act.n)).clamp(-spec.n_max, spec.n_max);
    ActuatorState {
        deltas,
        delta_cmds: act.delta_cmds.clone(),
        n,
        n_cmd: act.n_cmd,
    }
}

/// Maps stern-plane and rudder commands onto individual fin deflections.
///
/// Positive `stern` pitches the nose up and positive `rudder` yaws the
/// vehicle to starboard for fins aft of the COM; forward fins are mirrored so
/// the sense is preserved. Fin `i` receives
/// `sign(x_off) * (stern cos(theta) + rudder sin(theta))`, which cancels the
/// net roll moment for symmetric layouts.
pub fn allocate_fins(fins: &[FinSpec], stern: f64, rudder: f64) -> Vec<f64> {
    fins.iter()
        .map(|fin| {
            let sign = if fin.x_off < 0.0 { -1.0 } else { 1.0 };
            let (s, c) = fin.theta.sin_cos();
            let delta = sign * (stern * c + rudder * s);
            delta.clamp(-fin.delta_max, fin.delta_max)
        })
        .collect()
}
