//! Onboard control modes: nested depth/pitch PID, sliding-mode heading,
//! PI speed, and altitude hold through depth-setpoint retargeting.
//!
//! Sign conventions follow NED with z down: a positive depth error (target
//! deeper than the vehicle) demands a negative, nose-down pitch. Stern and
//! rudder outputs use the sense of [`crate::actuation::allocate_fins`].

use serde::{Deserialize, Serialize};

use crate::math::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthPidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Desired-pitch clamp, rad.
    pub theta_max: f64,
    /// Clamp on the integrated depth error, m s.
    pub integral_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchPdGains {
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadingSmcGains {
    /// Sliding-surface gain, 1/s.
    pub lambda: f64,
    /// Switching gain, rad.
    pub k_s: f64,
    /// Boundary-layer width, rad/s.
    pub phi_b: f64,
    /// Yaw-rate damping, s.
    pub k_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedPiGains {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutopilotGains {
    /// Controller update rate, Hz. Must divide the physics rate.
    pub rate_hz: f64,
    pub depth: DepthPidGains,
    pub pitch: PitchPdGains,
    pub heading: HeadingSmcGains,
    pub speed: SpeedPiGains,
}

impl Default for AutopilotGains {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            depth: DepthPidGains {
                kp: 0.3,
                ki: 0.01,
                kd: 0.0,
                theta_max: 0.35,
                integral_max: 10.0,
            },
            pitch: PitchPdGains { kp: 2.0, kd: 1.5 },
            heading: HeadingSmcGains {
                lambda: 0.5,
                k_s: 0.25,
                phi_b: 0.1,
                k_r: 0.5,
            },
            speed: SpeedPiGains { kp: 10.0, ki: 2.0 },
        }
    }
}

impl Default for DepthPidGains {
    fn default() -> Self {
        AutopilotGains::default().depth
    }
}

impl Default for PitchPdGains {
    fn default() -> Self {
        AutopilotGains::default().pitch
    }
}

impl Default for HeadingSmcGains {
    fn default() -> Self {
        AutopilotGains::default().heading
    }
}

impl Default for SpeedPiGains {
    fn default() -> Self {
        AutopilotGains::default().speed
    }
}

impl AutopilotGains {
    /// Returns `(field, reason)` for every violated invariant.
    pub fn violations(&self) -> Vec<(&'static str, &'static str)> {
        let mut out = Vec::new();
        let nonneg = [
            ("depth.kp", self.depth.kp),
            ("depth.ki", self.depth.ki),
            ("depth.kd", self.depth.kd),
            ("depth.integral_max", self.depth.integral_max),
            ("pitch.kp", self.pitch.kp),
            ("pitch.kd", self.pitch.kd),
            ("heading.lambda", self.heading.lambda),
            ("heading.k_s", self.heading.k_s),
            ("heading.k_r", self.heading.k_r),
            ("speed.kp", self.speed.kp),
            ("speed.ki", self.speed.ki),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                out.push((name, "must be finite and >= 0"));
            }
        }
        let t = self.depth.theta_max;
        if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
            out.push(("depth.theta_max", "must lie in (0, pi/2)"));
        }
        if !(self.heading.phi_b.is_finite() && self.heading.phi_b > 0.0) {
            out.push(("heading.phi_b", "must be positive"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            out.push(("rate_hz", "must be positive"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetpointMode {
    Depth,
    Altitude,
}

/// Commanded depth or altitude, heading and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoint {
    pub mode: SetpointMode,
    /// Depth below the surface or altitude above the floor, m.
    pub value: f64,
    pub heading: f64,
    pub speed: f64,
}

/// Outputs of one depth-loop update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthOutput {
    pub theta_d: f64,
    pub stern: f64,
}

/// Outer depth PID producing a pitch reference, inner pitch PD producing
/// the stern-plane command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DepthController {
    integral: f64,
    prev_depth: Option<f64>,
}

impl DepthController {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        depth_meas: f64,
        pitch: f64,
        q: f64,
        setpoint_depth: f64,
        gains: &AutopilotGains,
        delta_max: f64,
        dt: f64,
    ) -> DepthOutput {
        let g = &gains.depth;
        let error = setpoint_depth - depth_meas;
        // Derivative on measurement: no kick when the setpoint steps.
        let error_rate = match self.prev_depth {
            Some(prev) => -(depth_meas - prev) / dt,
            None => 0.0,
        };
        self.prev_depth = Some(depth_meas);

        let candidate = (self.integral + error * dt).clamp(-g.integral_max, g.integral_max);
        let raw = -(g.kp * error + g.ki * candidate + g.kd * error_rate);
        let theta_d = raw.clamp(-g.theta_max, g.theta_max);
        // Integrator frozen while the pitch reference is saturated.
        if raw == theta_d {
            self.integral = candidate;
        }

        let stern = pitch_step(pitch, q, theta_d, gains, delta_max);
        DepthOutput { theta_d, stern }
    }
}

/// Inner pitch loop: `kp (theta_d - theta) - kd q`, clamped to the fin limit.
pub fn pitch_step(pitch: f64, q: f64, theta_d: f64, gains: &AutopilotGains, delta_max: f64) -> f64 {
    let g = &gains.pitch;
    (g.kp * (theta_d - pitch) - g.kd * q).clamp(-delta_max, delta_max)
}

/// Stateless form of one depth update starting from a fresh controller.
pub fn depth_step(
    depth_meas: f64,
    pitch: f64,
    q: f64,
    setpoint_depth: f64,
    gains: &AutopilotGains,
    delta_max: f64,
    dt: f64,
) -> f64 {
    DepthController::default()
        .step(depth_meas, pitch, q, setpoint_depth, gains, delta_max, dt)
        .stern
}

/// Sliding-mode heading law with a tanh boundary layer:
/// `s = r + lambda e`, `delta_r = -(K_s tanh(s / phi_b) + k_r r)`.
pub fn heading_step(psi: f64, r: f64, psi_d: f64, gains: &AutopilotGains, delta_max: f64) -> f64 {
    let g = &gains.heading;
    let e = wrap_angle(psi - psi_d);
    let s = r + g.lambda * e;
    let delta = -(g.k_s * (s / g.phi_b).tanh() + g.k_r * r);
    delta.clamp(-delta_max, delta_max)
}

/// PI on surge speed with a clamped, conditionally integrated state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeedController {
    /// Integral contribution to the command, rev/s.
    integral: f64,
}

impl SpeedController {
    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(
        &mut self,
        u_meas: f64,
        u_d: f64,
        gains: &AutopilotGains,
        n_max: f64,
        dt: f64,
    ) -> f64 {
        let error = u_d - u_meas;
        let candidate = (self.integral + gains.speed.ki * error * dt).clamp(-n_max, n_max);
        let raw = gains.speed.kp * error + candidate;
        let cmd = raw.clamp(-n_max, n_max);
        if raw == cmd || raw.signum() != error.signum() {
            self.integral = candidate;
        }
        cmd
    }
}

pub fn speed_step(u_meas: f64, u_d: f64, gains: &AutopilotGains, n_max: f64, dt: f64) -> f64 {
    SpeedController::default().step(u_meas, u_d, gains, n_max, dt)
}

/// Depth that would put the vehicle at `altitude_d` above the floor.
pub fn altitude_retarget(altitude_meas: f64, altitude_d: f64, depth_meas: f64) -> f64 {
    depth_meas + (altitude_meas - altitude_d)
}

/// Holds the retargeted depth across DVL dropouts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AltitudeHold {
    depth_setpoint: Option<f64>,
}

impl AltitudeHold {
    pub fn reset(&mut self) {
        self.depth_setpoint = None;
    }

    /// `altitude_meas` is `None` on dropout; the previous target is kept, or
    /// the current depth when no valid altitude has been seen yet.
    pub fn update(&mut self, altitude_meas: Option<f64>, altitude_d: f64, depth_meas: f64) -> f64 {
        match altitude_meas {
            Some(alt) => {
                let sp = altitude_retarget(alt, altitude_d, depth_meas);
                self.depth_setpoint = Some(sp);
                sp
            }
            None => *self.depth_setpoint.get_or_insert(depth_meas),
        }
    }

    pub fn current(&self) -> Option<f64> {
        self.depth_setpoint
    }
}
