//! Pose kinematics and the fixed-step RK4 integrator.

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};
use thiserror::Error;

use crate::hydrodynamics::VehicleState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationFault {
    #[error("non-finite state derivative in RK4 stage {stage}")]
    NonFiniteDerivative { stage: usize },
    #[error("non-finite state after step")]
    NonFiniteState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    /// World-frame velocity.
    pub position_dot: Vector3<f64>,
    pub attitude_dot: Quaternion<f64>,
    pub nu_dot: Vector6<f64>,
}

impl StateDerivative {
    fn is_finite(&self) -> bool {
        self.position_dot.iter().all(|v| v.is_finite())
            && self.attitude_dot.coords.iter().all(|v| v.is_finite())
            && self.nu_dot.iter().all(|v| v.is_finite())
    }
}

/// Kinematic part of the state derivative: world velocity `R v` and
/// `q_dot = 1/2 q * (0, omega)`.
pub fn body_to_world(
    attitude: &UnitQuaternion<f64>,
    nu: &Vector6<f64>,
) -> (Vector3<f64>, Quaternion<f64>) {
    let v = Vector3::new(nu[0], nu[1], nu[2]);
    let omega = Quaternion::new(0.0, nu[3], nu[4], nu[5]);
    let position_dot = attitude.transform_vector(&v);
    let attitude_dot = attitude.quaternion() * omega * 0.5;
    (position_dot, attitude_dot)
}

/// Assembles a full derivative from the kinematic map and a body acceleration.
pub fn state_derivative(state: &VehicleState, nu_dot: Vector6<f64>) -> StateDerivative {
    let (position_dot, attitude_dot) = body_to_world(&state.attitude, &state.nu);
    StateDerivative {
        position_dot,
        attitude_dot,
        nu_dot,
    }
}

fn offset(state: &VehicleState, k: &StateDerivative, h: f64) -> VehicleState {
    VehicleState::with_raw_attitude(
        state.position + k.position_dot * h,
        state.attitude.quaternion() + k.attitude_dot * h,
        state.nu + k.nu_dot * h,
    )
}

/// Advances the state by one classical RK4 step of length `dt`.
///
/// `derivative_fn` is evaluated four times and must be pure; any inputs that
/// are held over the step (actuator positions, commanded wrench) are captured
/// by the closure. The quaternion is renormalized at every stage and after
/// the step.
pub fn integrate_step<F>(
    state: &VehicleState,
    dt: f64,
    mut derivative_fn: F,
) -> Result<VehicleState, IntegrationFault>
where
    F: FnMut(&VehicleState) -> StateDerivative,
{
    let mut eval = |s: &VehicleState, stage: usize| {
        let d = derivative_fn(s);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(IntegrationFault::NonFiniteDerivative { stage })
        }
    };
    let k1 = eval(state, 1)?;
    let k2 = eval(&offset(state, &k1, 0.5 * dt), 2)?;
    let k3 = eval(&offset(state, &k2, 0.5 * dt), 3)?;
    let k4 = eval(&offset(state, &k3, dt), 4)?;

    let w = dt / 6.0;
    let position = state.position
        + (k1.position_dot + k2.position_dot * 2.0 + k3.position_dot * 2.0 + k4.position_dot) * w;
    let attitude = state.attitude.quaternion()
        + (k1.attitude_dot + k2.attitude_dot * 2.0 + k3.attitude_dot * 2.0 + k4.attitude_dot) * w;
    let nu = state.nu + (k1.nu_dot + k2.nu_dot * 2.0 + k3.nu_dot * 2.0 + k4.nu_dot) * w;

    let next = VehicleState::with_raw_attitude(position, attitude, nu);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(IntegrationFault::NonFiniteState)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn coast(s: &VehicleState) -> StateDerivative {
        state_derivative(s, Vector6::zeros())
    }

    #[test]
    fn identity_rotation_passes_surge() {
        let nu = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (p, _) = body_to_world(&UnitQuaternion::identity(), &nu);
        assert_eq!(p, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn yaw_quarter_turn_maps_surge_east() {
        let nu = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, FRAC_PI_2);
        let (p, _) = body_to_world(&q, &nu);
        assert_relative_eq!(p, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn attitude_rate_matches_euler_rate_for_pure_yaw() {
        let nu = Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.3);
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.4);
        let (_, qdot) = body_to_world(&q, &nu);
        let h = 1e-6;
        let q2 = UnitQuaternion::from_quaternion(q.quaternion() + qdot * h);
        assert_relative_eq!((q2.euler_angles().2 - 0.4) / h, 0.3, epsilon = 1e-6);
    }

    #[test]
    fn straight_line_motion_is_exact() {
        let nu = Vector6::new(1.25, -0.5, 0.25, 0.0, 0.0, 0.0);
        let mut s = VehicleState::new(Vector3::new(1.0, 2.0, 3.0), [0.0; 3], nu);
        for _ in 0..10 {
            s = integrate_step(&s, 0.01, coast).unwrap();
        }
        assert_relative_eq!(
            s.position,
            Vector3::new(1.0, 2.0, 3.0) + nu.fixed_rows::<3>(0) * 0.1,
            epsilon = 1e-14
        );
    }

    #[test]
    fn constant_yaw_rate_traces_a_circle() {
        let (u, r, dt) = (1.0, 0.1, 0.01);
        let mut s = VehicleState::new(
            Vector3::zeros(),
            [0.0; 3],
            Vector6::new(u, 0.0, 0.0, 0.0, 0.0, r),
        );
        let steps = (TAU / r / dt).round() as usize;
        for _ in 0..steps {
            s = integrate_step(&s, dt, coast).unwrap();
        }
        let t = steps as f64 * dt;
        let radius = u / r;
        let expected = Vector3::new(radius * (r * t).sin(), radius * (1.0 - (r * t).cos()), 0.0);
        assert!((s.position - expected).norm() < 1e-4);
        assert!((s.attitude.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let s = VehicleState::default();
        let err = integrate_step(&s, 0.01, |st| {
            let mut d = coast(st);
            d.nu_dot[2] = f64::NAN;
            d
        });
        assert_eq!(err, Err(IntegrationFault::NonFiniteDerivative { stage: 1 }));
    }
}
