//! Six-degree-of-freedom torpedo AUV simulation: rigid-body hydrodynamics,
//! fin and thruster actuation, sensors, autopilots, a TCP bridge for
//! in-the-loop testing, and the scenario-driven simulation harness.

pub mod actuation;
pub mod autopilot;
pub mod bridge;
pub mod harness;
pub mod hydrodynamics;
pub mod kinematics;
pub mod math;
pub mod sensors;
