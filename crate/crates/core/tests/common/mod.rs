//! Independent reference computations and shared fixtures for the
//! integration tests. Nothing here calls into the code it checks.

#![allow(dead_code)]

use nalgebra::Vector6;
use torpedo_core::autopilot::{Setpoint, SetpointMode};
use torpedo_core::harness::config::MissionEntry;
use torpedo_core::harness::{Mission, ScenarioConfig};
use torpedo_core::sensors::TerrainField;

/// Fin wrench from first principles: place the fin at angle `theta` by
/// rotating the starboard fin about the body x axis, take the lift along the
/// rotated `-z` direction, and form the moment with an explicit cross product.
#[allow(clippy::too_many_arguments)]
pub fn fin_wrench_oracle(
    x_off: f64,
    r: f64,
    theta: f64,
    area: f64,
    lift_coeff: f64,
    delta: f64,
    nu_r: [f64; 6],
    rho: f64,
) -> [f64; 6] {
    let (c, s) = (theta.cos(), theta.sin());
    // Rotation about x by theta applied to a vector (vx, vy, vz).
    let rot = |v: [f64; 3]| [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]];
    let position = rot([x_off, r, 0.0]);
    let normal = rot([0.0, 0.0, -1.0]);

    let (u, v, w) = (nu_r[0], nu_r[1], nu_r[2]);
    let speed_sq = u * u + (v * s) * (v * s) + (w * c) * (w * c);

    let lift = 0.5 * rho * speed_sq * area * lift_coeff * delta;
    let force = [normal[0] * lift, normal[1] * lift, normal[2] * lift];
    let moment = [
        position[1] * force[2] - position[2] * force[1],
        position[2] * force[0] - position[0] * force[2],
        position[0] * force[1] - position[1] * force[0],
    ];
    [
        force[0], force[1], force[2], moment[0], moment[1], moment[2],
    ]
}

/// Composite Gauss-Legendre (5-point) on `[0, 1]`.
fn integrate_unit(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let h = 1.0 / panels as f64;
    let mut sum = 0.0;
    for i in 0..panels {
        let mid = (i as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    sum * 0.5 * h
}

/// Lamb's k-factors by quadrature of the ellipsoid potential integrals
/// `alpha0 = a b^2 int dl / ((a^2+l)^(3/2) (b^2+l))` and
/// `beta0 = a b^2 int dl / ((a^2+l)^(1/2) (b^2+l)^2)` over `[0, inf)`.
pub fn lamb_k_factors_quadrature(length: f64, diameter: f64) -> (f64, f64, f64) {
    let a = 0.5 * length;
    let b = 0.5 * diameter;
    let a2 = a * a;
    let b2 = b * b;
    // l = b^2 (1/(1-t)^2 - 1) maps [0, 1) onto [0, inf) with a smooth tail.
    let map = |t: f64| {
        let one = 1.0 - t;
        let l = b2 * (1.0 / (one * one) - 1.0);
        let dl = 2.0 * b2 / (one * one * one);
        (l, dl)
    };
    let alpha0 = integrate_unit(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let (l, dl) = map(t);
            a * b2 * dl / ((a2 + l).powf(1.5) * (b2 + l))
        },
        4000,
    );
    let beta0 = integrate_unit(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let (l, dl) = map(t);
            a * b2 * dl / ((a2 + l).sqrt() * (b2 + l) * (b2 + l))
        },
        4000,
    );
    let e2 = 1.0 - b2 / a2;
    let k1 = alpha0 / (2.0 - alpha0);
    let k2 = beta0 / (2.0 - beta0);
    let k_prime =
        e2 * e2 * (beta0 - alpha0) / ((2.0 - e2) * (2.0 * e2 - (2.0 - e2) * (beta0 - alpha0)));
    (k1, k2, k_prime)
}

pub fn setpoint(mode: SetpointMode, value: f64, heading: f64) -> Setpoint {
    Setpoint {
        mode,
        value,
        heading,
        speed: 1.5,
    }
}

/// Default vehicle cruising at 1.5 m/s from the given depth.
pub fn cruise_scenario(depth: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.initial_state.position.z = depth;
    cfg.initial_state.nu = Vector6::new(1.5, 0.0, 0.0, 0.0, 0.0, 0.0);
    cfg
}

/// Surface to 2 m depth step.
pub fn depth_step_mission(end_time: f64) -> Mission {
    Mission::constant(end_time, setpoint(SetpointMode::Depth, 2.0, 0.0))
}

pub fn bumps_terrain() -> TerrainField {
    TerrainField::Bumps {
        depth: 20.0,
        amplitude: 4.0,
        wavelength: 60.0,
    }
}

/// Three altitude holds, then depth mode from t = 150 s.
pub fn altitude_mission(altitudes: [f64; 3]) -> Mission {
    Mission {
        end_time: 200.0,
        setpoints: vec![
            MissionEntry {
                t: 0.0,
                setpoint: setpoint(SetpointMode::Altitude, altitudes[0], 0.0),
            },
            MissionEntry {
                t: 50.0,
                setpoint: setpoint(SetpointMode::Altitude, altitudes[1], 0.0),
            },
            MissionEntry {
                t: 100.0,
                setpoint: setpoint(SetpointMode::Altitude, altitudes[2], 0.0),
            },
            MissionEntry {
                t: 150.0,
                setpoint: setpoint(SetpointMode::Depth, 5.0, 0.0),
            },
        ],
    }
}

/// Serializes a number the way a JSON encoder writes an f64.
pub fn json_num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}
