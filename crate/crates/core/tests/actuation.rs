mod common;

use nalgebra::Vector6;
use proptest::prelude::*;

use torpedo_core::actuation::{
    actuator_step, allocate_fins, fin_wrench, ActuatorState, FinSpec, ThrusterSpec,
};
use torpedo_core::harness::config::default_fins;

use common::fin_wrench_oracle;

fn fin() -> impl Strategy<Value = FinSpec> {
    (
        -1.0..1.0f64,
        0.01..0.3f64,
        -6.3..6.3f64,
        1e-3..0.05f64,
        0.5..5.0f64,
    )
        .prop_map(|(x_off, r, theta, area, lift_coeff)| FinSpec {
            x_off,
            r,
            theta,
            area,
            lift_coeff,
            delta_max: 0.4,
            tau_actuator: 0.1,
        })
}

proptest! {
    #[test]
    fn wrench_matches_oracle(
        fin in fin(),
        delta in -0.4..0.4f64,
        nu_r in prop::array::uniform6(-3.0..3.0f64),
    ) {
        let got = fin_wrench(&fin, delta, &Vector6::from(nu_r), 1026.0).to_vector();
        let want = fin_wrench_oracle(fin.x_off, fin.r, fin.theta, fin.area, fin.lift_coeff, delta, nu_r, 1026.0);
        let scale = want.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        for i in 0..6 {
            prop_assert!((got[i] - want[i]).abs() <= 1e-12 * scale, "component {i}: {} vs {}", got[i], want[i]);
        }
    }

    #[test]
    fn fin_force_never_has_axial_component(
        fin in fin(),
        delta in -0.4..0.4f64,
        nu_r in prop::array::uniform6(-3.0..3.0f64),
    ) {
        let w = fin_wrench(&fin, delta, &Vector6::from(nu_r), 1026.0);
        prop_assert_eq!(w.force.x, 0.0);
    }
}

fn summed(fins: &[FinSpec], deltas: &[f64]) -> [f64; 6] {
    let nu_r = [1.5, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut total = [0.0; 6];
    for (f, d) in fins.iter().zip(deltas) {
        let w = fin_wrench_oracle(
            f.x_off,
            f.r,
            f.theta,
            f.area,
            f.lift_coeff,
            *d,
            nu_r,
            1026.0,
        );
        total.iter_mut().zip(w).for_each(|(t, v)| *t += v);
    }
    total
}

#[test]
fn stern_command_pitches_without_yaw() {
    let fins = default_fins();
    let w = summed(&fins, &allocate_fins(&fins, 0.1, 0.0));
    assert!(w[4].abs() > 1e-3);
    assert!(w[5].abs() < 1e-12);
    assert!(w[3].abs() < 1e-12);
}

#[test]
fn rudder_command_yaws_without_pitch() {
    let fins = default_fins();
    let w = summed(&fins, &allocate_fins(&fins, 0.0, 0.1));
    assert!(w[5].abs() > 1e-3);
    assert!(w[4].abs() < 1e-12);
    assert!(w[3].abs() < 1e-12);
}

#[test]
fn actuators_settle_on_clamped_commands() {
    let fins = default_fins();
    let spec = ThrusterSpec::default();
    let mut act = ActuatorState::new(fins.len());
    act.delta_cmds = vec![0.1, -1.0, 1.0, 0.0];
    act.n_cmd = 100.0;
    for _ in 0..1000 {
        act = actuator_step(&act, &fins, &spec, 0.01);
    }
    let limit = fins[0].delta_max;
    let want = [0.1, -limit, limit, 0.0];
    for (d, w) in act.deltas.iter().zip(want) {
        assert!((d - w).abs() < 1e-9, "{d} vs {w}");
    }
    assert!((act.n - spec.n_max).abs() < 1e-9);
}
