//! Command latching with one-tick latency.

use super::frame::{FinCommand, Frame, FrameError, Payload, SetpointCommand, WrenchCommand};

/// Which source drives the vehicle on a given tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// No external command yet: the autopilot follows the mission.
    Mission,
    Fins,
    Wrench,
    Setpoint,
}

impl ControlMode {
    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Mission => "mission",
            ControlMode::Fins => "fins",
            ControlMode::Wrench => "wrench",
            ControlMode::Setpoint => "setpoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Fins(FinCommand),
    Wrench(WrenchCommand),
    Setpoint(SetpointCommand),
}

impl Command {
    pub fn mode(&self) -> ControlMode {
        match self {
            Command::Fins(_) => ControlMode::Fins,
            Command::Wrench(_) => ControlMode::Wrench,
            Command::Setpoint(_) => ControlMode::Setpoint,
        }
    }
}

/// Physical bounds used to clamp incoming commands.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandLimits {
    pub delta_max: Vec<f64>,
    pub n_max: f64,
}

/// Outcome of accepting a command: clamp faults to publish.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Accepted {
    pub faults: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandLatch {
    active: ControlMode,
    fins: Option<(FinCommand, u64)>,
    wrench: Option<(WrenchCommand, u64)>,
    setpoint: Option<(SetpointCommand, u64)>,
    pending: Vec<(u64, Command)>,
}

impl Default for CommandLatch {
    fn default() -> Self {
        Self::new()
    }
}

impl CommandLatch {
    pub fn new() -> Self {
        Self {
            active: ControlMode::Mission,
            fins: None,
            wrench: None,
            setpoint: None,
            pending: Vec::new(),
        }
    }

    pub fn active_mode(&self) -> ControlMode {
        self.active
    }

    pub fn fins(&self) -> Option<&FinCommand> {
        self.fins.as_ref().map(|(c, _)| c)
    }

    pub fn wrench(&self) -> Option<&WrenchCommand> {
        self.wrench.as_ref().map(|(c, _)| c)
    }

    pub fn setpoint(&self) -> Option<&SetpointCommand> {
        self.setpoint.as_ref().map(|(c, _)| c)
    }

    /// Arrival tick of the latched command for `mode`.
    pub fn arrival_tick(&self, mode: ControlMode) -> Option<u64> {
        match mode {
            ControlMode::Mission => None,
            ControlMode::Fins => self.fins.as_ref().map(|(_, t)| *t),
            ControlMode::Wrench => self.wrench.as_ref().map(|(_, t)| *t),
            ControlMode::Setpoint => self.setpoint.as_ref().map(|(_, t)| *t),
        }
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Validates and clamps a command frame received during `current_tick`.
    /// It becomes active at `current_tick + 1`. On error the latch is unchanged.
    pub fn apply_command(
        &mut self,
        frame: &Frame,
        current_tick: u64,
        limits: &CommandLimits,
    ) -> Result<Accepted, FrameError> {
        let stamp = frame.stamp_ns;
        let mut faults = Vec::new();
        let command = match &frame.payload {
            Payload::FinCommand(c) => {
                if c.deltas.len() != limits.delta_max.len() {
                    return Err(schema(
                        "fin_command",
                        format!(
                            "expected {} deltas, got {}",
                            limits.delta_max.len(),
                            c.deltas.len()
                        ),
                    ));
                }
                let mut c = c.clone();
                for (i, (d, &max)) in c.deltas.iter_mut().zip(&limits.delta_max).enumerate() {
                    if d.abs() > max {
                        faults.push(Frame::fault(
                            stamp,
                            "clamped",
                            format!("fin {i} deflection {d} clamped to ±{max}"),
                        ));
                        *d = d.clamp(-max, max);
                    }
                }
                if c.thruster.abs() > limits.n_max {
                    faults.push(Frame::fault(
                        stamp,
                        "clamped",
                        format!("thruster {} clamped to ±{}", c.thruster, limits.n_max),
                    ));
                    c.thruster = c.thruster.clamp(-limits.n_max, limits.n_max);
                }
                Command::Fins(c)
            }
            Payload::WrenchCommand(c) => Command::Wrench(c.clone()),
            Payload::SetpointCommand(c) => {
                let mut c = c.clone();
                if c.speed < 0.0 {
                    faults.push(Frame::fault(
                        stamp,
                        "clamped",
                        format!("speed {} clamped to 0", c.speed),
                    ));
                    c.speed = 0.0;
                }
                Command::Setpoint(c)
            }
            other => return Err(schema(other.type_tag(), "not a command type".to_string())),
        };
        self.pending.push((current_tick, command));
        Ok(Accepted { faults })
    }

    /// Promotes every command that arrived before `tick`, in arrival order.
    pub fn begin_tick(&mut self, tick: u64) {
        let (ready, waiting): (Vec<_>, Vec<_>) =
            self.pending.drain(..).partition(|(t, _)| *t < tick);
        self.pending = waiting;
        for (t, command) in ready {
            self.active = command.mode();
            match command {
                Command::Fins(c) => self.fins = Some((c, t)),
                Command::Wrench(c) => self.wrench = Some((c, t)),
                Command::Setpoint(c) => self.setpoint = Some((c, t)),
            }
        }
    }
}

fn schema(type_tag: &str, reason: String) -> FrameError {
    FrameError::Schema {
        type_tag: type_tag.to_string(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autopilot::SetpointMode;

    fn limits() -> CommandLimits {
        CommandLimits {
            delta_max: vec![0.25; 4],
            n_max: 25.0,
        }
    }

    fn fins(d: f64) -> Frame {
        Frame::new(
            "/command/fins",
            0,
            Payload::FinCommand(FinCommand {
                deltas: vec![d; 4],
                thruster: 5.0,
            }),
        )
    }

    fn wrench() -> Frame {
        Frame::new(
            "/command/wrench",
            0,
            Payload::WrenchCommand(WrenchCommand {
                force: [1.0, 0.0, 0.0],
                torque: [0.0; 3],
            }),
        )
    }

    #[test]
    fn default_is_mission_mode() {
        let mut latch = CommandLatch::new();
        for k in 0..10 {
            latch.begin_tick(k);
        }
        assert_eq!(latch.active_mode(), ControlMode::Mission);
    }

    #[test]
    fn latest_wins_and_takes_effect_next_tick() {
        let mut latch = CommandLatch::new();
        latch.begin_tick(5);
        latch.apply_command(&fins(0.1), 5, &limits()).unwrap();
        latch.apply_command(&wrench(), 5, &limits()).unwrap();
        assert_eq!(latch.active_mode(), ControlMode::Mission);
        latch.begin_tick(5);
        assert_eq!(latch.active_mode(), ControlMode::Mission);
        latch.begin_tick(6);
        assert_eq!(latch.active_mode(), ControlMode::Wrench);
        assert_eq!(latch.arrival_tick(ControlMode::Wrench), Some(5));
        assert_eq!(latch.fins().unwrap().deltas, vec![0.1; 4]);
    }

    #[test]
    fn over_limit_deflection_clamped_with_fault() {
        let mut latch = CommandLatch::new();
        let acc = latch.apply_command(&fins(0.5), 0, &limits()).unwrap();
        assert_eq!(acc.faults.len(), 4);
        latch.begin_tick(1);
        assert_eq!(latch.fins().unwrap().deltas, vec![0.25; 4]);
    }

    #[test]
    fn negative_speed_clamped() {
        let mut latch = CommandLatch::new();
        let f = Frame::new(
            "/command/setpoint",
            0,
            Payload::SetpointCommand(SetpointCommand {
                mode: SetpointMode::Depth,
                value: 2.0,
                heading: 0.0,
                speed: -1.0,
            }),
        );
        let acc = latch.apply_command(&f, 0, &limits()).unwrap();
        assert_eq!(acc.faults.len(), 1);
        latch.begin_tick(1);
        assert_eq!(latch.setpoint().unwrap().speed, 0.0);
    }

    #[test]
    fn wrong_fin_count_leaves_latch_unchanged() {
        let mut latch = CommandLatch::new();
        let bad = Frame::new(
            "/command/fins",
            0,
            Payload::FinCommand(FinCommand {
                deltas: vec![0.0; 3],
                thruster: 0.0,
            }),
        );
        let before = latch.clone();
        assert!(matches!(
            latch.apply_command(&bad, 0, &limits()),
            Err(FrameError::Schema { .. })
        ));
        assert_eq!(latch, before);
        assert!(latch
            .apply_command(&Frame::clock(0, 0), 0, &limits())
            .is_err());
        assert_eq!(latch, before);
    }
}
