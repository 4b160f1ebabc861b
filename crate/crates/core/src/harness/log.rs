//! Per-tick trajectory log and its CSV form.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value bit for bit. Absent values (no
//! setpoint in direct modes, no valid measurement yet) are empty fields.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::autopilot::{Setpoint, SetpointMode};
use crate::bridge::ControlMode;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Latest sensor values seen by the autopilot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasuredSnapshot {
    pub depth: Option<f64>,
    /// Roll, pitch, yaw, p, q, r.
    pub imu: Option<[f64; 6]>,
    pub heading: Option<f64>,
    pub altitude: Option<f64>,
    pub dvl_velocity: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub tick: u64,
    pub time: f64,
    pub position: [f64; 3],
    /// Roll, pitch, yaw, rad.
    pub euler: [f64; 3],
    pub nu: [f64; 6],
    pub deltas: Vec<f64>,
    pub shaft_speed: f64,
    pub mode: ControlMode,
    pub setpoint: Option<Setpoint>,
    /// Depth the depth loop is tracking (after altitude retargeting).
    pub depth_target: Option<f64>,
    pub measured: MeasuredSnapshot,
    /// True altitude above the seafloor.
    pub altitude: f64,
    pub collision: bool,
    pub broach: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub fin_count: usize,
    pub rows: Vec<LogRow>,
}

const STATE_COLUMNS: [&str; 14] = [
    "tick", "time", "x", "y", "z", "roll", "pitch", "yaw", "u", "v", "w", "p", "q", "r",
];
const TAIL_COLUMNS: [&str; 22] = [
    "shaft_speed",
    "mode",
    "sp_mode",
    "sp_value",
    "sp_heading",
    "sp_speed",
    "depth_target",
    "meas_depth",
    "meas_roll",
    "meas_pitch",
    "meas_yaw",
    "meas_p",
    "meas_q",
    "meas_r",
    "meas_heading",
    "meas_altitude",
    "meas_vx",
    "meas_vy",
    "meas_vz",
    "altitude",
    "collision",
    "broach",
];

impl TrajectoryLog {
    pub fn new(fin_count: usize) -> Self {
        Self {
            fin_count,
            rows: Vec::new(),
        }
    }

    /// Column names in file order; fin columns are `delta_0 .. delta_{n-1}`.
    pub fn header(fin_count: usize) -> Vec<String> {
        STATE_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((0..fin_count).map(|i| format!("delta_{i}")))
            .chain(TAIL_COLUMNS.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn collision_count(&self) -> usize {
        self.rows.iter().filter(|r| r.collision).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 400 + 512);
        out.push_str(&Self::header(self.fin_count).join(","));
        out.push('\n');
        for row in &self.rows {
            write_row(&mut out, row);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LogError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(LogError::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let fin_count = cols.iter().filter(|c| c.starts_with("delta_")).count();
        if cols != Self::header(fin_count) {
            return Err(LogError::Parse {
                line: 1,
                reason: "unexpected header".into(),
            });
        }
        let mut log = Self::new(fin_count);
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row = parse_row(line, fin_count).map_err(|reason| LogError::Parse {
                line: i + 1,
                reason,
            })?;
            log.rows.push(row);
        }
        Ok(log)
    }
}

fn push_f(out: &mut String, v: f64) {
    let _ = write!(out, "{v},");
}

fn push_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
    out.push(',');
}

fn write_row(out: &mut String, row: &LogRow) {
    let _ = write!(out, "{},", row.tick);
    push_f(out, row.time);
    for v in row
        .position
        .iter()
        .chain(&row.euler)
        .chain(&row.nu)
        .chain(&row.deltas)
    {
        push_f(out, *v);
    }
    push_f(out, row.shaft_speed);
    out.push_str(row.mode.name());
    out.push(',');
    match &row.setpoint {
        Some(sp) => {
            out.push_str(match sp.mode {
                SetpointMode::Depth => "depth",
                SetpointMode::Altitude => "altitude",
            });
            out.push(',');
            push_f(out, sp.value);
            push_f(out, sp.heading);
            push_f(out, sp.speed);
        }
        None => out.push_str(",,,,"),
    }
    push_opt(out, row.depth_target);
    let m = &row.measured;
    push_opt(out, m.depth);
    for i in 0..6 {
        push_opt(out, m.imu.map(|a| a[i]));
    }
    push_opt(out, m.heading);
    push_opt(out, m.altitude);
    for i in 0..3 {
        push_opt(out, m.dvl_velocity.map(|a| a[i]));
    }
    push_f(out, row.altitude);
    out.push_str(if row.collision { "1," } else { "0," });
    out.push_str(if row.broach { "1\n" } else { "0\n" });
}

fn parse_row(line: &str, fin_count: usize) -> Result<LogRow, String> {
    let fields: Vec<&str> = line.split(',').collect();
    let expected = STATE_COLUMNS.len() + fin_count + TAIL_COLUMNS.len();
    if fields.len() != expected {
        return Err(format!("expected {expected} fields, got {}", fields.len()));
    }
    let mut it = fields.into_iter();
    let mut next = || it.next().expect("field count checked");
    let f = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let opt = |s: &str| {
        if s.is_empty() {
            Ok(None)
        } else {
            f(s).map(Some)
        }
    };
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("bad flag {other:?}")),
    };

    let tick = next().parse::<u64>().map_err(|e| e.to_string())?;
    let time = f(next())?;
    let mut arr = |n: usize| -> Result<Vec<f64>, String> { (0..n).map(|_| f(next())).collect() };
    let position = arr(3)?;
    let euler = arr(3)?;
    let nu = arr(6)?;
    let deltas = arr(fin_count)?;
    let shaft_speed = f(next())?;
    let mode = match next() {
        "mission" => ControlMode::Mission,
        "fins" => ControlMode::Fins,
        "wrench" => ControlMode::Wrench,
        "setpoint" => ControlMode::Setpoint,
        other => return Err(format!("bad mode {other:?}")),
    };
    let sp_mode = next();
    let (value, heading, speed) = (next(), next(), next());
    let setpoint = match sp_mode {
        "" => None,
        m => Some(Setpoint {
            mode: match m {
                "depth" => SetpointMode::Depth,
                "altitude" => SetpointMode::Altitude,
                other => return Err(format!("bad setpoint mode {other:?}")),
            },
            value: f(value)?,
            heading: f(heading)?,
            speed: f(speed)?,
        }),
    };
    let depth_target = opt(next())?;
    let depth = opt(next())?;
    let imu_vals: Vec<Option<f64>> = (0..6).map(|_| opt(next())).collect::<Result<_, _>>()?;
    let heading_m = opt(next())?;
    let altitude_m = opt(next())?;
    let vel: Vec<Option<f64>> = (0..3).map(|_| opt(next())).collect::<Result<_, _>>()?;
    let altitude = f(next())?;
    let collision = flag(next())?;
    let broach = flag(next())?;

    let all = |v: &[Option<f64>]| v.iter().copied().collect::<Option<Vec<f64>>>();
    Ok(LogRow {
        tick,
        time,
        position: position.try_into().expect("3 values"),
        euler: euler.try_into().expect("3 values"),
        nu: nu.try_into().expect("6 values"),
        deltas,
        shaft_speed,
        mode,
        setpoint,
        depth_target,
        measured: MeasuredSnapshot {
            depth,
            imu: all(&imu_vals).map(|v| v.try_into().expect("6 values")),
            heading: heading_m,
            altitude: altitude_m,
            dvl_velocity: all(&vel).map(|v| v.try_into().expect("3 values")),
        },
        altitude,
        collision,
        broach,
    })
}

pub fn write_log(log: &TrajectoryLog, path: &Path) -> Result<(), LogError> {
    std::fs::write(path, log.to_csv()).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_log(path: &Path) -> Result<TrajectoryLog, LogError> {
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    TrajectoryLog::from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_row(tick: u64) -> LogRow {
        LogRow {
            tick,
            time: tick as f64 * 0.01,
            position: [0.1, -2.0 / 3.0, 1e-17],
            euler: [0.0, -0.25, std::f64::consts::PI],
            nu: [1.5, 0.0, -0.0, 1e300, 0.1 + 0.2, 7.0],
            deltas: vec![0.1, -0.2, 0.0, 0.3],
            shaft_speed: 9.5,
            mode: ControlMode::Mission,
            setpoint: Some(Setpoint {
                mode: SetpointMode::Altitude,
                value: 3.0,
                heading: 1.0,
                speed: 1.5,
            }),
            depth_target: Some(4.2),
            measured: MeasuredSnapshot {
                depth: Some(1.0 / 3.0),
                imu: None,
                heading: Some(0.5),
                altitude: None,
                dvl_velocity: Some([1.0, 2.0, 3.0]),
            },
            altitude: 12.5,
            collision: tick.is_multiple_of(2),
            broach: false,
        }
    }

    #[test]
    fn header_order() {
        let h = TrajectoryLog::header(2);
        assert_eq!(&h[..4], &["tick", "time", "x", "y"]);
        assert_eq!(h[14], "delta_0");
        assert_eq!(h[15], "delta_1");
        assert_eq!(h[16], "shaft_speed");
        assert_eq!(h.last().unwrap(), "broach");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut log = TrajectoryLog::new(4);
        log.rows.push(sample_row(0));
        let mut direct = sample_row(1);
        direct.mode = ControlMode::Fins;
        direct.setpoint = None;
        direct.depth_target = None;
        log.rows.push(direct);
        let text = log.to_csv();
        let back = TrajectoryLog::from_csv(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_csv(), text);
        assert_eq!(back.rows[0].nu[4].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn write_and_read_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let mut log = TrajectoryLog::new(4);
        log.rows.extend((0..5).map(sample_row));
        write_log(&log, &path).unwrap();
        assert_eq!(read_log(&path).unwrap(), log);
        let missing = dir.path().join("nope/log.csv");
        let err = write_log(&log, &missing).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
