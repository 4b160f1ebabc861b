//! Simulated pressure-depth, IMU, magnetometer and DVL sensors over a
//! seafloor terrain field.
//!
//! Each sensor owns its own ChaCha stream derived from the master seed and a
//! per-sensor sub-seed, so adding or re-rating one sensor never perturbs the
//! noise seen by another.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydrodynamics::VehicleState;
use crate::math::wrap_angle;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("failed to read heightmap {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("heightmap {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Noise standard deviation, either shared by every channel or given per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Uniform(f64),
    PerChannel(Vec<f64>),
}

impl Sigma {
    pub fn channel(&self, i: usize) -> f64 {
        match self {
            Sigma::Uniform(s) => *s,
            Sigma::PerChannel(v) => v[i],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sigma::Uniform(s) => vec![*s],
            Sigma::PerChannel(v) => v.clone(),
        }
    }

    /// Checks the channel count for a sensor with `channels` outputs.
    pub fn fits(&self, channels: usize) -> bool {
        match self {
            Sigma::Uniform(_) => true,
            Sigma::PerChannel(v) => v.len() == channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub rate_hz: f64,
    pub sigma: Sigma,
    #[serde(default)]
    pub dropout_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Depth,
    Imu,
    Mag,
    Dvl,
}

impl SensorKind {
    /// Publication order within a tick.
    pub const ALL: [SensorKind; 4] = [
        SensorKind::Depth,
        SensorKind::Imu,
        SensorKind::Mag,
        SensorKind::Dvl,
    ];

    pub fn channels(self) -> usize {
        match self {
            SensorKind::Depth | SensorKind::Mag => 1,
            SensorKind::Imu => 6,
            SensorKind::Dvl => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Depth => "depth",
            SensorKind::Imu => "imu",
            SensorKind::Mag => "mag",
            SensorKind::Dvl => "dvl",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Depth {
        depth: f64,
    },
    Imu {
        roll: f64,
        pitch: f64,
        yaw: f64,
        p: f64,
        q: f64,
        r: f64,
    },
    Mag {
        heading: f64,
    },
    Dvl {
        altitude: f64,
        velocity: [f64; 3],
    },
}

impl Reading {
    pub fn kind(&self) -> SensorKind {
        match self {
            Reading::Depth { .. } => SensorKind::Depth,
            Reading::Imu { .. } => SensorKind::Imu,
            Reading::Mag { .. } => SensorKind::Mag,
            Reading::Dvl { .. } => SensorKind::Dvl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Simulation time of the sample, integer nanoseconds.
    pub stamp_ns: u64,
    pub valid: bool,
    pub reading: Reading,
}

impl Measurement {
    pub fn stamp(&self) -> f64 {
        self.stamp_ns as f64 * 1e-9
    }
}

/// Seafloor depth (positive down) as a function of world `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TerrainField {
    Flat {
        depth: f64,
    },
    /// Planar floor: `depth + gradient . (x, y)`.
    Slope {
        depth: f64,
        gradient: [f64; 2],
    },
    /// `depth - amplitude sin(2 pi x / wavelength) cos(2 pi y / wavelength)`.
    Bumps {
        depth: f64,
        amplitude: f64,
        wavelength: f64,
    },
    Grid(TerrainGrid),
}

/// Uniform heightmap; row `i` lies at `x = origin_x + i * cell_size`,
/// column `j` at `y = origin_y + j * cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub depths: Vec<Vec<f64>>,
}

impl TerrainGrid {
    /// Parses a CSV heightmap: a header line `origin_x,origin_y,cell_size`,
    /// one line with those values, then one row of depths per x index.
    pub fn parse_csv(text: &str, path: &str) -> Result<Self, TerrainError> {
        let perr = |line: usize, reason: String| TerrainError::Parse {
            path: path.to_string(),
            line,
            reason,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names != ["origin_x", "origin_y", "cell_size"] {
            return Err(perr(
                hl,
                "expected header origin_x,origin_y,cell_size".into(),
            ));
        }
        let parse_row = |line: usize, l: &str| -> Result<Vec<f64>, TerrainError> {
            l.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| perr(line, format!("bad number {f:?}: {e}")))
                })
                .collect()
        };
        let (ml, meta) = lines
            .next()
            .ok_or_else(|| perr(hl + 1, "missing origin line".into()))?;
        let meta = parse_row(ml, meta)?;
        if meta.len() != 3 {
            return Err(perr(ml, "expected three values".into()));
        }
        let mut depths = Vec::new();
        for (line, l) in lines {
            let row = parse_row(line, l)?;
            if let Some(first) = depths.first().map(|r: &Vec<f64>| r.len()) {
                if row.len() != first {
                    return Err(perr(
                        line,
                        format!("row has {} values, expected {first}", row.len()),
                    ));
                }
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(perr(line, "depths must be finite".into()));
            }
            depths.push(row);
        }
        if depths.is_empty() || depths[0].is_empty() {
            return Err(perr(ml, "no depth rows".into()));
        }
        if !(meta[2].is_finite() && meta[2] > 0.0) {
            return Err(perr(ml, "cell_size must be positive".into()));
        }
        Ok(Self {
            origin_x: meta[0],
            origin_y: meta[1],
            cell_size: meta[2],
            depths,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TerrainError> {
        let text = std::fs::read_to_string(path).map_err(|source| TerrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    fn depth_at(&self, x: f64, y: f64) -> f64 {
        let nx = self.depths.len();
        let ny = self.depths[0].len();
        let fx = ((x - self.origin_x) / self.cell_size).clamp(0.0, (nx - 1) as f64);
        let fy = ((y - self.origin_y) / self.cell_size).clamp(0.0, (ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(ny.saturating_sub(2));
        let i1 = (i0 + 1).min(nx - 1);
        let j1 = (j0 + 1).min(ny - 1);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let d = &self.depths;
        let a = d[i0][j0] * (1.0 - ty) + d[i0][j1] * ty;
        let b = d[i1][j0] * (1.0 - ty) + d[i1][j1] * ty;
        a * (1.0 - tx) + b * tx
    }
}

impl TerrainField {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            TerrainField::Flat { depth } | TerrainField::Slope { depth, .. }
                if !depth.is_finite() =>
            {
                Err("depth must be finite".into())
            }
            TerrainField::Slope { gradient, .. } if gradient.iter().any(|g| !g.is_finite()) => {
                Err("gradient must be finite".into())
            }
            TerrainField::Bumps {
                depth,
                amplitude,
                wavelength,
            } => {
                if !depth.is_finite() || !amplitude.is_finite() {
                    Err("depth and amplitude must be finite".into())
                } else if !(wavelength.is_finite() && *wavelength > 0.0) {
                    Err("wavelength must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Seafloor depth below the surface at `(x, y)`; grids clamp at their edges.
pub fn terrain_depth(terrain: &TerrainField, x: f64, y: f64) -> f64 {
    match terrain {
        TerrainField::Flat { depth } => *depth,
        TerrainField::Slope { depth, gradient } => depth + gradient[0] * x + gradient[1] * y,
        TerrainField::Bumps {
            depth,
            amplitude,
            wavelength,
        } => {
            let k = 2.0 * PI / wavelength;
            depth - amplitude * (k * x).sin() * (k * y).cos()
        }
        TerrainField::Grid(grid) => grid.depth_at(x, y),
    }
}

/// Seeded noise source for one sensor.
#[derive(Debug, Clone)]
pub struct SensorRng(ChaCha8Rng);

impl SensorRng {
    pub fn new(master_seed: u64, sub_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(sub_seed);
        Self(rng)
    }

    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        let z: f64 = self.0.sample(StandardNormal);
        sigma * z
    }

    /// True with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.0.random::<f64>() < p
    }
}

pub fn sample_depth(
    state: &VehicleState,
    cfg: &SensorConfig,
    rng: &mut SensorRng,
    stamp_ns: u64,
) -> Measurement {
    let dropped = rng.chance(cfg.dropout_prob);
    let depth = state.position.z + rng.gaussian(cfg.sigma.channel(0));
    Measurement {
        stamp_ns,
        valid: !dropped,
        reading: Reading::Depth { depth },
    }
}

pub fn sample_imu(
    state: &VehicleState,
    cfg: &SensorConfig,
    rng: &mut SensorRng,
    stamp_ns: u64,
) -> Measurement {
    let dropped = rng.chance(cfg.dropout_prob);
    let (roll, pitch, yaw) = state.euler();
    let truth = [roll, pitch, yaw, state.nu[3], state.nu[4], state.nu[5]];
    let mut noisy = [0.0; 6];
    for (i, (out, t)) in noisy.iter_mut().zip(truth).enumerate() {
        *out = t + rng.gaussian(cfg.sigma.channel(i));
    }
    Measurement {
        stamp_ns,
        valid: !dropped,
        reading: Reading::Imu {
            roll: wrap_angle(noisy[0]),
            pitch: noisy[1],
            yaw: wrap_angle(noisy[2]),
            p: noisy[3],
            q: noisy[4],
            r: noisy[5],
        },
    }
}

pub fn sample_mag(
    state: &VehicleState,
    cfg: &SensorConfig,
    rng: &mut SensorRng,
    stamp_ns: u64,
) -> Measurement {
    let dropped = rng.chance(cfg.dropout_prob);
    let heading = wrap_angle(state.yaw() + rng.gaussian(cfg.sigma.channel(0)));
    Measurement {
        stamp_ns,
        valid: !dropped,
        reading: Reading::Mag { heading },
    }
}

/// Vertical altitude above the floor plus body velocity. A non-positive
/// altitude means the vehicle is on the bottom; the sample is still produced.
pub fn sample_dvl(
    state: &VehicleState,
    terrain: &TerrainField,
    cfg: &SensorConfig,
    rng: &mut SensorRng,
    stamp_ns: u64,
) -> Measurement {
    let dropped = rng.chance(cfg.dropout_prob);
    let floor = terrain_depth(terrain, state.position.x, state.position.y);
    let altitude = floor - state.position.z + rng.gaussian(cfg.sigma.channel(0));
    let mut velocity = [0.0; 3];
    for (i, v) in velocity.iter_mut().enumerate() {
        *v = state.nu[i] + rng.gaussian(cfg.sigma.channel(i + 1));
    }
    if dropped {
        return Measurement {
            stamp_ns,
            valid: false,
            reading: Reading::Dvl {
                altitude: 0.0,
                velocity: [0.0; 3],
            },
        };
    }
    Measurement {
        stamp_ns,
        valid: true,
        reading: Reading::Dvl { altitude, velocity },
    }
}

/// One scheduled sensor: configuration, period in physics ticks, RNG stream.
#[derive(Debug, Clone)]
pub struct ScheduledSensor {
    pub kind: SensorKind,
    pub cfg: SensorConfig,
    pub period_ticks: u64,
    rng: SensorRng,
}

impl ScheduledSensor {
    pub fn new(
        kind: SensorKind,
        cfg: SensorConfig,
        physics_rate_hz: u64,
        master_seed: u64,
    ) -> Self {
        let period_ticks = ((physics_rate_hz as f64) / cfg.rate_hz).round().max(1.0) as u64;
        let rng = SensorRng::new(master_seed, cfg.seed);
        Self {
            kind,
            cfg,
            period_ticks,
            rng,
        }
    }

    pub fn is_due(&self, tick: u64) -> bool {
        tick.is_multiple_of(self.period_ticks)
    }

    pub fn sample(
        &mut self,
        state: &VehicleState,
        terrain: &TerrainField,
        stamp_ns: u64,
    ) -> Measurement {
        match self.kind {
            SensorKind::Depth => sample_depth(state, &self.cfg, &mut self.rng, stamp_ns),
            SensorKind::Imu => sample_imu(state, &self.cfg, &mut self.rng, stamp_ns),
            SensorKind::Mag => sample_mag(state, &self.cfg, &mut self.rng, stamp_ns),
            SensorKind::Dvl => sample_dvl(state, terrain, &self.cfg, &mut self.rng, stamp_ns),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Vector3, Vector6};

    fn cfg(sigma: f64, dropout: f64, seed: u64) -> SensorConfig {
        SensorConfig {
            rate_hz: 10.0,
            sigma: Sigma::Uniform(sigma),
            dropout_prob: dropout,
            seed,
        }
    }

    fn at(x: f64, y: f64, z: f64) -> VehicleState {
        VehicleState::new(Vector3::new(x, y, z), [0.0; 3], Vector6::zeros())
    }

    #[test]
    fn flat_terrain_is_constant() {
        let t = TerrainField::Flat { depth: 10.0 };
        for (x, y) in [(0.0, 0.0), (-120.0, 4.0), (1e4, -3e3)] {
            assert_eq!(terrain_depth(&t, x, y), 10.0);
        }
    }

    #[test]
    fn grid_interpolation() {
        let grid = TerrainGrid {
            origin_x: 0.0,
            origin_y: 0.0,
            cell_size: 2.0,
            depths: vec![vec![8.0, 10.0], vec![10.0, 12.0]],
        };
        let t = TerrainField::Grid(grid);
        assert_eq!(terrain_depth(&t, 0.0, 0.0), 8.0);
        assert_eq!(terrain_depth(&t, 2.0, 2.0), 12.0);
        assert_eq!(terrain_depth(&t, 0.0, 2.0), 10.0);
        assert_eq!(terrain_depth(&t, 1.0, 1.0), 10.0);
        // Edge clamp.
        assert_eq!(terrain_depth(&t, -5.0, -5.0), 8.0);
        assert_eq!(terrain_depth(&t, 50.0, 50.0), 12.0);
    }

    #[test]
    fn grid_csv_parses() {
        let text = "origin_x,origin_y,cell_size\n-1,-1,1\n1,2,3\n4,5,6\n";
        let g = TerrainGrid::parse_csv(text, "mem").unwrap();
        assert_eq!(g.depths, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(terrain_depth(&TerrainField::Grid(g), 0.0, 0.0), 5.0);

        let bad = "origin_x,origin_y,cell_size\n0,0,1\n1,2\n3\n";
        assert!(matches!(
            TerrainGrid::parse_csv(bad, "mem"),
            Err(TerrainError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn bumps_peak_to_trough() {
        let t = TerrainField::Bumps {
            depth: 20.0,
            amplitude: 2.25,
            wavelength: 20.0,
        };
        let samples: Vec<f64> = (0..400)
            .map(|i| terrain_depth(&t, i as f64 * 0.05, 0.0))
            .collect();
        let max = samples.iter().cloned().fold(f64::MIN, f64::max);
        let min = samples.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min > 4.0);
    }

    #[test]
    fn noiseless_samples_are_exact() {
        let mut rng = SensorRng::new(7, 1);
        let m = sample_depth(&at(0.0, 0.0, 5.0), &cfg(0.0, 0.0, 1), &mut rng, 0);
        assert_eq!(m.reading, Reading::Depth { depth: 5.0 });
        assert!(m.valid);

        let still = VehicleState::default();
        let m = sample_imu(&still, &cfg(0.0, 0.0, 2), &mut rng, 0);
        assert_eq!(
            m.reading,
            Reading::Imu {
                roll: 0.0,
                pitch: 0.0,
                yaw: 0.0,
                p: 0.0,
                q: 0.0,
                r: 0.0
            }
        );

        let pitched = VehicleState::new(Vector3::zeros(), [0.0, 0.2, 0.0], Vector6::zeros());
        let Reading::Imu { pitch, .. } =
            sample_imu(&pitched, &cfg(0.0, 0.0, 2), &mut rng, 0).reading
        else {
            unreachable!()
        };
        assert_relative_eq!(pitch, 0.2, epsilon = 1e-12);

        let heading = VehicleState::new(Vector3::zeros(), [0.0, 0.0, -1.2], Vector6::zeros());
        let Reading::Mag { heading: h } =
            sample_mag(&heading, &cfg(0.0, 0.0, 3), &mut rng, 0).reading
        else {
            unreachable!()
        };
        assert_relative_eq!(h, -1.2, epsilon = 1e-12);

        let t = TerrainField::Flat { depth: 10.0 };
        let m = sample_dvl(&at(0.0, 0.0, 4.0), &t, &cfg(0.0, 0.0, 4), &mut rng, 0);
        assert_eq!(
            m.reading,
            Reading::Dvl {
                altitude: 6.0,
                velocity: [0.0; 3]
            }
        );
    }

    #[test]
    fn mag_wraps() {
        let mut rng = SensorRng::new(3, 3);
        let state = VehicleState::new(Vector3::zeros(), [0.0, 0.0, PI - 0.01], Vector6::zeros());
        for _ in 0..10_000 {
            let Reading::Mag { heading } =
                sample_mag(&state, &cfg(0.05, 0.0, 3), &mut rng, 0).reading
            else {
                unreachable!()
            };
            assert!(heading > -PI && heading <= PI);
        }
    }

    #[test]
    fn dvl_dropout() {
        let t = TerrainField::Flat { depth: 10.0 };
        let s = at(0.0, 0.0, 4.0);
        let mut rng = SensorRng::new(11, 4);
        assert!((0..1000).all(|_| !sample_dvl(&s, &t, &cfg(0.0, 1.0, 4), &mut rng, 0).valid));
        let invalid = (0..10_000)
            .filter(|_| !sample_dvl(&s, &t, &cfg(0.0, 0.1, 4), &mut rng, 0).valid)
            .count();
        assert!((850..=1150).contains(&invalid), "{invalid}");
    }

    #[test]
    fn schedule_periods() {
        let s = ScheduledSensor::new(SensorKind::Depth, cfg(0.01, 0.0, 1), 100, 0);
        assert_eq!(s.period_ticks, 10);
        let due: Vec<u64> = (0..35).filter(|&t| s.is_due(t)).collect();
        assert_eq!(due, vec![0, 10, 20, 30]);
    }
}
