//! Self-contained SVG time-series plots of a trajectory log.
//!
//! Output depends only on the log: fixed layout, fixed palette, fixed
//! number formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::log::{LogRow, TrajectoryLog};
use crate::autopilot::SetpointMode;

pub const CHANNELS: [&str; 7] = [
    "depth",
    "altitude",
    "heading",
    "pitch",
    "speed",
    "fins",
    "shaft_speed",
];

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no channels requested; available: {}", CHANNELS.join(", "))]
    NoChannels,
    #[error("unknown channel {name:?}; available: {}", CHANNELS.join(", "))]
    UnknownChannel { name: String },
    #[error("log has no rows")]
    EmptyLog,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

struct Trace {
    label: String,
    dashed: bool,
    /// `None` breaks the line.
    values: Vec<Option<f64>>,
}

struct Panel {
    title: &'static str,
    unit: &'static str,
    /// Draw the y axis growing downward (depth-like quantities).
    inverted: bool,
    traces: Vec<Trace>,
}

fn actual(label: &str, rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> Trace {
    Trace {
        label: label.to_string(),
        dashed: false,
        values: rows.iter().map(|r| Some(f(r))).collect(),
    }
}

fn commanded(label: &str, rows: &[LogRow], f: impl Fn(&LogRow) -> Option<f64>) -> Trace {
    Trace {
        label: label.to_string(),
        dashed: true,
        values: rows.iter().map(f).collect(),
    }
}

fn panel(name: &str, log: &TrajectoryLog) -> Option<Panel> {
    let rows = &log.rows;
    let deg = 180.0 / std::f64::consts::PI;
    Some(match name {
        "depth" => Panel {
            title: "Depth",
            unit: "m",
            inverted: true,
            traces: vec![
                commanded("commanded", rows, |r| r.depth_target),
                actual("actual", rows, |r| r.position[2]),
            ],
        },
        "altitude" => Panel {
            title: "Altitude",
            unit: "m",
            inverted: false,
            traces: vec![
                commanded("commanded", rows, |r| {
                    r.setpoint
                        .filter(|s| s.mode == SetpointMode::Altitude)
                        .map(|s| s.value)
                }),
                actual("actual", rows, |r| r.altitude),
            ],
        },
        "heading" => Panel {
            title: "Heading",
            unit: "deg",
            inverted: false,
            traces: vec![
                commanded("commanded", rows, |r| r.setpoint.map(|s| s.heading * deg)),
                actual("actual", rows, |r| r.euler[2] * deg),
            ],
        },
        "pitch" => Panel {
            title: "Pitch",
            unit: "deg",
            inverted: false,
            traces: vec![actual("actual", rows, |r| r.euler[1] * deg)],
        },
        "speed" => Panel {
            title: "Surge speed",
            unit: "m/s",
            inverted: false,
            traces: vec![
                commanded("commanded", rows, |r| r.setpoint.map(|s| s.speed)),
                actual("actual", rows, |r| r.nu[0]),
            ],
        },
        "fins" => Panel {
            title: "Fin deflection",
            unit: "deg",
            inverted: false,
            traces: (0..log.fin_count)
                .map(|i| actual(&format!("fin {i}"), rows, move |r| r.deltas[i] * deg))
                .collect(),
        },
        "shaft_speed" => Panel {
            title: "Shaft speed",
            unit: "rev/s",
            inverted: false,
            traces: vec![actual("actual", rows, |r| r.shaft_speed)],
        },
        _ => return None,
    })
}

/// Rounds a span to a 1-2-5 tick step giving roughly five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the requested channels as stacked panels sharing the time axis.
pub fn render_svg(log: &TrajectoryLog, channels: &[&str]) -> Result<String, PlotError> {
    if channels.is_empty() {
        return Err(PlotError::NoChannels);
    }
    let panels = channels
        .iter()
        .map(|&c| {
            panel(c, log).ok_or_else(|| PlotError::UnknownChannel {
                name: c.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if log.rows.is_empty() {
        return Err(PlotError::EmptyLog);
    }

    let times: Vec<f64> = log.rows.iter().map(|r| r.time).collect();
    let t0 = times[0];
    let t1 = times[times.len() - 1].max(t0 + 1e-9);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let height = PANEL_HEIGHT * panels.len() as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (pi, p) in panels.iter().enumerate() {
        let top = pi as f64 * PANEL_HEIGHT + MARGIN_TOP;
        let left = MARGIN_LEFT;
        let finite = p
            .traces
            .iter()
            .flat_map(|t| t.values.iter().flatten())
            .filter(|v| v.is_finite());
        let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
        let x_of = |t: f64| left + (t - t0) / (t1 - t0) * plot_w;
        let y_of = |v: f64| {
            let frac = (v - lo) / (hi - lo);
            if p.inverted {
                top + frac * plot_h
            } else {
                top + (1.0 - frac) * plot_h
            }
        };

        let _ = writeln!(
            svg,
            r##"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="14" font-weight="bold">{}</text>"#,
            left,
            top - 10.0,
            escape(p.title)
        );

        // Y grid and labels.
        let step = tick_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        while v <= hi {
            let y = y_of(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
                left + plot_w
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                y + 4.0,
                fmt_num(v)
            );
            v += step;
        }
        let _ = writeln!(
            svg,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{} [{}]</text>"#,
            left - 55.0,
            top + plot_h / 2.0,
            escape(p.title),
            escape(p.unit)
        );

        // X ticks and label.
        let tstep = tick_step(t1 - t0);
        let mut t = (t0 / tstep).ceil() * tstep;
        while t <= t1 + 1e-9 {
            let x = x_of(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##,
                top + plot_h,
                top + plot_h + 5.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                top + plot_h + 18.0,
                fmt_num(t)
            );
            t += tstep;
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time [s]</text>"#,
            left + plot_w / 2.0,
            top + plot_h + 35.0
        );

        // Traces.
        for (ti, trace) in p.traces.iter().enumerate() {
            let color = PALETTE[ti % PALETTE.len()];
            let dash = if trace.dashed {
                r#" stroke-dasharray="6,4""#
            } else {
                ""
            };
            let mut d = String::new();
            let mut pen_down = false;
            for (&t, v) in times.iter().zip(&trace.values) {
                match v.filter(|v| v.is_finite()) {
                    Some(v) => {
                        let _ = write!(
                            d,
                            "{}{:.2},{:.2} ",
                            if pen_down { 'L' } else { 'M' },
                            x_of(t),
                            y_of(v)
                        );
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            if !d.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    d.trim_end()
                );
            }
            let ly = top + 10.0 + 18.0 * ti as f64;
            let lx = left + plot_w + 15.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
                lx + 25.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 32.0,
                ly + 4.0,
                escape(&trace.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(log: &TrajectoryLog, channels: &[&str], path: &Path) -> Result<(), PlotError> {
    let svg = render_svg(log, channels)?;
    std::fs::write(path, svg).map_err(|source| PlotError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autopilot::Setpoint;
    use crate::bridge::ControlMode;
    use crate::harness::log::MeasuredSnapshot;

    fn log() -> TrajectoryLog {
        let mut log = TrajectoryLog::new(2);
        for k in 0..50u64 {
            let t = k as f64 * 0.1;
            log.rows.push(LogRow {
                tick: k,
                time: t,
                position: [t, 0.0, 2.0 * (1.0 - (-t).exp())],
                euler: [0.0, -0.1, 0.0],
                nu: [1.5, 0.0, 0.0, 0.0, 0.0, 0.0],
                deltas: vec![0.01, -0.01],
                shaft_speed: 9.0,
                mode: ControlMode::Mission,
                setpoint: Some(Setpoint {
                    mode: SetpointMode::Depth,
                    value: 2.0,
                    heading: 0.0,
                    speed: 1.5,
                }),
                depth_target: Some(2.0),
                measured: MeasuredSnapshot::default(),
                altitude: 10.0,
                collision: false,
                broach: false,
            });
        }
        log
    }

    #[test]
    fn depth_panel_has_two_traces_and_labels() {
        let svg = render_svg(&log(), &["depth"]).unwrap();
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("commanded"));
        assert!(svg.contains("actual"));
        assert!(svg.contains("Depth [m]"));
        assert!(svg.contains("time [s]"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let all: Vec<&str> = CHANNELS.to_vec();
        assert_eq!(
            render_svg(&log(), &all).unwrap(),
            render_svg(&log(), &all).unwrap()
        );
    }

    #[test]
    fn channel_errors() {
        assert!(matches!(
            render_svg(&log(), &[]),
            Err(PlotError::NoChannels)
        ));
        let err = render_svg(&log(), &["depht"]).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("depht") && msg.contains("shaft_speed"),
            "{msg}"
        );
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(tick_step(10.0), 2.0);
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(tick_step(37.0), 5.0);
    }
}
