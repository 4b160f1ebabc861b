//! Length-prefixed JSON pub/sub over TCP for software- and hardware-in-the-loop
//! runs.

pub mod frame;
pub mod latch;
pub mod replay;
pub mod server;

pub use frame::{decode_frame, encode_frame, Decoded, Frame, FrameDecoder, FrameError, Payload};
pub use latch::{Command, CommandLatch, CommandLimits, ControlMode};
pub use replay::{read_replay, ReplayError, ReplaySource, ReplayWriter};
pub use server::{BridgeConfig, BridgeServer, ClientId, Inbound};

use crate::sensors::Measurement;

/// Frames published at the end of a tick: clock first, then the due
/// measurements in fixed sensor order, then faults.
pub fn tick_frames(
    tick: u64,
    stamp_ns: u64,
    measurements: &[Measurement],
    faults: &[Frame],
) -> Vec<Frame> {
    let mut sorted: Vec<&Measurement> = measurements.iter().collect();
    sorted.sort_by_key(|m| m.reading.kind());
    let mut frames = Vec::with_capacity(1 + sorted.len() + faults.len());
    frames.push(Frame::clock(tick, stamp_ns));
    frames.extend(sorted.into_iter().map(Frame::from_measurement));
    frames.extend(faults.iter().cloned());
    frames
}
