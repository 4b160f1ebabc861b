//! Wire format: a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON `{"topic":..,"stamp_ns":..,"type":..,"data":..}`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::autopilot::{Setpoint, SetpointMode};
use crate::sensors::{Measurement, Reading};

/// Largest accepted JSON body, bytes.
pub const MAX_PAYLOAD: usize = 1 << 20;
pub const PREFIX_LEN: usize = 4;

pub const TOPIC_CLOCK: &str = "/clock";
pub const TOPIC_DEPTH: &str = "/sensors/depth";
pub const TOPIC_IMU: &str = "/sensors/imu";
pub const TOPIC_MAG: &str = "/sensors/mag";
pub const TOPIC_DVL: &str = "/sensors/dvl";
pub const TOPIC_FAULT: &str = "/faults";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthMsg {
    pub depth: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuMsg {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagMsg {
    pub heading: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvlMsg {
    pub altitude: f64,
    pub velocity: [f64; 3],
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockMsg {
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinCommand {
    pub deltas: Vec<f64>,
    pub thruster: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchCommand {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointCommand {
    pub mode: SetpointMode,
    pub value: f64,
    pub heading: f64,
    pub speed: f64,
}

impl From<&SetpointCommand> for Setpoint {
    fn from(c: &SetpointCommand) -> Self {
        Setpoint {
            mode: c.mode,
            value: c.value,
            heading: c.heading,
            speed: c.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultMsg {
    pub code: String,
    pub message: String,
}

/// Typed frame payload; the variant is the frame's `type` tag.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Depth(DepthMsg),
    Imu(ImuMsg),
    Mag(MagMsg),
    Dvl(DvlMsg),
    FinCommand(FinCommand),
    WrenchCommand(WrenchCommand),
    SetpointCommand(SetpointCommand),
    Clock(ClockMsg),
    Fault(FaultMsg),
}

impl Payload {
    pub fn type_tag(&self) -> &'static str {
        match self {
            Payload::Depth(_) => "depth",
            Payload::Imu(_) => "imu",
            Payload::Mag(_) => "mag",
            Payload::Dvl(_) => "dvl",
            Payload::FinCommand(_) => "fin_command",
            Payload::WrenchCommand(_) => "wrench_command",
            Payload::SetpointCommand(_) => "setpoint_command",
            Payload::Clock(_) => "clock",
            Payload::Fault(_) => "fault",
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(
            self,
            Payload::FinCommand(_) | Payload::WrenchCommand(_) | Payload::SetpointCommand(_)
        )
    }

    fn from_value(tag: &str, data: Value) -> Result<Self, FrameError> {
        fn parse<T: DeserializeOwned>(tag: &str, data: Value) -> Result<T, FrameError> {
            serde_json::from_value(data).map_err(|e| FrameError::Schema {
                type_tag: tag.to_string(),
                reason: e.to_string(),
            })
        }
        Ok(match tag {
            "depth" => Payload::Depth(parse(tag, data)?),
            "imu" => Payload::Imu(parse(tag, data)?),
            "mag" => Payload::Mag(parse(tag, data)?),
            "dvl" => Payload::Dvl(parse(tag, data)?),
            "fin_command" => Payload::FinCommand(parse(tag, data)?),
            "wrench_command" => Payload::WrenchCommand(parse(tag, data)?),
            "setpoint_command" => Payload::SetpointCommand(parse(tag, data)?),
            "clock" => Payload::Clock(parse(tag, data)?),
            "fault" => Payload::Fault(parse(tag, data)?),
            other => return Err(FrameError::UnknownType(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub topic: String,
    pub stamp_ns: u64,
    pub payload: Payload,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFrame {
    topic: String,
    stamp_ns: u64,
    #[serde(rename = "type")]
    type_tag: String,
    data: Value,
}

/// Borrowed view used for encoding, so payload fields keep declaration order.
#[derive(Serialize)]
struct WireFrameRef<'a> {
    topic: &'a str,
    stamp_ns: u64,
    #[serde(rename = "type")]
    type_tag: &'static str,
    data: PayloadData<'a>,
}

struct PayloadData<'a>(&'a Payload);

impl Serialize for PayloadData<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Payload::Depth(m) => m.serialize(s),
            Payload::Imu(m) => m.serialize(s),
            Payload::Mag(m) => m.serialize(s),
            Payload::Dvl(m) => m.serialize(s),
            Payload::FinCommand(m) => m.serialize(s),
            Payload::WrenchCommand(m) => m.serialize(s),
            Payload::SetpointCommand(m) => m.serialize(s),
            Payload::Clock(m) => m.serialize(s),
            Payload::Fault(m) => m.serialize(s),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("frame body of {0} bytes exceeds the {MAX_PAYLOAD} byte limit")]
    Oversize(usize),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown frame type {0:?}")]
    UnknownType(String),
    #[error("payload does not match the {type_tag} schema: {reason}")]
    Schema { type_tag: String, reason: String },
    #[error("frame topic must be non-empty")]
    EmptyTopic,
}

impl FrameError {
    /// Short machine-readable code carried in fault frames.
    pub fn code(&self) -> &'static str {
        match self {
            FrameError::Oversize(_) => "oversize",
            FrameError::Malformed(_) => "malformed",
            FrameError::UnknownType(_) => "unknown_type",
            FrameError::Schema { .. } => "schema",
            FrameError::EmptyTopic => "empty_topic",
        }
    }

    /// Oversize frames poison the stream; everything else skips one frame.
    pub fn is_fatal(&self) -> bool {
        matches!(self, FrameError::Oversize(_))
    }
}

/// Result of trying to pull one frame off the front of a byte buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    /// Not enough bytes yet; nothing consumed.
    NeedMore,
    Frame {
        frame: Frame,
        consumed: usize,
    },
    /// A complete but invalid frame of `consumed` bytes. Fatal errors
    /// (oversize) report `consumed == 0`: the stream cannot be resynchronized.
    Invalid {
        error: FrameError,
        consumed: usize,
    },
}

impl Frame {
    pub fn new(topic: impl Into<String>, stamp_ns: u64, payload: Payload) -> Self {
        Self {
            topic: topic.into(),
            stamp_ns,
            payload,
        }
    }

    pub fn fault(stamp_ns: u64, code: &str, message: impl Into<String>) -> Self {
        Frame::new(
            TOPIC_FAULT,
            stamp_ns,
            Payload::Fault(FaultMsg {
                code: code.to_string(),
                message: message.into(),
            }),
        )
    }

    pub fn clock(tick: u64, stamp_ns: u64) -> Self {
        Frame::new(TOPIC_CLOCK, stamp_ns, Payload::Clock(ClockMsg { tick }))
    }

    /// Sensor frame on the sensor's standard topic.
    pub fn from_measurement(m: &Measurement) -> Self {
        let (topic, payload) = match m.reading {
            Reading::Depth { depth } => (
                TOPIC_DEPTH,
                Payload::Depth(DepthMsg {
                    depth,
                    valid: m.valid,
                }),
            ),
            Reading::Imu {
                roll,
                pitch,
                yaw,
                p,
                q,
                r,
            } => (
                TOPIC_IMU,
                Payload::Imu(ImuMsg {
                    roll,
                    pitch,
                    yaw,
                    p,
                    q,
                    r,
                    valid: m.valid,
                }),
            ),
            Reading::Mag { heading } => (
                TOPIC_MAG,
                Payload::Mag(MagMsg {
                    heading,
                    valid: m.valid,
                }),
            ),
            Reading::Dvl { altitude, velocity } => (
                TOPIC_DVL,
                Payload::Dvl(DvlMsg {
                    altitude,
                    velocity,
                    valid: m.valid,
                }),
            ),
        };
        Frame::new(topic, m.stamp_ns, payload)
    }
}

/// Serializes the JSON body without the length prefix.
pub fn frame_body(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    if frame.topic.is_empty() {
        return Err(FrameError::EmptyTopic);
    }
    let wire = WireFrameRef {
        topic: &frame.topic,
        stamp_ns: frame.stamp_ns,
        type_tag: frame.payload.type_tag(),
        data: PayloadData(&frame.payload),
    };
    serde_json::to_vec(&wire).map_err(|e| FrameError::Malformed(e.to_string()))
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    let body = frame_body(frame)?;
    if body.len() > MAX_PAYLOAD {
        return Err(FrameError::Oversize(body.len()));
    }
    let mut out = Vec::with_capacity(PREFIX_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Parses a JSON body (no prefix) into a typed frame.
pub fn parse_body(body: &[u8]) -> Result<Frame, FrameError> {
    let wire: WireFrame =
        serde_json::from_slice(body).map_err(|e| FrameError::Malformed(e.to_string()))?;
    if wire.topic.is_empty() {
        return Err(FrameError::EmptyTopic);
    }
    let payload = Payload::from_value(&wire.type_tag, wire.data)?;
    Ok(Frame {
        topic: wire.topic,
        stamp_ns: wire.stamp_ns,
        payload,
    })
}

/// Streaming decode of the first frame in `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Decoded {
    if bytes.len() < PREFIX_LEN {
        return Decoded::NeedMore;
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_PAYLOAD {
        return Decoded::Invalid {
            error: FrameError::Oversize(len),
            consumed: 0,
        };
    }
    if bytes.len() < PREFIX_LEN + len {
        return Decoded::NeedMore;
    }
    let consumed = PREFIX_LEN + len;
    match parse_body(&bytes[PREFIX_LEN..consumed]) {
        Ok(frame) => Decoded::Frame { frame, consumed },
        Err(error) => Decoded::Invalid { error, consumed },
    }
}

/// Accumulates stream bytes and yields frames as they complete.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// `None` when more bytes are needed. After a fatal error the decoder
    /// keeps returning it.
    pub fn next_frame(&mut self) -> Option<Result<Frame, FrameError>> {
        match decode_frame(&self.buf) {
            Decoded::NeedMore => None,
            Decoded::Frame { frame, consumed } => {
                self.buf.drain(..consumed);
                Some(Ok(frame))
            }
            Decoded::Invalid { error, consumed } => {
                self.buf.drain(..consumed);
                Some(Err(error))
            }
        }
    }
}
