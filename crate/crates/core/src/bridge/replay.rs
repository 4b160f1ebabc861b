//! Command recordings: a sequence of `(u64 big-endian tick, encoded frame)`
//! records in arrival order.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::frame::{decode_frame, encode_frame, Decoded, Frame, FrameError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("replay record at byte {offset} is truncated")]
    Truncated { offset: usize },
    #[error("replay record at byte {offset}: {source}")]
    Frame {
        offset: usize,
        #[source]
        source: FrameError,
    },
    #[error("replay record at byte {offset} goes back in time (tick {tick} after {previous})")]
    OutOfOrder {
        offset: usize,
        tick: u64,
        previous: u64,
    },
}

pub struct ReplayWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl ReplayWriter {
    pub fn create(path: &Path) -> Result<Self, ReplayError> {
        let file = File::create(path).map_err(|source| ReplayError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        })
    }

    /// Appends one record and flushes, so an interrupted run keeps it.
    pub fn record(&mut self, tick: u64, frame: &Frame) -> Result<(), ReplayError> {
        let bytes =
            encode_frame(frame).map_err(|source| ReplayError::Frame { offset: 0, source })?;
        self.out
            .write_all(&tick.to_be_bytes())
            .and_then(|_| self.out.write_all(&bytes))
            .and_then(|_| self.out.flush())
            .map_err(|source| self.io(source))
    }

    pub fn finish(mut self) -> Result<(), ReplayError> {
        self.out.flush().map_err(|source| self.io(source))
    }

    fn io(&self, source: io::Error) -> ReplayError {
        ReplayError::Io {
            path: self.path.clone(),
            source,
        }
    }
}

pub fn parse_replay(bytes: &[u8]) -> Result<Vec<(u64, Frame)>, ReplayError> {
    let mut records = Vec::new();
    let mut offset = 0;
    let mut previous = 0;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        if rest.len() < 8 {
            return Err(ReplayError::Truncated { offset });
        }
        let tick = u64::from_be_bytes(rest[..8].try_into().expect("8 bytes"));
        if tick < previous {
            return Err(ReplayError::OutOfOrder {
                offset,
                tick,
                previous,
            });
        }
        match decode_frame(&rest[8..]) {
            Decoded::NeedMore => return Err(ReplayError::Truncated { offset }),
            Decoded::Invalid { error, .. } => {
                return Err(ReplayError::Frame {
                    offset,
                    source: error,
                })
            }
            Decoded::Frame { frame, consumed } => {
                records.push((tick, frame));
                offset += 8 + consumed;
            }
        }
        previous = tick;
    }
    Ok(records)
}

pub fn read_replay(path: &Path) -> Result<Vec<(u64, Frame)>, ReplayError> {
    let bytes = std::fs::read(path).map_err(|source| ReplayError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_replay(&bytes)
}

/// Hands recorded frames back to the loop tick by tick.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    records: Vec<(u64, Frame)>,
    next: usize,
}

impl ReplaySource {
    pub fn new(records: Vec<(u64, Frame)>) -> Self {
        Self { records, next: 0 }
    }

    /// Frames recorded at `tick`. Records for earlier ticks that were never
    /// requested are skipped.
    pub fn take(&mut self, tick: u64) -> Vec<Frame> {
        while self.next < self.records.len() && self.records[self.next].0 < tick {
            self.next += 1;
        }
        let start = self.next;
        while self.next < self.records.len() && self.records[self.next].0 == tick {
            self.next += 1;
        }
        self.records[start..self.next]
            .iter()
            .map(|(_, f)| f.clone())
            .collect()
    }
}
