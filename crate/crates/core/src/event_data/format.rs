//! Canonical little-endian event file:
//!
//! ```text
//! "EVS1" | u32 channel_count | u32 event_count | event_count × (u64 time_us, u32 channel)
//! ```

use std::fs;
use std::path::Path;

use super::{Event, EventStream};
use crate::error::{Result, SnnError};

pub const EVENT_MAGIC: &[u8; 4] = b"EVS1";
const HEADER_LEN: usize = 12;
const RECORD_LEN: usize = 12;

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(stream)).map_err(|e| SnnError::io(path, e))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| SnnError::io(path, e))?;
    decode(&bytes, path)
}

pub(crate) fn encode(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(EVENT_MAGIC);
    out.extend_from_slice(&stream.channel_count().to_le_bytes());
    out.extend_from_slice(&(stream.len() as u32).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.time_us.to_le_bytes());
        out.extend_from_slice(&e.channel.to_le_bytes());
    }
    out
}

pub(crate) fn decode(bytes: &[u8], path: &Path) -> Result<EventStream> {
    let fail = |offset: usize, message: String| SnnError::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 || &bytes[..4] != EVENT_MAGIC {
        return Err(fail(0, "bad magic, expected \"EVS1\"".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), "truncated header".into()));
    }
    let channel_count = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let event_count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if channel_count == 0 {
        return Err(fail(4, "channel_count must be positive".into()));
    }

    let mut events = Vec::with_capacity(event_count.min(bytes.len() / RECORD_LEN));
    let mut prev = 0u64;
    for i in 0..event_count {
        let at = HEADER_LEN + i * RECORD_LEN;
        let rec = bytes
            .get(at..at + RECORD_LEN)
            .ok_or_else(|| fail(at, format!("truncated record {i} of {event_count}")))?;
        let time_us = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let channel = u32::from_le_bytes(rec[8..].try_into().unwrap());
        if time_us < prev {
            return Err(fail(
                at,
                format!("record {i} at {time_us} us is out of order"),
            ));
        }
        if channel >= channel_count {
            return Err(fail(
                at + 8,
                format!("record {i} channel {channel} >= channel_count {channel_count}"),
            ));
        }
        prev = time_us;
        events.push(Event { time_us, channel });
    }
    let end = HEADER_LEN + event_count * RECORD_LEN;
    if bytes.len() > end {
        return Err(fail(end, "trailing bytes after last record".into()));
    }
    EventStream::new(channel_count, events)
}
