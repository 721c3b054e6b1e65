//! Structured event log, written as newline-delimited JSON.
//!
//! The first line of a log file is a header record carrying
//! [`LOG_SCHEMA`] and [`LOG_VERSION`]; every following line is one
//! [`Event`], tagged by its `event` field.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{ResourceIndex, Slot};

pub const LOG_SCHEMA: &str = "sidelink-events";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Data,
    Request,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrantSource {
    /// Chosen by the transmitter from its own sensing.
    Standard,
    /// Granted by the receiver.
    Coop,
    /// Chosen by the transmitter after the cooperative exchange gave up.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Pairing {
        slot: Slot,
        vehicle: usize,
        partner: Option<usize>,
    },
    TbGenerated {
        slot: Slot,
        tb: u64,
        src: usize,
        dst: usize,
    },
    Grant {
        slot: Slot,
        vehicle: usize,
        grant: u64,
        resources: Vec<ResourceIndex>,
        rri: u64,
        rc: u32,
        start: Slot,
        source: GrantSource,
    },
    SelectionFailed {
        slot: Slot,
        vehicle: usize,
    },
    /// A receiver answered a request; `granted = false` is a negative answer.
    Response {
        slot: Slot,
        rx: usize,
        tx: usize,
        granted: bool,
    },
    Timeout {
        slot: Slot,
        vehicle: usize,
        attempt: u32,
        fallback: bool,
    },
    Tx {
        slot: Slot,
        vehicle: usize,
        subchannel: usize,
        beam: Option<usize>,
        payload: Payload,
        dst: usize,
        tb: Option<u64>,
        grant: Option<u64>,
    },
    /// A copy could not be scheduled because the vehicle already transmits
    /// in that slot.
    TxSkipped {
        slot: Slot,
        vehicle: usize,
        tb: u64,
    },
    Decode {
        slot: Slot,
        tx: usize,
        rx: usize,
        payload: Payload,
        tb: Option<u64>,
        success: bool,
        /// `None` when the receiver was itself transmitting.
        sinr_db: Option<f64>,
        /// `None` when no co-channel transmitter was active.
        interference_dbm: Option<f64>,
    },
    TbOutcome {
        slot: Slot,
        tb: u64,
        delivered: bool,
    },
    TbDropped {
        slot: Slot,
        tb: u64,
    },
}

impl Event {
    pub fn slot(&self) -> Slot {
        match *self {
            Event::Pairing { slot, .. }
            | Event::TbGenerated { slot, .. }
            | Event::Grant { slot, .. }
            | Event::SelectionFailed { slot, .. }
            | Event::Response { slot, .. }
            | Event::Timeout { slot, .. }
            | Event::Tx { slot, .. }
            | Event::TxSkipped { slot, .. }
            | Event::Decode { slot, .. }
            | Event::TbOutcome { slot, .. }
            | Event::TbDropped { slot, .. } => slot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

/// Writes the header and one JSON object per event.
pub fn write_jsonl<W: Write>(events: &[Event], mut out: W) -> Result<()> {
    let header = Header {
        schema: LOG_SCHEMA.into(),
        version: LOG_VERSION,
    };
    let io = |e: serde_json::Error| SimError::from(std::io::Error::other(e));
    serde_json::to_writer(&mut out, &header).map_err(io)?;
    out.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut out, e).map_err(io)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a log written by [`write_jsonl`].
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut lines = input.lines();
    let bad =
        |line: usize, reason: String| SimError::Domain(format!("event log line {line}: {reason}"));
    let first = lines
        .next()
        .ok_or_else(|| bad(1, "missing header".into()))??;
    let header: Header = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
    if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
        return Err(bad(
            1,
            format!("unsupported schema {} v{}", header.schema, header.version),
        ));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let events = vec![
            Event::TbGenerated {
                slot: 800,
                tb: 0,
                src: 1,
                dst: 2,
            },
            Event::Tx {
                slot: 801,
                vehicle: 1,
                subchannel: 3,
                beam: Some(4),
                payload: Payload::Data,
                dst: 2,
                tb: Some(0),
                grant: Some(7),
            },
            Event::Decode {
                slot: 801,
                tx: 1,
                rx: 2,
                payload: Payload::Data,
                tb: Some(0),
                success: true,
                sinr_db: Some(12.5),
                interference_dbm: None,
            },
        ];
        let mut buf = Vec::new();
        write_jsonl(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"schema\":\"sidelink-events\",\"version\":1}\n"));
        assert!(text.contains("\"event\":\"tb_generated\""));
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), events);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_jsonl("{\"schema\":\"x\",\"version\":1}\n".as_bytes()).is_err());
        assert!(read_jsonl("".as_bytes()).is_err());
    }
}
