use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of the exported event log.
///
/// `event_kind` is `start_<frame kind>` / `end_<frame kind>` for frames on
/// the medium, or one of `ack_received`, `ack_timeout`, `discard`, `timer`.
/// For `start_*` rows `outcome` lists the stations that can hear the frame
/// (`*` for everyone, otherwise ids joined by `;`); for `end_*` rows it is
/// `ok`, `collided` (with respect to the destination) or `none` for jams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time_us: u64,
    pub event_kind: String,
    pub station: u16,
    pub dest: Option<u16>,
    pub payload_len: u32,
    pub outcome: String,
}

pub fn write_event_log<W: Write>(records: &[EventRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_event_log<R: Read>(input: R) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
