use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::station::{StationId, StationSet};
use super::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Data,
    Ack,
    KeyExchange,
    Jam,
    ForgedData,
    ForgedAck,
}

impl FrameKind {
    /// Frames that are acknowledged by their destination.
    pub fn expects_ack(self) -> bool {
        matches!(
            self,
            FrameKind::Data | FrameKind::KeyExchange | FrameKind::ForgedData
        )
    }

    pub fn is_ack(self) -> bool {
        matches!(self, FrameKind::Ack | FrameKind::ForgedAck)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::Ack => "ack",
            FrameKind::KeyExchange => "key_exchange",
            FrameKind::Jam => "jam",
            FrameKind::ForgedData => "forged_data",
            FrameKind::ForgedAck => "forged_ack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "data" => FrameKind::Data,
            "ack" => FrameKind::Ack,
            "key_exchange" => FrameKind::KeyExchange,
            "jam" => FrameKind::Jam,
            "forged_data" => FrameKind::ForgedData,
            "forged_ack" => FrameKind::ForgedAck,
            _ => return None,
        })
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A transmission on the medium.
#[derive(Debug, Clone)]
pub struct FrameOnAir {
    pub id: FrameId,
    /// Station physically radiating the frame.
    pub transmitter: StationId,
    /// Source address carried in the MAC header; differs from
    /// `transmitter` for forged frames.
    pub sender: StationId,
    /// `None` for jamming signals.
    pub dest: Option<StationId>,
    pub kind: FrameKind,
    pub payload_len: u32,
    pub start: Micros,
    pub duration: u32,
    pub audible_to: StationSet,
    pub payload: Option<Arc<[u8]>>,
}

impl FrameOnAir {
    pub fn end(&self) -> Micros {
        self.start + self.duration as Micros
    }
}

/// A frame waiting in a station's transmit queue.
#[derive(Debug, Clone)]
pub struct FrameRequest {
    pub dest: StationId,
    pub payload_len: u32,
    pub kind: FrameKind,
    /// Send `difs` after the medium goes idle instead of running backoff.
    pub priority: bool,
    pub payload: Option<Arc<[u8]>>,
}

impl FrameRequest {
    pub fn data(dest: StationId, payload_len: u32) -> Self {
        FrameRequest {
            dest,
            payload_len,
            kind: FrameKind::Data,
            priority: false,
            payload: None,
        }
    }
}

/// A frame injected outside DCF (jams and forgeries).
#[derive(Debug, Clone)]
pub struct RawFrame {
    pub transmitter: StationId,
    pub sender: StationId,
    pub dest: Option<StationId>,
    pub kind: FrameKind,
    pub payload_len: u32,
    pub duration: u32,
    pub audible_to: StationSet,
    pub payload: Option<Arc<[u8]>>,
}
