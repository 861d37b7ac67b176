//! Single collision domain 802.11 DCF simulator.
//!
//! Time is kept in integer microseconds. Stations see the medium through
//! their own audibility sets, which lets an attacker transmit
//! directionally; everything else hears every frame.

mod backoff;
mod event_log;
mod frame;
mod params;
mod sim;
mod station;
mod trace;

pub use backoff::{backoff_draw, on_tx_failure, Contention, FailureOutcome};
pub use event_log::{read_event_log, write_event_log, EventRecord};
pub use frame::{FrameId, FrameKind, FrameOnAir, FrameRequest, RawFrame};
pub use params::{air_time, MacParams, MAX_PAYLOAD};
pub use sim::{Notice, Simulator, StationStats};
pub use station::{StationId, StationSet, StationState, TrafficMode};
pub(crate) use trace::TraceRecorder;
pub use trace::{ChannelState, ChannelTrace, Segment};

/// Microseconds.
pub type Micros = u64;
