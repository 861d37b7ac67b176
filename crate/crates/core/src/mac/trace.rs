use serde::{Deserialize, Serialize};

use super::station::StationId;
use super::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelState {
    Busy,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub state: ChannelState,
    pub start: Micros,
    pub duration: u32,
}

impl Segment {
    pub fn busy(start: Micros, duration: u32) -> Self {
        Segment {
            state: ChannelState::Busy,
            start,
            duration,
        }
    }

    pub fn idle(start: Micros, duration: u32) -> Self {
        Segment {
            state: ChannelState::Idle,
            start,
            duration,
        }
    }

    pub fn end(&self) -> Micros {
        self.start + self.duration as Micros
    }
}

/// Busy/idle record of the medium as one station senses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelTrace {
    pub observer: StationId,
    pub segments: Vec<Segment>,
}

impl ChannelTrace {
    pub fn new(observer: StationId) -> Self {
        ChannelTrace {
            observer,
            segments: Vec::new(),
        }
    }

    /// Builds a trace from consecutive `(state, duration)` pairs starting at
    /// `start`.
    pub fn from_durations(
        observer: StationId,
        start: Micros,
        parts: &[(ChannelState, u32)],
    ) -> Self {
        let mut t = start;
        let segments = parts
            .iter()
            .map(|&(state, duration)| {
                let s = Segment {
                    state,
                    start: t,
                    duration,
                };
                t += duration as Micros;
                s
            })
            .collect();
        ChannelTrace { observer, segments }
    }

    /// Checks alternation, positive durations and contiguity.
    pub fn is_well_formed(&self) -> bool {
        self.segments.iter().all(|s| s.duration > 0)
            && self
                .segments
                .windows(2)
                .all(|w| w[0].state != w[1].state && w[0].end() == w[1].start)
    }
}

/// Accumulates a trace from state transitions, dropping zero-length
/// segments.
#[derive(Debug, Clone)]
pub(crate) struct TraceRecorder {
    current: ChannelState,
    since: Micros,
}

impl TraceRecorder {
    pub(crate) fn new(start: Micros) -> Self {
        TraceRecorder {
            current: ChannelState::Idle,
            since: start,
        }
    }

    /// Records a transition at `now`; returns the closed segment.
    pub(crate) fn transition(&mut self, state: ChannelState, now: Micros) -> Option<Segment> {
        if state == self.current {
            return None;
        }
        let closed = (now > self.since).then(|| Segment {
            state: self.current,
            start: self.since,
            duration: (now - self.since) as u32,
        });
        self.current = state;
        self.since = now;
        closed
    }
}
