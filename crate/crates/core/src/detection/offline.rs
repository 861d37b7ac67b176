use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mac::{ChannelState, ChannelTrace, EventRecord, Micros, StationId, TraceRecorder};

fn audible(outcome: &str, observer: StationId) -> Result<bool> {
    if outcome == "*" {
        return Ok(true);
    }
    for part in outcome.split(';').filter(|s| !s.is_empty()) {
        let id: u16 = part
            .parse()
            .map_err(|_| Error::Malformed(format!("bad listener list {outcome:?}")))?;
        if id == observer.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Rebuilds the busy/idle trace `observer` sensed from an exported event
/// log, so a run can be re-classified offline. The observer's own
/// transmissions count as busy.
pub fn trace_from_event_log(records: &[EventRecord], observer: StationId) -> Result<ChannelTrace> {
    let mut trace = ChannelTrace::new(observer);
    if records.is_empty() {
        return Ok(trace);
    };
    let mut rec = TraceRecorder::new(0);
    // per (transmitter, kind): whether each open frame is sensed by observer
    let mut open: HashMap<(u16, String), VecDeque<bool>> = HashMap::new();
    let mut busy = 0u32;
    let mut last_time: Option<Micros> = None;

    let mut commit = |busy: u32, at: Micros, trace: &mut ChannelTrace| {
        let state = if busy > 0 {
            ChannelState::Busy
        } else {
            ChannelState::Idle
        };
        if let Some(seg) = rec.transition(state, at) {
            trace.segments.push(seg);
        }
    };

    for r in records {
        if let Some(t) = last_time {
            if r.time_us < t {
                return Err(Error::Malformed("event log is not time ordered".into()));
            }
            if r.time_us > t {
                commit(busy, t, &mut trace);
            }
        }
        last_time = Some(r.time_us);
        if let Some(kind) = r.event_kind.strip_prefix("start_") {
            let hears = r.station == observer.0 || audible(&r.outcome, observer)?;
            open.entry((r.station, kind.to_string()))
                .or_default()
                .push_back(hears);
            busy += hears as u32;
        } else if let Some(kind) = r.event_kind.strip_prefix("end_") {
            let hears = open
                .get_mut(&(r.station, kind.to_string()))
                .and_then(|q| q.pop_front())
                .ok_or_else(|| {
                    Error::Malformed(format!("end without start at {} us", r.time_us))
                })?;
            busy -= hears as u32;
        }
    }
    if let Some(t) = last_time {
        commit(busy, t, &mut trace);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::{MacParams, Simulator, TrafficMode};

    #[test]
    fn reconstruction_matches_live_trace() {
        let mut sim = Simulator::new(MacParams::default(), 11).unwrap();
        let ap = sim.add_station(TrafficMode::Silent, None);
        for _ in 0..4 {
            sim.add_station(TrafficMode::Saturated, Some(ap));
        }
        let obs = sim.add_station(TrafficMode::Silent, None);
        sim.record_trace(obs, true);
        sim.enable_event_log();
        sim.run_until(200_000, &mut |_, _| {});
        let live = sim.take_trace(obs).unwrap();
        let log = sim.take_event_log().unwrap();
        let rebuilt = trace_from_event_log(&log, obs).unwrap();
        assert!(rebuilt.is_well_formed());
        let n = live.segments.len();
        assert!(n > 100);
        assert_eq!(&rebuilt.segments[..n], &live.segments[..]);
    }
}
