use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backoff::{backoff_draw, on_tx_failure, FailureOutcome};
use super::event_log::EventRecord;
use super::frame::{FrameId, FrameKind, FrameOnAir, FrameRequest, RawFrame};
use super::params::{air_time, MacParams};
use super::station::{StationId, StationSet, StationState, TrafficMode};
use super::trace::{ChannelState, ChannelTrace, Segment, TraceRecorder};
use super::Micros;
use crate::error::{Error, Result};

/// Something the driver of a simulation may want to react to.
#[derive(Debug, Clone)]
pub enum Notice {
    FrameStart(FrameOnAir),
    /// `delivered` is true when the destination decoded the frame.
    FrameEnd {
        frame: FrameOnAir,
        delivered: bool,
    },
    /// A data-bearing frame was decoded by its destination.
    Delivered {
        to: StationId,
        frame: FrameOnAir,
    },
    AckReceived {
        station: StationId,
        frame: FrameId,
    },
    TxFailed {
        station: StationId,
        frame: FrameId,
        discarded: bool,
    },
    Timer {
        owner: StationId,
        token: u64,
    },
    /// A closed busy/idle segment of a station whose trace is recorded.
    Segment {
        station: StationId,
        segment: Segment,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StationStats {
    pub tx_attempts: u64,
    pub successes: u64,
    pub failures: u64,
    pub discards: u64,
    pub received: u64,
}

#[derive(Debug)]
enum Event {
    FrameEnd(FrameId),
    TxAttempt { station: StationId, gen: u64 },
    AckTimeout { station: StationId, frame: FrameId },
    SendAck { from: StationId, to: StationId },
    Arrival { station: StationId },
    RawStart(Box<RawFrame>),
    Timer { owner: StationId, token: u64 },
}

#[derive(Debug)]
struct Scheduled {
    time: Micros,
    // frame ends sort before anything else at the same instant
    class: u8,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.class, self.seq).cmp(&(other.time, other.class, other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Contend,
    Transmitting(FrameId),
    AwaitAck(FrameId),
}

#[derive(Debug)]
struct Node {
    st: StationState,
    dcf: bool,
    responds: bool,
    phase: Phase,
    traffic_dest: Option<StationId>,
    ready_at: Micros,
    gen: u64,
    /// Pending transmission time and first countable slot boundary.
    scheduled: Option<(Micros, u64)>,
    heard: u32,
    transmitting: u32,
    idle_since: Micros,
    recorder: Option<TraceRecorder>,
    trace: Option<ChannelTrace>,
    stats: StationStats,
}

impl Node {
    fn busy(&self) -> bool {
        self.heard > 0 || self.transmitting > 0
    }
}

#[derive(Debug)]
struct Active {
    frame: FrameOnAir,
    corrupted: StationSet,
    from_queue: bool,
}

/// Discrete-event simulator of one 802.11 DCF collision domain.
///
/// Stations added with [`Simulator::add_station`] run DCF; stations added
/// with [`Simulator::add_raw_station`] only transmit what the driver injects.
/// Identical `(setup, seed)` pairs yield identical runs.
#[derive(Debug)]
pub struct Simulator {
    params: MacParams,
    rng: ChaCha8Rng,
    now: Micros,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    nodes: Vec<Node>,
    active: Vec<Active>,
    next_frame: u64,
    all: StationSet,
    dirty: StationSet,
    notices: Vec<Notice>,
    log: Option<Vec<EventRecord>>,
    payload_range: (u32, u32),
    started: bool,
}

impl Simulator {
    pub fn new(params: MacParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Simulator {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            nodes: Vec::new(),
            active: Vec::new(),
            next_frame: 0,
            all: StationSet::empty(),
            dirty: StationSet::empty(),
            notices: Vec::new(),
            log: None,
            payload_range: (500, 2000),
            started: false,
        })
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn all_stations(&self) -> StationSet {
        self.all
    }

    /// Payload size range (inclusive, bytes) of self-generated traffic.
    pub fn set_payload_range(&mut self, lo: u32, hi: u32) -> Result<()> {
        if lo == 0 || lo > hi {
            return Err(Error::config("traffic.payload", "need 0 < lo <= hi"));
        }
        self.payload_range = (lo, hi);
        Ok(())
    }

    fn push_node(&mut self, mode: TrafficMode, dcf: bool, dest: Option<StationId>) -> StationId {
        assert!(self.nodes.len() < StationSet::CAPACITY, "too many stations");
        let id = StationId(self.nodes.len() as u16);
        self.nodes.push(Node {
            st: StationState::new(id, mode, self.params.cw_min),
            dcf,
            responds: dcf,
            phase: Phase::Idle,
            traffic_dest: dest,
            ready_at: 0,
            gen: 0,
            scheduled: None,
            heard: 0,
            transmitting: 0,
            idle_since: 0,
            recorder: None,
            trace: None,
            stats: StationStats::default(),
        });
        self.all.insert(id);
        id
    }

    /// Adds a DCF station. Self-generated traffic is sent to `dest`.
    pub fn add_station(&mut self, mode: TrafficMode, dest: Option<StationId>) -> StationId {
        if !matches!(mode, TrafficMode::Silent) {
            assert!(dest.is_some(), "traffic needs a destination");
        }
        self.push_node(mode, true, dest)
    }

    /// Adds a station that neither contends nor acknowledges; it transmits
    /// only through [`Simulator::transmit_raw`].
    pub fn add_raw_station(&mut self) -> StationId {
        self.push_node(TrafficMode::Silent, false, None)
    }

    /// Records the busy/idle trace of `id`. Closed segments are reported as
    /// [`Notice::Segment`]; `keep` also stores them.
    pub fn record_trace(&mut self, id: StationId, keep: bool) {
        let n = &mut self.nodes[id.0 as usize];
        n.recorder = Some(TraceRecorder::new(self.now));
        if keep {
            n.trace = Some(ChannelTrace::new(id));
        }
    }

    pub fn trace(&self, id: StationId) -> Option<&ChannelTrace> {
        self.nodes[id.0 as usize].trace.as_ref()
    }

    pub fn take_trace(&mut self, id: StationId) -> Option<ChannelTrace> {
        self.nodes[id.0 as usize].trace.take()
    }

    pub fn stats(&self, id: StationId) -> StationStats {
        self.nodes[id.0 as usize].stats
    }

    pub fn station_state(&self, id: StationId) -> &StationState {
        &self.nodes[id.0 as usize].st
    }

    pub fn enable_event_log(&mut self) {
        self.log = Some(Vec::new());
    }

    pub fn event_log(&self) -> Option<&[EventRecord]> {
        self.log.as_deref()
    }

    pub fn take_event_log(&mut self) -> Option<Vec<EventRecord>> {
        self.log.take()
    }

    pub fn enqueue(&mut self, id: StationId, req: FrameRequest) -> Result<()> {
        air_time(req.payload_len, &self.params)?;
        let node = &mut self.nodes[id.0 as usize];
        if !node.dcf {
            return Err(Error::InvalidArgument(format!(
                "station {id} does not run DCF"
            )));
        }
        node.st.queue.push_back(req);
        if self.started && node.phase == Phase::Idle {
            self.begin_contention(id);
        }
        Ok(())
    }

    /// Injects a frame at `at` (not earlier than now).
    pub fn transmit_raw(&mut self, frame: RawFrame, at: Micros) -> Result<()> {
        if at < self.now {
            return Err(Error::InvalidArgument(
                "raw frame scheduled in the past".into(),
            ));
        }
        if frame.duration == 0 || frame.audible_to.is_empty() {
            return Err(Error::InvalidArgument(
                "raw frame needs a duration and listeners".into(),
            ));
        }
        if at == self.now && self.started {
            self.start_raw(frame);
        } else {
            self.schedule(at, 1, Event::RawStart(Box::new(frame)));
        }
        Ok(())
    }

    pub fn schedule_timer(&mut self, owner: StationId, at: Micros, token: u64) {
        self.schedule(at.max(self.now), 1, Event::Timer { owner, token });
    }

    /// Processes every event strictly before `end`, then advances the clock
    /// to `end`.
    pub fn run_until<H>(&mut self, end: Micros, handler: &mut H)
    where
        H: FnMut(&mut Simulator, Notice),
    {
        self.ensure_started();
        self.flush(handler);
        while let Some(Reverse(next)) = self.queue.peek() {
            if next.time >= end {
                break;
            }
            let t = next.time;
            self.now = t;
            while matches!(self.queue.peek(), Some(Reverse(s)) if s.time == t) {
                let Reverse(s) = self.queue.pop().expect("peeked");
                self.dispatch(s.event);
                self.flush(handler);
            }
            self.commit_traces();
            self.flush(handler);
        }
        self.now = self.now.max(end);
    }

    fn flush<H>(&mut self, handler: &mut H)
    where
        H: FnMut(&mut Simulator, Notice),
    {
        while !self.notices.is_empty() {
            let batch = std::mem::take(&mut self.notices);
            for n in batch {
                handler(self, n);
            }
        }
    }

    fn schedule(&mut self, time: Micros, class: u8, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            time,
            class,
            seq: self.seq,
            event,
        }));
    }

    fn ensure_started(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        for i in 0..self.nodes.len() {
            let id = StationId(i as u16);
            let node = &self.nodes[i];
            if !node.dcf {
                continue;
            }
            match node.st.mode {
                TrafficMode::Saturated => self.begin_contention(id),
                TrafficMode::Poisson { .. } => self.schedule_arrival(id),
                TrafficMode::Silent => {
                    if !node.st.queue.is_empty() {
                        self.begin_contention(id);
                    }
                }
            }
        }
    }

    fn log(
        &mut self,
        kind: String,
        station: StationId,
        dest: Option<StationId>,
        len: u32,
        outcome: String,
    ) {
        if let Some(log) = self.log.as_mut() {
            log.push(EventRecord {
                time_us: self.now,
                event_kind: kind,
                station: station.0,
                dest: dest.map(|d| d.0),
                payload_len: len,
                outcome,
            });
        }
    }

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::FrameEnd(id) => self.end_frame(id),
            Event::TxAttempt { station, gen } => {
                let n = &self.nodes[station.0 as usize];
                if n.gen == gen && n.phase == Phase::Contend {
                    self.transmit_head(station);
                }
            }
            Event::AckTimeout { station, frame } => {
                if self.nodes[station.0 as usize].phase == Phase::AwaitAck(frame) {
                    self.tx_failed(station, frame);
                }
            }
            Event::SendAck { from, to } => {
                if self.nodes[from.0 as usize].transmitting == 0 {
                    let f = RawFrame {
                        transmitter: from,
                        sender: from,
                        dest: Some(to),
                        kind: FrameKind::Ack,
                        payload_len: 0,
                        duration: self.params.ack_duration,
                        audible_to: self.all,
                        payload: None,
                    };
                    self.start_raw(f);
                }
            }
            Event::Arrival { station } => {
                let req = self.generate_frame(station);
                let n = &mut self.nodes[station.0 as usize];
                n.st.queue.push_back(req);
                let idle = n.phase == Phase::Idle;
                self.schedule_arrival(station);
                if idle {
                    self.begin_contention(station);
                }
            }
            Event::RawStart(f) => self.start_raw(*f),
            Event::Timer { owner, token } => {
                self.log("timer".into(), owner, None, 0, token.to_string());
                self.notices.push(Notice::Timer { owner, token });
            }
        }
    }

    fn generate_frame(&mut self, id: StationId) -> FrameRequest {
        let (lo, hi) = self.payload_range;
        let len = self.rng.gen_range(lo..=hi);
        let dest = self.nodes[id.0 as usize]
            .traffic_dest
            .expect("traffic station has a destination");
        FrameRequest::data(dest, len)
    }

    fn schedule_arrival(&mut self, id: StationId) {
        let TrafficMode::Poisson { rate_bps } = self.nodes[id.0 as usize].st.mode else {
            return;
        };
        if rate_bps <= 0.0 {
            return;
        }
        let (lo, hi) = self.payload_range;
        let mean_bits = (lo + hi) as f64 / 2.0 * 8.0;
        let per_us = rate_bps / mean_bits / 1e6;
        let u: f64 = self.rng.gen();
        let gap = (-(1.0 - u).ln() / per_us).round().max(1.0) as Micros;
        self.schedule(self.now + gap, 1, Event::Arrival { station: id });
    }

    fn begin_contention(&mut self, id: StationId) {
        let now = self.now;
        let needs_frame = {
            let n = &self.nodes[id.0 as usize];
            n.st.queue.is_empty() && matches!(n.st.mode, TrafficMode::Saturated)
        };
        if needs_frame {
            let req = self.generate_frame(id);
            self.nodes[id.0 as usize].st.queue.push_back(req);
        }
        let n = &mut self.nodes[id.0 as usize];
        let Some(head) = n.st.queue.front() else {
            n.phase = Phase::Idle;
            return;
        };
        if !head.priority && n.st.backoff.is_none() {
            let cw = n.st.cw;
            n.st.backoff = Some(backoff_draw(cw, &mut self.rng).expect("cw >= 2"));
        }
        n.phase = Phase::Contend;
        n.ready_at = now;
        if !n.busy() {
            self.schedule_attempt(id);
        }
    }

    fn schedule_attempt(&mut self, id: StationId) {
        let slot = self.params.slot as Micros;
        let difs = self.params.difs as Micros;
        let n = &mut self.nodes[id.0 as usize];
        let base = n.idle_since + difs;
        let priority = n.st.queue.front().is_some_and(|f| f.priority);
        let (tx, k0) = if priority {
            (base.max(n.ready_at), 0)
        } else {
            // the first countable boundary lies strictly after ready_at;
            // a station never transmits at the DIFS boundary itself
            let k0 = if n.ready_at < base + slot {
                1
            } else {
                (n.ready_at - base) / slot + 1
            };
            let c = n.st.backoff.unwrap_or(0) as Micros;
            (base + (k0 + c) * slot, k0)
        };
        n.gen += 1;
        n.scheduled = Some((tx, k0));
        let gen = n.gen;
        self.schedule(tx, 1, Event::TxAttempt { station: id, gen });
    }

    fn freeze(&mut self, id: StationId) {
        let now = self.now;
        let slot = self.params.slot as Micros;
        let difs = self.params.difs as Micros;
        let n = &mut self.nodes[id.0 as usize];
        let Some((tx, k0)) = n.scheduled else {
            return;
        };
        if tx == now {
            // transmits in this same slot
            return;
        }
        if k0 > 0 {
            let base = n.idle_since + difs;
            let consumed = if now < base + k0 * slot {
                0
            } else {
                (now - base) / slot - k0 + 1
            };
            if let Some(b) = n.st.backoff.as_mut() {
                *b = b.saturating_sub(consumed as u32);
            }
        }
        n.scheduled = None;
        n.gen += 1;
    }

    fn view_changed(&mut self, id: StationId, was_busy: bool) {
        let n = &self.nodes[id.0 as usize];
        let busy = n.busy();
        if busy == was_busy {
            return;
        }
        self.dirty.insert(id);
        if busy {
            self.freeze(id);
        } else {
            let now = self.now;
            let n = &mut self.nodes[id.0 as usize];
            n.idle_since = now;
            if n.phase == Phase::Contend {
                self.schedule_attempt(id);
            }
        }
    }

    fn commit_traces(&mut self) {
        let dirty = std::mem::take(&mut self.dirty);
        let now = self.now;
        for id in dirty.iter() {
            let n = &mut self.nodes[id.0 as usize];
            let state = if n.busy() {
                ChannelState::Busy
            } else {
                ChannelState::Idle
            };
            let Some(rec) = n.recorder.as_mut() else {
                continue;
            };
            if let Some(seg) = rec.transition(state, now) {
                if let Some(tr) = n.trace.as_mut() {
                    tr.segments.push(seg);
                }
                self.notices.push(Notice::Segment {
                    station: id,
                    segment: seg,
                });
            }
        }
    }

    fn transmit_head(&mut self, id: StationId) {
        let n = &mut self.nodes[id.0 as usize];
        let head =
            n.st.queue
                .front()
                .cloned()
                .expect("contending with a frame");
        n.scheduled = None;
        n.st.backoff = None;
        n.stats.tx_attempts += 1;
        let duration = air_time(head.payload_len, &self.params).expect("checked on enqueue");
        let fid = FrameId(self.next_frame);
        n.phase = Phase::Transmitting(fid);
        let frame = FrameOnAir {
            id: fid,
            transmitter: id,
            sender: id,
            dest: Some(head.dest),
            kind: head.kind,
            payload_len: head.payload_len,
            start: self.now,
            duration,
            audible_to: self.all,
            payload: head.payload,
        };
        self.start_frame(frame, true);
    }

    fn start_raw(&mut self, raw: RawFrame) {
        let frame = FrameOnAir {
            id: FrameId(self.next_frame),
            transmitter: raw.transmitter,
            sender: raw.sender,
            dest: raw.dest,
            kind: raw.kind,
            payload_len: raw.payload_len,
            start: self.now,
            duration: raw.duration,
            audible_to: raw.audible_to,
            payload: raw.payload,
        };
        self.start_frame(frame, false);
    }

    fn start_frame(&mut self, frame: FrameOnAir, from_queue: bool) {
        self.next_frame += 1;
        let t = frame.transmitter;
        if self.log.is_some() {
            let audible = if frame.audible_to == self.all {
                "*".to_string()
            } else {
                let ids: Vec<String> = frame.audible_to.iter().map(|s| s.0.to_string()).collect();
                ids.join(";")
            };
            self.log(
                format!("start_{}", frame.kind),
                t,
                frame.dest,
                frame.payload_len,
                audible,
            );
        }

        // half duplex: whatever the transmitter was hearing is lost to it
        let was_busy = self.nodes[t.0 as usize].busy();
        for a in self.active.iter_mut() {
            if a.frame.audible_to.contains(t) {
                a.corrupted.insert(t);
            }
        }
        self.nodes[t.0 as usize].transmitting += 1;
        self.view_changed(t, was_busy);

        let mut corrupted = StationSet::empty();
        for s in frame.audible_to.without(t).iter() {
            let was_busy = self.nodes[s.0 as usize].busy();
            if was_busy {
                corrupted.insert(s);
                for a in self.active.iter_mut() {
                    if a.frame.audible_to.contains(s) {
                        a.corrupted.insert(s);
                    }
                }
            }
            self.nodes[s.0 as usize].heard += 1;
            self.view_changed(s, was_busy);
        }
        let end = frame.end();
        let id = frame.id;
        self.notices.push(Notice::FrameStart(frame.clone()));
        self.active.push(Active {
            frame,
            corrupted,
            from_queue,
        });
        self.schedule(end, 0, Event::FrameEnd(id));
    }

    fn end_frame(&mut self, id: FrameId) {
        let idx = self
            .active
            .iter()
            .position(|a| a.frame.id == id)
            .expect("ending frame is active");
        let Active {
            frame,
            corrupted,
            from_queue,
        } = self.active.swap_remove(idx);
        let t = frame.transmitter;

        let was_busy = self.nodes[t.0 as usize].busy();
        self.nodes[t.0 as usize].transmitting -= 1;
        self.view_changed(t, was_busy);
        for s in frame.audible_to.without(t).iter() {
            let was_busy = self.nodes[s.0 as usize].busy();
            self.nodes[s.0 as usize].heard -= 1;
            self.view_changed(s, was_busy);
        }

        if from_queue {
            self.nodes[t.0 as usize].phase = Phase::AwaitAck(id);
            let at = self.now + self.params.ack_timeout() as Micros;
            self.schedule(
                at,
                1,
                Event::AckTimeout {
                    station: t,
                    frame: id,
                },
            );
        }

        let delivered = match frame.dest {
            Some(d) => d != t && frame.audible_to.contains(d) && !corrupted.contains(d),
            None => false,
        };
        if self.log.is_some() {
            let outcome = match (frame.dest, delivered) {
                (None, _) => "none",
                (Some(_), true) => "ok",
                (Some(_), false) => "collided",
            };
            self.log(
                format!("end_{}", frame.kind),
                t,
                frame.dest,
                frame.payload_len,
                outcome.to_string(),
            );
        }

        if delivered {
            let d = frame.dest.expect("delivered frames have a destination");
            if frame.kind.expects_ack() {
                let node = &mut self.nodes[d.0 as usize];
                node.stats.received += 1;
                if node.responds {
                    let at = self.now + self.params.sifs as Micros;
                    self.schedule(
                        at,
                        1,
                        Event::SendAck {
                            from: d,
                            to: frame.sender,
                        },
                    );
                }
                self.notices.push(Notice::Delivered {
                    to: d,
                    frame: frame.clone(),
                });
            } else if frame.kind.is_ack() {
                if let Phase::AwaitAck(fid) = self.nodes[d.0 as usize].phase {
                    self.tx_succeeded(d, fid);
                }
            }
        }
        self.notices.push(Notice::FrameEnd { frame, delivered });
    }

    fn tx_succeeded(&mut self, id: StationId, frame: FrameId) {
        let cw_min = self.params.cw_min;
        let n = &mut self.nodes[id.0 as usize];
        n.st.cw = cw_min;
        n.st.retries = 0;
        n.st.backoff = None;
        n.st.queue.pop_front();
        n.stats.successes += 1;
        n.phase = Phase::Idle;
        if self.log.is_some() {
            self.log("ack_received".into(), id, None, 0, String::new());
        }
        self.notices
            .push(Notice::AckReceived { station: id, frame });
        self.begin_contention(id);
    }

    fn tx_failed(&mut self, id: StationId, frame: FrameId) {
        let n = &mut self.nodes[id.0 as usize];
        let st = std::mem::replace(
            &mut n.st,
            StationState::new(id, TrafficMode::Silent, self.params.cw_min),
        );
        let (mut st, outcome) = on_tx_failure(st, &self.params);
        if let Some(head) = st.queue.front_mut() {
            // retransmissions go through ordinary backoff
            head.priority = false;
        }
        n.st = st;
        n.stats.failures += 1;
        let discarded = outcome == FailureOutcome::Discard;
        if discarded {
            n.stats.discards += 1;
        }
        n.phase = Phase::Idle;
        self.log(
            if discarded { "discard" } else { "ack_timeout" }.into(),
            id,
            None,
            0,
            String::new(),
        );
        self.notices.push(Notice::TxFailed {
            station: id,
            frame,
            discarded,
        });
        self.begin_contention(id);
    }
}
