use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{RunMode, ScenarioConfig};
use crate::adversary::{attacker_step, AttackEvent, AttackKind, AttackerStrategy};
use crate::detection::{AlarmRule, DetectionContext, OccupancyClassifier, TransmissionOutcome};
use crate::error::{Error, Result};
use crate::mac::{
    FrameKind, FrameOnAir, FrameRequest, MacParams, Micros, Notice, Simulator, StationId,
    TrafficMode,
};
use crate::pairing::{
    alice_step, bob_step, ChannelEstimate, DhKeyPair, PartyAction, PartyEvent, PartyState,
    ProtocolMessage, Role, TimerKind, FRAME_LEN,
};

/// Who raised an alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Detector {
    Alice,
    Bob,
    /// The silent station of a monitor run.
    Observer,
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::Alice => "alice",
            Detector::Bob => "bob",
            Detector::Observer => "observer",
        })
    }
}

/// Per-run statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub run_id: u32,
    pub seed: u64,
    pub n_tx: u64,
    pub n_success: u64,
    pub n_collision: u64,
    pub max_consecutive_collisions: u32,
    pub alarm: bool,
    pub alarm_rule: Option<AlarmRule>,
    pub detected_by: Vec<Detector>,
    pub keys_match: bool,
}

impl RunResult {
    pub fn check(&self) -> Result<()> {
        if self.n_tx != self.n_success + self.n_collision {
            return Err(Error::Invariant(format!(
                "run {}: n_tx {} != {} + {}",
                self.run_id, self.n_tx, self.n_success, self.n_collision
            )));
        }
        if self.alarm != self.alarm_rule.is_some() || self.alarm == self.detected_by.is_empty() {
            return Err(Error::Invariant(format!(
                "run {}: alarm flag inconsistent with rule/detectors",
                self.run_id
            )));
        }
        Ok(())
    }
}

/// A frame seen on the air during a pairing run's detection window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSummary {
    pub transmitter: StationId,
    pub sender: StationId,
    pub dest: Option<StationId>,
    pub kind: FrameKind,
    /// Protocol message index for key exchange frames.
    pub index: Option<u16>,
    pub start: Micros,
    pub end: Micros,
}

/// Everything a pairing run produced.
#[derive(Debug, Clone)]
pub struct PairingReport {
    pub result: RunResult,
    pub alice_id: StationId,
    pub bob_id: StationId,
    pub m: Option<u16>,
    pub estimate: Option<ChannelEstimate>,
    pub alice_alarm: Option<(AlarmRule, Micros)>,
    pub bob_alarm: Option<(AlarmRule, Micros)>,
    pub alice_key: Option<BigUint>,
    pub bob_key: Option<BigUint>,
    /// Keys the attacker shares with Alice and with Bob.
    pub attacker_keys: (Option<BigUint>, Option<BigUint>),
    /// Frames starting inside the detection window.
    pub frames: Vec<FrameSummary>,
    /// What Bob classified inside the detection window.
    pub bob_outcomes: Vec<TransmissionOutcome>,
    pub window: (Micros, Micros),
}

fn secs(s: f64) -> Micros {
    (s * 1e6).round() as Micros
}

fn protocol_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Builds the background part of the channel: a sink that acknowledges
/// everything plus `n_background` traffic sources.
fn background(cfg: &ScenarioConfig, seed: u64) -> Result<(Simulator, StationId)> {
    let mut sim = Simulator::new(cfg.mac.clone(), seed)?;
    sim.set_payload_range(cfg.traffic.payload_min, cfg.traffic.payload_max)?;
    let sink = sim.add_station(TrafficMode::Silent, None);
    for _ in 0..cfg.traffic.n_background {
        sim.add_station(cfg.traffic.station_mode(), Some(sink));
    }
    Ok((sim, sink))
}

struct Party {
    id: StationId,
    state: Option<PartyState>,
    classifier: OccupancyClassifier,
    /// Own non-ACK transmissions still relevant for filtering.
    own: VecDeque<(Micros, Micros)>,
    window: Vec<TransmissionOutcome>,
}

impl Party {
    fn new(state: PartyState, params: &MacParams) -> Self {
        Party {
            id: state.id,
            state: Some(state),
            classifier: OccupancyClassifier::new(params),
            own: VecDeque::new(),
            window: Vec::new(),
        }
    }

    fn step(&mut self, event: PartyEvent, now: Micros) -> Vec<PartyAction> {
        let s = self.state.take().expect("party state present");
        let (s, actions) = match s.role {
            Role::Alice => alice_step(s, event, now),
            Role::Bob => bob_step(s, event, now),
        };
        self.state = Some(s);
        actions
    }

    fn state(&self) -> &PartyState {
        self.state.as_ref().expect("party state present")
    }

    /// A station cannot observe the fate of its own transmissions.
    fn is_own(&mut self, o: &TransmissionOutcome) -> bool {
        while self
            .own
            .front()
            .is_some_and(|&(_, end)| end + 1_000_000 < o.start)
        {
            self.own.pop_front();
        }
        self.own.iter().any(|&(s, e)| s < o.end() && o.start < e)
    }
}

const TOKEN_MONITOR_END: u64 = 0;
const TOKEN_EXPIRE: u64 = 1;

struct PairingDriver {
    alice: Party,
    bob: Party,
    attacker: Option<AttackerStrategy>,
    window: (Micros, Micros),
    frames: Vec<FrameSummary>,
    error: Option<Error>,
}

impl PairingDriver {
    fn party(&mut self, id: StationId) -> Option<&mut Party> {
        if id == self.alice.id {
            Some(&mut self.alice)
        } else if id == self.bob.id {
            Some(&mut self.bob)
        } else {
            None
        }
    }

    fn apply(&mut self, sim: &mut Simulator, id: StationId, actions: Vec<PartyAction>) {
        for a in actions {
            match a {
                PartyAction::ArmTimer { kind, at } => {
                    let token = match kind {
                        TimerKind::MonitorEnd => TOKEN_MONITOR_END,
                        TimerKind::Expire => TOKEN_EXPIRE,
                    };
                    sim.schedule_timer(id, at, token);
                }
                PartyAction::Send { message, priority } => {
                    let payload: Arc<[u8]> = match message.to_bytes() {
                        Ok(b) => b.into(),
                        Err(e) => {
                            self.error.get_or_insert(e);
                            continue;
                        }
                    };
                    let req = FrameRequest {
                        dest: message.dest,
                        payload_len: FRAME_LEN as u32,
                        kind: FrameKind::KeyExchange,
                        priority,
                        payload: Some(payload),
                    };
                    if let Err(e) = sim.enqueue(id, req) {
                        self.error.get_or_insert(e);
                    }
                }
                PartyAction::RaiseAlarm(_) | PartyAction::InstallKey(_) => {}
            }
        }
    }

    fn dispatch(&mut self, sim: &mut Simulator, id: StationId, event: PartyEvent) {
        let now = sim.now();
        let Some(p) = self.party(id) else { return };
        let actions = p.step(event, now);
        self.apply(sim, id, actions);
    }

    fn observe_frame(&mut self, f: &FrameOnAir) {
        let own = (f.start, f.end());
        if f.kind != FrameKind::Ack {
            if let Some(p) = self.party(f.transmitter) {
                p.own.push_back(own);
            }
        }
        if f.start >= self.window.0 && f.start < self.window.1 {
            let index = match f.kind {
                FrameKind::KeyExchange | FrameKind::ForgedData => f
                    .payload
                    .as_deref()
                    .and_then(|b| ProtocolMessage::parse(b, f.sender, f.transmitter).ok())
                    .map(|m| m.index),
                _ => None,
            };
            self.frames.push(FrameSummary {
                transmitter: f.transmitter,
                sender: f.sender,
                dest: f.dest,
                kind: f.kind,
                index,
                start: f.start,
                end: f.end(),
            });
        }
    }

    fn on_attack_event(&mut self, sim: &mut Simulator, ev: AttackEvent) {
        let Some(att) = self.attacker.take() else {
            return;
        };
        let (att, actions) = attacker_step(att, &ev, sim.now());
        self.attacker = Some(att);
        for a in actions {
            if let Err(e) = sim.transmit_raw(a.frame, a.at) {
                self.error.get_or_insert(e);
            }
        }
    }

    fn handle(&mut self, sim: &mut Simulator, notice: Notice) {
        match notice {
            Notice::FrameStart(f) => {
                self.observe_frame(&f);
                self.on_attack_event(sim, AttackEvent::FrameStart(f));
            }
            Notice::FrameEnd { frame, delivered } => {
                self.on_attack_event(sim, AttackEvent::FrameEnd { frame, delivered });
            }
            Notice::Delivered { to, frame } => {
                if !matches!(frame.kind, FrameKind::KeyExchange | FrameKind::ForgedData) {
                    return;
                }
                let Some(p) = self.party(to) else { return };
                let peer = p.state().peer;
                if frame.sender != peer {
                    return;
                }
                let Some(msg) = frame
                    .payload
                    .as_deref()
                    .and_then(|b| ProtocolMessage::parse(b, frame.sender, to).ok())
                else {
                    return;
                };
                self.dispatch(sim, to, PartyEvent::Message(msg));
            }
            Notice::AckReceived { station, .. } => {
                self.dispatch(sim, station, PartyEvent::AckReceived);
            }
            Notice::TxFailed {
                station, discarded, ..
            } => {
                self.dispatch(sim, station, PartyEvent::AckMissing { discarded });
            }
            Notice::Timer { owner, token } => {
                let kind = if token == TOKEN_MONITOR_END {
                    TimerKind::MonitorEnd
                } else {
                    TimerKind::Expire
                };
                self.dispatch(sim, owner, PartyEvent::Timer(kind));
            }
            Notice::Segment { station, segment } => {
                let window = self.window;
                let Some(p) = self.party(station) else { return };
                let Some(o) = p.classifier.push(segment) else {
                    return;
                };
                if p.is_own(&o) {
                    return;
                }
                if o.start >= window.0 && o.start < window.1 {
                    p.window.push(o);
                }
                self.dispatch(sim, station, PartyEvent::Outcome(o));
            }
        }
    }
}

/// Runs one pairing attempt: background traffic, Alice, Bob and the
/// configured attacker. Association completes after the warmup.
pub fn run_pairing(cfg: &ScenarioConfig, run_id: u32, seed: u64) -> Result<PairingReport> {
    let kind = cfg.attack_kind()?;
    let group = cfg.dh.group()?;
    let (mut sim, _) = background(cfg, seed)?;
    let alice_id = sim.add_station(TrafficMode::Silent, None);
    let bob_id = sim.add_station(TrafficMode::Silent, None);
    let attacker_id = (kind != AttackKind::None).then(|| sim.add_raw_station());
    sim.record_trace(alice_id, false);
    sim.record_trace(bob_id, false);

    let mut rng = ChaCha8Rng::seed_from_u64(protocol_seed(seed));
    let mut party = |role, id, peer| {
        let keys = DhKeyPair::generate(&group, &mut rng);
        let mut s = PartyState::new(
            role,
            id,
            peer,
            cfg.protocol.clone(),
            group.clone(),
            keys,
            cfg.mac.clone(),
        );
        s.ignore_alarms = cfg.detection.ignore_alarms;
        s.ctx = s
            .ctx
            .clone()
            .with_pattern_check(cfg.detection.pattern_check);
        Party::new(s, &cfg.mac)
    };
    let alice = party(Role::Alice, alice_id, bob_id);
    let bob = party(Role::Bob, bob_id, alice_id);
    let attacker = attacker_id.map(|id| {
        AttackerStrategy::new(
            kind,
            cfg.attacker.preamble_only,
            id,
            alice_id,
            bob_id,
            sim.all_stations(),
            cfg.mac.clone(),
            group.clone(),
            &mut rng,
        )
    });

    let t0 = secs(cfg.warmup);
    let window = (
        t0 + secs(cfg.protocol.monitor_s),
        t0 + secs(cfg.protocol.timer_s),
    );
    let mut d = PairingDriver {
        alice,
        bob,
        attacker,
        window,
        frames: Vec::new(),
        error: None,
    };
    sim.run_until(t0, &mut |sim, n| d.handle(sim, n));
    for id in [alice_id, bob_id] {
        d.dispatch(&mut sim, id, PartyEvent::Associated);
    }
    sim.run_until(window.1 + 1, &mut |sim, n| d.handle(sim, n));
    if let Some(e) = d.error {
        return Err(e);
    }

    let a = d.alice.state();
    let b = d.bob.state();
    let alice_alarm = a.first_alarm();
    let bob_alarm = b.first_alarm();
    let mut detected_by = Vec::new();
    if alice_alarm.is_some() {
        detected_by.push(Detector::Alice);
    }
    if bob_alarm.is_some() {
        detected_by.push(Detector::Bob);
    }
    let alarm_rule = [alice_alarm, bob_alarm]
        .into_iter()
        .flatten()
        .min_by_key(|&(_, at)| at)
        .map(|(r, _)| r);
    let n_collision = d
        .bob
        .window
        .iter()
        .filter(|o| o.kind.is_collision())
        .count() as u64;
    let n_tx = d.bob.window.len() as u64;
    let max_run = [a, b]
        .iter()
        .filter_map(|s| s.ctx.detector().map(|det| det.max_run))
        .max()
        .unwrap_or(0);
    let keys_match = matches!((&a.installed, &b.installed), (Some(x), Some(y)) if x == y);
    let result = RunResult {
        run_id,
        seed,
        n_tx,
        n_success: n_tx - n_collision,
        n_collision,
        max_consecutive_collisions: max_run,
        alarm: alarm_rule.is_some(),
        alarm_rule,
        detected_by,
        keys_match,
    };
    result.check()?;
    Ok(PairingReport {
        result,
        alice_id,
        bob_id,
        m: a.m,
        estimate: a.estimate,
        alice_alarm,
        bob_alarm,
        alice_key: a.installed.clone(),
        bob_key: b.installed.clone(),
        attacker_keys: d
            .attacker
            .as_ref()
            .map(|s| s.session_keys())
            .unwrap_or((None, None)),
        frames: d.frames,
        bob_outcomes: d.bob.window,
        window,
    })
}

/// Runs the detector of a silent observer over background traffic for
/// each threshold in `detection.m`; returns one result per threshold.
pub fn run_monitor(cfg: &ScenarioConfig, run_id: u32, seed: u64) -> Result<Vec<RunResult>> {
    let (mut sim, _) = background(cfg, seed)?;
    let observer = sim.add_station(TrafficMode::Silent, None);
    sim.record_trace(observer, false);
    let start = secs(cfg.warmup);
    let end = start + secs(cfg.duration);
    let mut classifier = OccupancyClassifier::new(&cfg.mac);
    let mut contexts: Vec<DetectionContext> = cfg
        .detection
        .m
        .iter()
        .map(|&m| {
            DetectionContext::new(cfg.mac.clone(), start, end, Some(m))
                .with_pattern_check(cfg.detection.pattern_check)
        })
        .collect();
    let (mut n_tx, mut n_collision) = (0u64, 0u64);
    // leave room for the last pattern in the window to complete
    let tail = 2 * cfg.mac.max_frame_air_time() as Micros + 1_000;
    sim.run_until(end + tail, &mut |_, n| {
        let Notice::Segment { segment, .. } = n else {
            return;
        };
        let Some(o) = classifier.push(segment) else {
            return;
        };
        if o.start < start || o.start >= end {
            return;
        }
        n_tx += 1;
        n_collision += o.kind.is_collision() as u64;
        for c in contexts.iter_mut() {
            c.observe_outcome(&o);
        }
    });
    contexts
        .iter()
        .map(|c| {
            let alarm = c.first_alarm().map(|(r, _)| r);
            let r = RunResult {
                run_id,
                seed,
                n_tx,
                n_success: n_tx - n_collision,
                n_collision,
                max_consecutive_collisions: c.detector().map_or(0, |d| d.max_run),
                alarm: alarm.is_some(),
                alarm_rule: alarm,
                detected_by: if alarm.is_some() {
                    vec![Detector::Observer]
                } else {
                    vec![]
                },
                keys_match: false,
            };
            r.check()?;
            Ok(r)
        })
        .collect()
}

/// Runs replication `run_id` of `cfg` with seed `base_seed + run_id`.
pub fn run_once(cfg: &ScenarioConfig, run_id: u32) -> Result<Vec<RunResult>> {
    let seed = cfg.base_seed.wrapping_add(run_id as u64);
    match cfg.mode {
        RunMode::Pairing => Ok(vec![run_pairing(cfg, run_id, seed)?.result]),
        RunMode::Monitor => run_monitor(cfg, run_id, seed),
    }
}

/// Spacing of one party's message burst on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurstCheck {
    /// Frames of anyone else, other than the peer's ACKs, between the
    /// start of the delivered first message and the end of the last.
    pub foreign_frames: usize,
    /// Start of message `i+1` minus end of message `i`.
    pub gaps: Vec<Micros>,
    pub complete: bool,
}

/// Inspects the burst of key exchange messages `sender` transmitted to
/// `peer`. The first message is taken as its last attempt, since it
/// contends normally and may be retried.
pub fn burst_check(report: &PairingReport, sender: StationId, peer: StationId) -> BurstCheck {
    let m = report.m.unwrap_or(0);
    let mine = |f: &&FrameSummary| f.transmitter == sender && f.kind == FrameKind::KeyExchange;
    let mut last_attempt: Vec<Option<&FrameSummary>> = vec![None; m as usize + 1];
    for f in report.frames.iter().filter(mine) {
        if let Some(i) = f.index.filter(|&i| i >= 1 && i <= m) {
            last_attempt[i as usize] = Some(f);
        }
    }
    let burst: Vec<&FrameSummary> = last_attempt.iter().skip(1).flatten().copied().collect();
    if m == 0 || burst.len() != m as usize {
        return BurstCheck {
            foreign_frames: 0,
            gaps: Vec::new(),
            complete: false,
        };
    }
    let (from, to) = (burst[0].start, burst[burst.len() - 1].end);
    let foreign_frames = report
        .frames
        .iter()
        .filter(|f| f.start >= from && f.start < to)
        .filter(|f| !mine(f))
        .filter(|f| !(f.kind == FrameKind::Ack && f.transmitter == peer))
        .count();
    let gaps = burst.windows(2).map(|w| w[1].start - w[0].end).collect();
    BurstCheck {
        foreign_frames,
        gaps,
        complete: true,
    }
}
