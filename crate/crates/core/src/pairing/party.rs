use std::collections::BTreeSet;

use num_bigint::BigUint;

use super::dh::{dh_shared, DhGroup, DhKeyPair};
use super::estimate::{estimate_channel, select_m, ChannelEstimate, PairingConfig, MAX_M};
use super::message::{build_message, ProtocolMessage};
use crate::detection::{AlarmRule, DetectionContext, TransmissionOutcome};
use crate::mac::{MacParams, Micros, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimerKind {
    /// End of the monitoring window.
    MonitorEnd,
    /// Key exchange timer `T`.
    Expire,
}

#[derive(Debug, Clone)]
pub enum PartyEvent {
    /// Association finished (Alice) or association reply sent (Bob).
    Associated,
    Timer(TimerKind),
    /// A classified transmission this party did not take part in.
    Outcome(TransmissionOutcome),
    /// A protocol message addressed to this party was decoded.
    Message(ProtocolMessage),
    /// The protocol frame in flight was acknowledged.
    AckReceived,
    /// The protocol frame in flight missed its ACK; `discarded` once the
    /// retry limit is exhausted.
    AckMissing {
        discarded: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyAction {
    ArmTimer {
        kind: TimerKind,
        at: Micros,
    },
    /// Queue a protocol frame; `priority` pins its backoff to zero so it
    /// goes out `difs` after the medium becomes idle.
    Send {
        message: ProtocolMessage,
        priority: bool,
    },
    RaiseAlarm(AlarmRule),
    InstallKey(BigUint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyPhase {
    Idle,
    Monitoring,
    /// Waiting for the peer's messages.
    Receiving,
    /// `M_index` is on its way.
    Sending {
        index: u16,
    },
    Done,
}

/// Protocol state of one party. Driven only through [`alice_step`] and
/// [`bob_step`].
#[derive(Debug, Clone)]
pub struct PartyState {
    pub role: Role,
    pub phase: PartyPhase,
    pub id: StationId,
    pub peer: StationId,
    pub cfg: PairingConfig,
    pub group: DhGroup,
    pub keys: DhKeyPair,
    /// Install the key even after an alarm (to show the attack works when
    /// nobody listens to the detector).
    pub ignore_alarms: bool,
    pub started_at: Option<Micros>,
    pub ctx: DetectionContext,
    pub monitored: Vec<TransmissionOutcome>,
    pub estimate: Option<ChannelEstimate>,
    pub m: Option<u16>,
    pub received: BTreeSet<u16>,
    pub peer_public: Option<BigUint>,
    pub installed: Option<BigUint>,
    /// When the last message from the peer arrived.
    pub last_peer_message: Option<Micros>,
}

impl PartyState {
    pub fn new(
        role: Role,
        id: StationId,
        peer: StationId,
        cfg: PairingConfig,
        group: DhGroup,
        keys: DhKeyPair,
        mac: MacParams,
    ) -> Self {
        PartyState {
            role,
            phase: PartyPhase::Idle,
            id,
            peer,
            cfg,
            group,
            keys,
            ignore_alarms: false,
            started_at: None,
            ctx: DetectionContext::new(mac, 0, 0, None),
            monitored: Vec::new(),
            estimate: None,
            m: None,
            received: BTreeSet::new(),
            peer_public: None,
            installed: None,
            last_peer_message: None,
        }
    }

    pub fn first_alarm(&self) -> Option<(AlarmRule, Micros)> {
        self.ctx.first_alarm()
    }

    fn blocked(&self) -> bool {
        !self.ignore_alarms && self.ctx.first_alarm().is_some()
    }

    fn message(&self, index: u16) -> ProtocolMessage {
        let m = self.m.expect("m chosen before sending");
        build_message(index, m, self.keys.public.clone(), self.id, self.peer)
            .expect("group elements fit a frame")
    }

    fn send(&mut self, index: u16, priority: bool, out: &mut Vec<PartyAction>) {
        self.phase = PartyPhase::Sending { index };
        out.push(PartyAction::Send {
            message: self.message(index),
            priority,
        });
    }

    fn start(&mut self, now: Micros, out: &mut Vec<PartyAction>) {
        let us = |s: f64| (s * 1e6).round() as Micros;
        let window_start = now + us(self.cfg.monitor_s);
        let deadline = now + us(self.cfg.timer_s);
        let params = self.ctx_params();
        self.ctx = DetectionContext::new(params, window_start, deadline, None)
            .with_pattern_check(self.ctx.pattern_check());
        self.started_at = Some(now);
        out.push(PartyAction::ArmTimer {
            kind: TimerKind::MonitorEnd,
            at: window_start,
        });
        out.push(PartyAction::ArmTimer {
            kind: TimerKind::Expire,
            at: deadline,
        });
    }

    fn ctx_params(&self) -> MacParams {
        self.ctx.params().clone()
    }

    fn alarm(&self, before: usize, out: &mut Vec<PartyAction>) {
        for &(rule, _) in &self.ctx.alarms()[before..] {
            out.push(PartyAction::RaiseAlarm(rule));
        }
    }

    fn observe(&mut self, o: TransmissionOutcome, out: &mut Vec<PartyAction>) {
        if self.phase == PartyPhase::Monitoring && o.start < self.ctx.window_start() {
            self.monitored.push(o);
        }
        let before = self.ctx.alarms().len();
        self.ctx.observe_outcome(&o);
        self.alarm(before, out);
    }

    /// Records a peer message; returns true once every index `1..=m` has
    /// been seen.
    fn accept(&mut self, msg: &ProtocolMessage, now: Micros, out: &mut Vec<PartyAction>) -> bool {
        let before = self.ctx.alarms().len();
        self.ctx.observe_message(&msg.dh_public, now);
        self.alarm(before, out);
        if self.peer_public.is_none() {
            self.peer_public = Some(msg.dh_public.clone());
        }
        self.received.insert(msg.index);
        self.last_peer_message = Some(now);
        let m = self.m.unwrap_or(msg.total);
        (1..=m).all(|i| self.received.contains(&i))
    }

    fn shared_key(&self) -> Option<BigUint> {
        let peer = self.peer_public.as_ref()?;
        dh_shared(&self.group, &self.keys.secret, peer).ok()
    }

    fn install(&mut self, out: &mut Vec<PartyAction>) {
        if self.installed.is_some() || self.blocked() {
            return;
        }
        if let Some(k) = self.shared_key() {
            self.installed = Some(k.clone());
            out.push(PartyAction::InstallKey(k));
        }
    }
}

fn us_to_s(us: Micros) -> f64 {
    us as f64 / 1e6
}

/// Alice: start `T`, monitor for `t`, estimate and pick `m`, send
/// `M^a_1..M^a_m` (the first with normal backoff, the rest pinned), keep
/// watching until `T` expires, then install the key unless an alarm was
/// raised.
pub fn alice_step(
    mut s: PartyState,
    event: PartyEvent,
    now: Micros,
) -> (PartyState, Vec<PartyAction>) {
    let mut out = Vec::new();
    match event {
        PartyEvent::Associated if s.phase == PartyPhase::Idle => {
            s.start(now, &mut out);
            s.phase = PartyPhase::Monitoring;
        }
        PartyEvent::Timer(TimerKind::MonitorEnd) if s.phase == PartyPhase::Monitoring => {
            let monitor = us_to_s(s.ctx.window_start() - s.started_at.expect("started"));
            let est = estimate_channel(&s.monitored, monitor, s.cfg.detection_window_s());
            let m = s
                .cfg
                .fixed_m
                .unwrap_or_else(|| select_m(&est, &s.cfg).unwrap_or(MAX_M));
            s.estimate = Some(est);
            s.m = Some(m as u16);
            let before = s.ctx.alarms().len();
            s.ctx.set_threshold(m);
            s.alarm(before, &mut out);
            s.send(1, false, &mut out);
        }
        PartyEvent::Timer(TimerKind::Expire) => {
            if s.phase != PartyPhase::Done {
                s.install(&mut out);
                s.phase = PartyPhase::Done;
            }
        }
        PartyEvent::Outcome(o) => s.observe(o, &mut out),
        PartyEvent::Message(msg) => {
            s.accept(&msg, now, &mut out);
        }
        PartyEvent::AckReceived => {
            if let PartyPhase::Sending { index } = s.phase {
                if index < s.m.expect("sending") {
                    s.send(index + 1, true, &mut out);
                } else {
                    s.phase = PartyPhase::Receiving;
                }
            }
        }
        PartyEvent::AckMissing { discarded: true } => {
            if let PartyPhase::Sending { index } = s.phase {
                s.send(index, index > 1, &mut out);
            }
        }
        _ => {}
    }
    (s, out)
}

/// Bob: start `T`, watch the channel after `t`, collect `M^a_1..M^a_m`,
/// check the rules, send `M^b_1..M^b_m` and install the key after the last
/// one is acknowledged.
pub fn bob_step(
    mut s: PartyState,
    event: PartyEvent,
    now: Micros,
) -> (PartyState, Vec<PartyAction>) {
    let mut out = Vec::new();
    match event {
        PartyEvent::Associated if s.phase == PartyPhase::Idle => {
            s.start(now, &mut out);
            s.phase = PartyPhase::Receiving;
        }
        PartyEvent::Timer(TimerKind::Expire) => {
            if s.phase == PartyPhase::Receiving && s.m.is_none() {
                s.phase = PartyPhase::Done;
            }
        }
        PartyEvent::Timer(_) => {}
        PartyEvent::Outcome(o) => s.observe(o, &mut out),
        PartyEvent::Message(msg) => {
            if s.m.is_none() {
                let m = msg.total.max(1);
                s.m = Some(m);
                let before = s.ctx.alarms().len();
                s.ctx.set_threshold(m as u32);
                s.alarm(before, &mut out);
            }
            let complete = s.accept(&msg, now, &mut out);
            if complete && s.phase == PartyPhase::Receiving {
                s.send(1, false, &mut out);
            }
        }
        PartyEvent::AckReceived => {
            if let PartyPhase::Sending { index } = s.phase {
                if index < s.m.expect("sending") {
                    s.send(index + 1, true, &mut out);
                } else {
                    s.phase = PartyPhase::Done;
                    s.install(&mut out);
                }
            }
        }
        PartyEvent::AckMissing { discarded: true } => {
            if let PartyPhase::Sending { index } = s.phase {
                s.send(index, index > 1, &mut out);
            }
        }
        _ => {}
    }
    (s, out)
}
