//! Man-in-the-middle attacker strategies as event-driven state machines.
//!
//! The attacker hears and decodes every frame, reacts with zero delay, and
//! can only add energy to the medium: jam, forge frames, forge ACKs.
//! Directional transmission is modelled through each frame's listener set;
//! a forged frame is never audible to the party it impersonates.
//!
//! Attack steps, per direction `X -> Y` (`a`: Alice to Bob, `b`: Bob to
//! Alice):
//!
//! 1. jam every `M^x_i` at `Y` and forge `Y`'s ACK to `X`;
//! 2. send `m` forged `M^x'_i` to `Y` with pinned backoff, jamming `Y`'s
//!    ACKs at `X`.
//!
//! Type I runs `a1 a2 b1 b2`; Type II first completes the session with
//! Alice (`a1 b2`) and then the one with Bob (`a2 b1`).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mac::{
    air_time, FrameKind, FrameOnAir, MacParams, Micros, RawFrame, StationId, StationSet,
};
use crate::pairing::{build_message, dh_shared, DhGroup, DhKeyPair, ProtocolMessage, FRAME_LEN};

/// Length of a preamble-only jam.
pub const PREAMBLE_JAM_US: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    None,
    Type1,
    Type2,
    /// One continuous jam over `M^a_1` and `M^a_2`.
    LongJam,
    /// Type I, except `M^a_skip` is let through.
    PartialJam {
        skip: u16,
    },
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::None => f.write_str("none"),
            AttackKind::Type1 => f.write_str("type1"),
            AttackKind::Type2 => f.write_str("type2"),
            AttackKind::LongJam => f.write_str("long_jam"),
            AttackKind::PartialJam { skip } => write!(f, "partial_jam:{skip}"),
        }
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    /// `none`, `type1`, `type2`, `long_jam`, `partial_jam` (skips `M_1`) or
    /// `partial_jam:K`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("attacker.strategy", format!("unknown strategy `{s}`"));
        Ok(match s {
            "none" => AttackKind::None,
            "type1" => AttackKind::Type1,
            "type2" => AttackKind::Type2,
            "long_jam" => AttackKind::LongJam,
            "partial_jam" => AttackKind::PartialJam { skip: 1 },
            other => {
                let skip = other
                    .strip_prefix("partial_jam:")
                    .and_then(|k| k.parse::<u16>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(bad)?;
                AttackKind::PartialJam { skip }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Alice to Bob.
    A,
    /// Bob to Alice.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Intercept(Dir),
    Forge(Dir),
}

/// What the attacker sees: every frame start and end on the medium.
#[derive(Debug, Clone)]
pub enum AttackEvent {
    FrameStart(FrameOnAir),
    FrameEnd { frame: FrameOnAir, delivered: bool },
}

/// A frame the attacker puts on the air at `at`.
#[derive(Debug, Clone)]
pub struct AttackAction {
    pub at: Micros,
    pub frame: RawFrame,
}

#[derive(Debug, Clone)]
pub struct AttackerStrategy {
    pub kind: AttackKind,
    pub preamble_only: bool,
    pub id: StationId,
    pub alice: StationId,
    pub bob: StationId,
    /// Everyone on the channel.
    pub all: StationSet,
    params: MacParams,
    group: DhGroup,
    /// `a'`, used towards Bob.
    pub forged_a: DhKeyPair,
    /// `b'`, used towards Alice.
    pub forged_b: DhKeyPair,
    plan: VecDeque<Stage>,
    stage: Option<Stage>,
    m: Option<u16>,
    handled: BTreeSet<u16>,
    /// Start times of ACKs to jam, with the station they must not reach.
    ack_jams: Vec<(Micros, StationId)>,
    pub seen_a: Option<BigUint>,
    pub seen_b: Option<BigUint>,
    long_jam_until: Option<Micros>,
    pub jams: u32,
    pub forged_frames: u32,
}

impl AttackerStrategy {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        kind: AttackKind,
        preamble_only: bool,
        id: StationId,
        alice: StationId,
        bob: StationId,
        all: StationSet,
        params: MacParams,
        group: DhGroup,
        rng: &mut R,
    ) -> Self {
        use Dir::{A, B};
        use Stage::{Forge, Intercept};
        let plan: VecDeque<Stage> = match kind {
            AttackKind::None | AttackKind::LongJam => VecDeque::new(),
            AttackKind::Type1 | AttackKind::PartialJam { .. } => {
                [Intercept(A), Forge(A), Intercept(B), Forge(B)].into()
            }
            AttackKind::Type2 => [Intercept(A), Forge(B), Forge(A), Intercept(B)].into(),
        };
        let forged_a = DhKeyPair::generate(&group, rng);
        let forged_b = DhKeyPair::generate(&group, rng);
        let mut s = AttackerStrategy {
            kind,
            preamble_only,
            id,
            alice,
            bob,
            all,
            params,
            group,
            forged_a,
            forged_b,
            plan,
            stage: None,
            m: None,
            handled: BTreeSet::new(),
            ack_jams: Vec::new(),
            seen_a: None,
            seen_b: None,
            long_jam_until: None,
            jams: 0,
            forged_frames: 0,
        };
        s.stage = s.plan.pop_front();
        s
    }

    fn ends(&self, dir: Dir) -> (StationId, StationId) {
        match dir {
            Dir::A => (self.alice, self.bob),
            Dir::B => (self.bob, self.alice),
        }
    }

    fn intercepts(&self, dir: Dir) -> bool {
        self.stage == Some(Stage::Intercept(dir)) || self.plan.contains(&Stage::Intercept(dir))
    }

    fn skip(&self, dir: Dir) -> Option<u16> {
        match (self.kind, dir) {
            (AttackKind::PartialJam { skip }, Dir::A) => Some(skip),
            _ => None,
        }
    }

    fn jam(&self, at: Micros, duration: u32, audible_to: StationSet) -> AttackAction {
        AttackAction {
            at,
            frame: RawFrame {
                transmitter: self.id,
                sender: self.id,
                dest: None,
                kind: FrameKind::Jam,
                payload_len: 0,
                duration,
                audible_to,
                payload: None,
            },
        }
    }

    fn forged_ack(&self, at: Micros, from: StationId, to: StationId) -> AttackAction {
        AttackAction {
            at,
            frame: RawFrame {
                transmitter: self.id,
                sender: from,
                dest: Some(to),
                kind: FrameKind::ForgedAck,
                payload_len: 0,
                duration: self.params.ack_duration,
                audible_to: self.all.without(from),
                payload: None,
            },
        }
    }

    /// Session keys the attacker holds with Alice and with Bob, once the
    /// corresponding public values have been observed.
    pub fn session_keys(&self) -> (Option<BigUint>, Option<BigUint>) {
        let with = |secret: &BigUint, public: &Option<BigUint>| {
            public
                .as_ref()
                .and_then(|p| dh_shared(&self.group, secret, p).ok())
        };
        (
            with(&self.forged_b.secret, &self.seen_a),
            with(&self.forged_a.secret, &self.seen_b),
        )
    }

    /// Emits the `m` forged messages of `dir` back to back with pinned
    /// backoff, starting at `at`; returns when the last handshake ends.
    fn forge(&mut self, dir: Dir, at: Micros, out: &mut Vec<AttackAction>) -> Micros {
        let (src, dst) = self.ends(dir);
        let m = self.m.unwrap_or(1);
        let public = match dir {
            Dir::A => self.forged_a.public.clone(),
            Dir::B => self.forged_b.public.clone(),
        };
        let air = air_time(FRAME_LEN as u32, &self.params).expect("valid params") as Micros;
        let handshake = (self.params.sifs + self.params.ack_duration) as Micros;
        let mut t = at;
        for i in 1..=m {
            let msg: ProtocolMessage =
                build_message(i, m, public.clone(), src, dst).expect("group elements fit a frame");
            let bytes: Arc<[u8]> = msg.to_bytes().expect("fits").into();
            out.push(AttackAction {
                at: t,
                frame: RawFrame {
                    transmitter: self.id,
                    sender: src,
                    dest: Some(dst),
                    kind: FrameKind::ForgedData,
                    payload_len: FRAME_LEN as u32,
                    duration: air as u32,
                    audible_to: self.all.without(src),
                    payload: Some(bytes),
                },
            });
            self.forged_frames += 1;
            self.ack_jams
                .push((t + air + self.params.sifs as Micros, src));
            t += air + handshake;
            if i < m {
                t += self.params.difs as Micros;
            }
        }
        t
    }

    /// Moves through the plan after the stage that ended at `done`.
    fn advance(&mut self, done: Micros, out: &mut Vec<AttackAction>) {
        let mut end = done;
        self.stage = self.plan.pop_front();
        self.handled.clear();
        while let Some(Stage::Forge(dir)) = self.stage {
            end = self.forge(dir, end + self.params.difs as Micros, out);
            self.stage = self.plan.pop_front();
        }
    }

    fn on_protocol_frame(&mut self, f: &FrameOnAir, now: Micros, out: &mut Vec<AttackAction>) {
        let dir = if f.sender == self.alice && f.dest == Some(self.bob) {
            Dir::A
        } else if f.sender == self.bob && f.dest == Some(self.alice) {
            Dir::B
        } else {
            return;
        };
        let Some(msg) = f
            .payload
            .as_deref()
            .and_then(|p| ProtocolMessage::parse(p, f.sender, self.bob).ok())
        else {
            return;
        };
        match dir {
            Dir::A => self.seen_a.get_or_insert_with(|| msg.dh_public.clone()),
            Dir::B => self.seen_b.get_or_insert_with(|| msg.dh_public.clone()),
        };
        self.m.get_or_insert(msg.total);

        if self.kind == AttackKind::LongJam {
            if dir == Dir::A && msg.index == 1 && self.long_jam_until.is_none() {
                // one jam spanning M_1, the pinned gap and M_2
                let span = 2 * f.duration + self.params.priority_gap();
                self.long_jam_until = Some(now + span as Micros);
                out.push(self.jam(now, span, self.all.without(self.alice)));
                self.jams += 1;
            }
            if self.long_jam_until.is_some_and(|until| f.end() <= until) {
                out.push(self.forged_ack(
                    f.end() + self.params.sifs as Micros,
                    self.bob,
                    self.alice,
                ));
            }
            return;
        }
        if !self.intercepts(dir) {
            return;
        }
        let (src, dst) = self.ends(dir);
        if self.skip(dir) != Some(msg.index) {
            let d = if self.preamble_only {
                PREAMBLE_JAM_US.min(f.duration)
            } else {
                f.duration
            };
            out.push(self.jam(now, d, self.all.without(src)));
            self.jams += 1;
            out.push(self.forged_ack(f.end() + self.params.sifs as Micros, dst, src));
        }
        if self.stage == Some(Stage::Intercept(dir)) {
            self.handled.insert(msg.index);
            if (1..=msg.total).all(|i| self.handled.contains(&i)) {
                let done = f.end() + (self.params.sifs + self.params.ack_duration) as Micros;
                self.advance(done, out);
            }
        }
    }
}

/// Advances the attacker by one observed event and returns the frames it
/// wants to put on the air.
pub fn attacker_step(
    mut s: AttackerStrategy,
    event: &AttackEvent,
    now: Micros,
) -> (AttackerStrategy, Vec<AttackAction>) {
    let mut out = Vec::new();
    if s.kind == AttackKind::None {
        return (s, out);
    }
    if let AttackEvent::FrameStart(f) = event {
        if f.transmitter != s.id {
            match f.kind {
                FrameKind::KeyExchange => s.on_protocol_frame(f, now, &mut out),
                FrameKind::Ack => {
                    if let Some(pos) = s
                        .ack_jams
                        .iter()
                        .position(|&(at, victim)| at == f.start && f.dest == Some(victim))
                    {
                        let (_, victim) = s.ack_jams.swap_remove(pos);
                        out.push(s.jam(now, f.duration, StationSet::single(victim)));
                        s.jams += 1;
                    }
                }
                _ => {}
            }
        }
    }
    (s, out)
}
