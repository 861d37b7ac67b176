use num_bigint::BigUint;

use super::classify::{OutcomeKind, TransmissionOutcome};
use super::detector::DetectorState;
use super::pattern::interval_pattern_check;
use crate::mac::{MacParams, Micros};

/// Which alarm rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlarmRule {
    /// More than one distinct DH value, or a protocol message after the
    /// deadline.
    Rule1,
    /// `m` consecutive collisions.
    Rule2,
    /// A collision longer than any legitimate frame.
    Rule3,
}

impl AlarmRule {
    pub fn number(self) -> u8 {
        match self {
            AlarmRule::Rule1 => 1,
            AlarmRule::Rule2 => 2,
            AlarmRule::Rule3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Alarm(AlarmRule),
}

/// Online state of one party's detection during a pairing window.
///
/// Outcomes observed before the threshold is known are buffered and
/// replayed once [`DetectionContext::set_threshold`] is called.
#[derive(Debug, Clone)]
pub struct DetectionContext {
    params: MacParams,
    window_start: Micros,
    deadline: Micros,
    pattern_check: bool,
    detector: Option<DetectorState>,
    buffered: Vec<TransmissionOutcome>,
    dh_values: Vec<BigUint>,
    first_alarm: Option<(AlarmRule, Micros)>,
    alarms: Vec<(AlarmRule, Micros)>,
}

impl DetectionContext {
    pub fn new(params: MacParams, window_start: Micros, deadline: Micros, m: Option<u32>) -> Self {
        DetectionContext {
            params,
            window_start,
            deadline,
            pattern_check: false,
            detector: m.map(DetectorState::new),
            buffered: Vec::new(),
            dh_values: Vec::new(),
            first_alarm: None,
            alarms: Vec::new(),
        }
    }

    /// Rule 2 then also requires the collisions to be spaced like
    /// prioritized transmissions.
    pub fn with_pattern_check(mut self, on: bool) -> Self {
        self.pattern_check = on;
        self
    }

    pub fn pattern_check(&self) -> bool {
        self.pattern_check
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn window_start(&self) -> Micros {
        self.window_start
    }

    pub fn deadline(&self) -> Micros {
        self.deadline
    }

    pub fn threshold(&self) -> Option<u32> {
        self.detector.as_ref().map(|d| d.m)
    }

    pub fn detector(&self) -> Option<&DetectorState> {
        self.detector.as_ref()
    }

    pub fn set_threshold(&mut self, m: u32) {
        if self.detector.is_some() {
            return;
        }
        self.detector = Some(DetectorState::new(m));
        for o in std::mem::take(&mut self.buffered) {
            self.feed(&o);
        }
    }

    fn raise(&mut self, rule: AlarmRule, at: Micros) -> AlarmRule {
        if self.first_alarm.is_none() {
            self.first_alarm = Some((rule, at));
        }
        self.alarms.push((rule, at));
        rule
    }

    fn feed(&mut self, o: &TransmissionOutcome) -> Option<AlarmRule> {
        let at = o.end();
        let long = (o.kind == OutcomeKind::LongCollision).then(|| self.raise(AlarmRule::Rule3, at));
        let Some(det) = self.detector.as_mut() else {
            self.buffered.push(*o);
            return long;
        };
        let fired = det.observe(o.kind.is_collision(), o.start, o.end());
        let pattern_ok = !self.pattern_check || {
            let runs: Vec<_> = det.last_collision_times.iter().copied().collect();
            interval_pattern_check(&runs, &self.params)
        };
        let run = (fired && pattern_ok).then(|| self.raise(AlarmRule::Rule2, at));
        long.or(run)
    }

    /// Feeds a classified transmission. Transmissions outside
    /// `[window_start, deadline)` are ignored.
    pub fn observe_outcome(&mut self, o: &TransmissionOutcome) -> Option<AlarmRule> {
        if o.start < self.window_start || o.start >= self.deadline {
            return None;
        }
        self.feed(o)
    }

    /// Feeds a decoded protocol message carrying `dh`, received at `now`.
    pub fn observe_message(&mut self, dh: &BigUint, now: Micros) -> Option<AlarmRule> {
        if now > self.deadline {
            return Some(self.raise(AlarmRule::Rule1, now));
        }
        if !self.dh_values.contains(dh) {
            self.dh_values.push(dh.clone());
        }
        (self.dh_values.len() > 1).then(|| self.raise(AlarmRule::Rule1, now))
    }

    pub fn first_alarm(&self) -> Option<(AlarmRule, Micros)> {
        self.first_alarm
    }

    pub fn alarms(&self) -> &[(AlarmRule, Micros)] {
        &self.alarms
    }

    pub fn verdict(&self) -> Verdict {
        match self.first_alarm {
            Some((r, _)) => Verdict::Alarm(r),
            None => Verdict::Ok,
        }
    }
}

/// Batch evaluation of the three rules over a complete window. A DH
/// mismatch takes precedence; otherwise the first rule to fire in stream
/// order is reported.
pub fn evaluate_rules(
    params: &MacParams,
    window_start: Micros,
    deadline: Micros,
    m: u32,
    outcomes: &[TransmissionOutcome],
    dh_values: &[BigUint],
) -> Verdict {
    let mut ctx = DetectionContext::new(params.clone(), window_start, deadline, Some(m));
    for dh in dh_values {
        if let Some(r) = ctx.observe_message(dh, window_start) {
            return Verdict::Alarm(r);
        }
    }
    for o in outcomes {
        if let Some(r) = ctx.observe_outcome(o) {
            return Verdict::Alarm(r);
        }
    }
    Verdict::Ok
}
