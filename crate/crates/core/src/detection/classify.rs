use crate::mac::{ChannelState, ChannelTrace, MacParams, Micros, Segment, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Success,
    Collision,
    /// Busy longer than a maximum-sized frame can be.
    LongCollision,
}

impl OutcomeKind {
    pub fn is_collision(self) -> bool {
        !matches!(self, OutcomeKind::Success)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmissionOutcome {
    pub kind: OutcomeKind,
    pub start: Micros,
    pub duration: u32,
    pub decoded_source: Option<StationId>,
}

impl TransmissionOutcome {
    pub fn end(&self) -> Micros {
        self.start + self.duration as Micros
    }
}

#[derive(Debug, Clone, Copy)]
enum Pending {
    Empty,
    Lead(Segment),
    LeadGap(Segment),
}

/// Streaming classifier over closed trace segments.
///
/// A success is `busy(> ack) -> idle(~sifs) -> busy(~ack)`; a data-sized
/// busy period followed by anything else is a collision. Short busy
/// periods that are not an ACK in a success pattern are ignored.
#[derive(Debug, Clone)]
pub struct OccupancyClassifier {
    sifs: u32,
    ack: u32,
    tol: u32,
    long_threshold: u32,
    pending: Pending,
}

impl OccupancyClassifier {
    pub fn new(params: &MacParams) -> Self {
        OccupancyClassifier {
            sifs: params.sifs,
            ack: params.ack_duration,
            tol: params.tolerance(),
            long_threshold: params.max_frame_air_time() + params.tolerance(),
            pending: Pending::Empty,
        }
    }

    fn near(&self, value: u32, target: u32) -> bool {
        value.abs_diff(target) <= self.tol
    }

    fn collision(&self, lead: Segment) -> TransmissionOutcome {
        let kind = if lead.duration > self.long_threshold {
            OutcomeKind::LongCollision
        } else {
            OutcomeKind::Collision
        };
        TransmissionOutcome {
            kind,
            start: lead.start,
            duration: lead.duration,
            decoded_source: None,
        }
    }

    fn accept_busy(&mut self, seg: Segment) {
        self.pending = if seg.duration > self.ack + self.tol {
            Pending::Lead(seg)
        } else {
            Pending::Empty
        };
    }

    /// Feeds the next closed segment; returns an outcome once a pattern is
    /// complete.
    pub fn push(&mut self, seg: Segment) -> Option<TransmissionOutcome> {
        match (self.pending, seg.state) {
            (Pending::Empty, ChannelState::Busy) => {
                self.accept_busy(seg);
                None
            }
            (Pending::Empty, ChannelState::Idle) => None,
            (Pending::Lead(lead), ChannelState::Idle) => {
                if self.near(seg.duration, self.sifs) {
                    self.pending = Pending::LeadGap(lead);
                    None
                } else {
                    self.pending = Pending::Empty;
                    Some(self.collision(lead))
                }
            }
            (Pending::LeadGap(lead), ChannelState::Busy) => {
                if self.near(seg.duration, self.ack) {
                    self.pending = Pending::Empty;
                    if lead.duration > self.long_threshold {
                        return Some(self.collision(lead));
                    }
                    Some(TransmissionOutcome {
                        kind: OutcomeKind::Success,
                        start: lead.start,
                        duration: lead.duration,
                        decoded_source: None,
                    })
                } else {
                    self.accept_busy(seg);
                    Some(self.collision(lead))
                }
            }
            // not produced by a well-formed trace
            (Pending::Lead(lead), ChannelState::Busy) => {
                self.accept_busy(seg);
                Some(self.collision(lead))
            }
            (Pending::LeadGap(lead), ChannelState::Idle) => {
                self.pending = Pending::Empty;
                Some(self.collision(lead))
            }
        }
    }
}

/// Classifies a whole trace. An incomplete pattern at the end of the trace
/// is left out.
pub fn classify_occupancy(trace: &ChannelTrace, params: &MacParams) -> Vec<TransmissionOutcome> {
    let mut c = OccupancyClassifier::new(params);
    trace.segments.iter().filter_map(|&s| c.push(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChannelState::{Busy, Idle};

    fn classify(parts: &[(ChannelState, u32)]) -> Vec<OutcomeKind> {
        let tr = ChannelTrace::from_durations(StationId(0), 0, parts);
        classify_occupancy(&tr, &MacParams::default())
            .into_iter()
            .map(|o| o.kind)
            .collect()
    }

    #[test]
    fn success_pattern() {
        assert_eq!(
            classify(&[(Busy, 342), (Idle, 18), (Busy, 28), (Idle, 50)]),
            vec![OutcomeKind::Success]
        );
    }

    #[test]
    fn collision_pattern() {
        assert_eq!(
            classify(&[(Busy, 342), (Idle, 34)]),
            vec![OutcomeKind::Collision]
        );
    }

    #[test]
    fn bridged_jam_is_long() {
        assert_eq!(
            classify(&[(Busy, 800), (Idle, 34)]),
            vec![OutcomeKind::LongCollision]
        );
    }

    #[test]
    fn trailing_pattern_is_deferred() {
        assert!(classify(&[(Busy, 342), (Idle, 18)]).is_empty());
        assert!(classify(&[(Busy, 342)]).is_empty());
    }

    #[test]
    fn stray_short_busy_ignored() {
        assert_eq!(
            classify(&[
                (Idle, 5),
                (Busy, 28),
                (Idle, 100),
                (Busy, 200),
                (Idle, 18),
                (Busy, 28),
                (Idle, 40)
            ]),
            vec![OutcomeKind::Success]
        );
    }

    #[test]
    fn data_after_sifs_gap_is_a_new_lead() {
        // a data-sized busy after a sifs gap is not an ACK
        assert_eq!(
            classify(&[
                (Busy, 300),
                (Idle, 18),
                (Busy, 300),
                (Idle, 18),
                (Busy, 28),
                (Idle, 9)
            ]),
            vec![OutcomeKind::Collision, OutcomeKind::Success]
        );
    }

    #[test]
    fn tolerance_is_one_slot() {
        assert_eq!(
            classify(&[(Busy, 342), (Idle, 27), (Busy, 37), (Idle, 40)]),
            vec![OutcomeKind::Success]
        );
        assert_eq!(
            classify(&[(Busy, 342), (Idle, 28), (Busy, 28), (Idle, 40)]),
            vec![OutcomeKind::Collision]
        );
    }
}
