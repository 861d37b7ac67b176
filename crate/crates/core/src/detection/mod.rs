//! Receiver-side detection: occupancy classification, the consecutive
//! collision counter and the three alarm rules.

mod classify;
mod detector;
mod offline;
mod pattern;
mod rules;

pub use classify::{classify_occupancy, OccupancyClassifier, OutcomeKind, TransmissionOutcome};
pub use detector::{detector_update, DetectorState};
pub use offline::trace_from_event_log;
pub use pattern::interval_pattern_check;
pub use rules::{evaluate_rules, AlarmRule, DetectionContext, Verdict};
