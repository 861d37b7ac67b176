use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::frame::FrameRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u16);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Set of up to 128 stations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct StationSet(u128);

impl StationSet {
    pub const CAPACITY: usize = 128;

    pub const fn empty() -> Self {
        StationSet(0)
    }

    pub fn first_n(n: usize) -> Self {
        assert!(n <= Self::CAPACITY);
        if n == Self::CAPACITY {
            StationSet(u128::MAX)
        } else {
            StationSet((1u128 << n) - 1)
        }
    }

    pub fn single(id: StationId) -> Self {
        let mut s = Self::empty();
        s.insert(id);
        s
    }

    pub fn insert(&mut self, id: StationId) {
        self.0 |= 1u128 << id.0;
    }

    pub fn remove(&mut self, id: StationId) {
        self.0 &= !(1u128 << id.0);
    }

    pub fn contains(&self, id: StationId) -> bool {
        self.0 & (1u128 << id.0) != 0
    }

    pub fn without(mut self, id: StationId) -> Self {
        self.remove(id);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = StationId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(StationId(i as u16))
        })
    }
}

impl FromIterator<StationId> for StationSet {
    fn from_iter<I: IntoIterator<Item = StationId>>(iter: I) -> Self {
        let mut s = StationSet::empty();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

/// Traffic a station offers on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    /// Always has a frame queued.
    Saturated,
    /// Poisson frame arrivals at the given payload bit rate.
    Poisson { rate_bps: f64 },
    /// Only transmits frames enqueued explicitly (or ACKs).
    Silent,
}

/// DCF bookkeeping of one station.
#[derive(Debug, Clone)]
pub struct StationState {
    pub id: StationId,
    pub cw: u32,
    /// Remaining backoff slots; `None` when no backoff has been drawn.
    pub backoff: Option<u32>,
    pub retries: u32,
    pub queue: VecDeque<FrameRequest>,
    pub mode: TrafficMode,
}

impl StationState {
    pub fn new(id: StationId, mode: TrafficMode, cw_min: u32) -> Self {
        StationState {
            id,
            cw: cw_min,
            backoff: None,
            retries: 0,
            queue: VecDeque::new(),
            mode,
        }
    }
}
