use rand::Rng;

use super::params::MacParams;
use super::station::StationState;
use crate::error::{Error, Result};

/// Draws a backoff counter uniformly from `{0, ..., cw - 1}`.
pub fn backoff_draw<R: Rng + ?Sized>(cw: u32, rng: &mut R) -> Result<u32> {
    if cw == 0 {
        return Err(Error::config("cw", "contention window must be > 0"));
    }
    Ok(rng.gen_range(0..cw))
}

/// Contention window and retry counter of the head-of-line frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contention {
    pub cw: u32,
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureOutcome {
    Retry,
    Discard,
}

impl Contention {
    pub fn fresh(params: &MacParams) -> Self {
        Contention {
            cw: params.cw_min,
            retries: 0,
        }
    }

    /// Binary exponential backoff after a missing ACK.
    pub fn fail(self, params: &MacParams) -> (Self, FailureOutcome) {
        if self.retries < params.retry_limit {
            let cw = (self.cw.saturating_mul(2)).min(params.cw_max());
            (
                Contention {
                    cw,
                    retries: self.retries + 1,
                },
                FailureOutcome::Retry,
            )
        } else {
            (Contention::fresh(params), FailureOutcome::Discard)
        }
    }
}

/// Applies a transmission failure to a station: doubles the window (capped)
/// and keeps the frame, or drops the head-of-line frame once the retry
/// limit is reached.
pub fn on_tx_failure(
    mut state: StationState,
    params: &MacParams,
) -> (StationState, FailureOutcome) {
    let (next, outcome) = Contention {
        cw: state.cw,
        retries: state.retries,
    }
    .fail(params);
    state.cw = next.cw;
    state.retries = next.retries;
    state.backoff = None;
    if outcome == FailureOutcome::Discard {
        state.queue.pop_front();
    }
    (state, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::station::{StationId, TrafficMode};
    use crate::mac::FrameRequest;
    use rand::rngs::mock::StepRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn station(cw: u32, retries: u32) -> StationState {
        let mut s = StationState::new(StationId(1), TrafficMode::Saturated, 32);
        s.cw = cw;
        s.retries = retries;
        s.queue.push_back(FrameRequest::data(StationId(0), 1000));
        s
    }

    #[test]
    fn doubles_on_failure() {
        let p = MacParams::default();
        let (s, o) = on_tx_failure(station(32, 0), &p);
        assert_eq!((s.cw, s.retries, o), (64, 1, FailureOutcome::Retry));
        assert_eq!(s.queue.len(), 1);
    }

    #[test]
    fn caps_at_cw_max() {
        let p = MacParams::default();
        let (s, o) = on_tx_failure(station(2048, 5), &p);
        assert_eq!((s.cw, s.retries, o), (2048, 6, FailureOutcome::Retry));
    }

    #[test]
    fn discards_at_retry_limit() {
        let p = MacParams::default();
        let (s, o) = on_tx_failure(station(2048, 7), &p);
        assert_eq!((s.cw, s.retries, o), (32, 0, FailureOutcome::Discard));
        assert!(s.queue.is_empty());
    }

    #[test]
    fn zero_window_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(backoff_draw(0, &mut rng).is_err());
    }

    #[test]
    fn minimum_rng_gives_zero() {
        let mut rng = StepRng::new(0, 0);
        assert_eq!(backoff_draw(2, &mut rng).unwrap(), 0);
    }

    #[test]
    fn draws_cover_window_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut counts = [0u32; 32];
        let mut sum = 0u64;
        for _ in 0..n {
            let v = backoff_draw(32, &mut rng).unwrap();
            counts[v as usize] += 1;
            sum += v as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 15.5).abs() < 0.05, "mean {mean}");
        // each bin within 5 sigma of n/32
        let e = n as f64 / 32.0;
        let sd = (e * (1.0 - 1.0 / 32.0)).sqrt();
        for c in counts {
            assert!((c as f64 - e).abs() < 5.0 * sd);
        }
    }
}
