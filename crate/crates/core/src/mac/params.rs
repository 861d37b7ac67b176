use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest MSDU allowed by 802.11; protocol frames are padded to this size.
pub const MAX_PAYLOAD: u32 = 2304;

/// DCF timing and backoff constants. Durations are in microseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    pub slot: u32,
    pub difs: u32,
    pub sifs: u32,
    pub ack_duration: u32,
    pub cw_min: u32,
    /// Number of backoff stages; `cw_max = 2^beta * cw_min`.
    pub beta: u32,
    /// Retransmissions allowed before a frame is dropped.
    pub retry_limit: u32,
    /// Bits per second.
    pub bitrate: u64,
    /// Fixed per-frame PHY cost added to every data frame's air time.
    pub phy_overhead: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot: 9,
            difs: 34,
            sifs: 18,
            ack_duration: 28,
            cw_min: 32,
            beta: 6,
            retry_limit: 7,
            bitrate: 54_000_000,
            phy_overhead: 20,
        }
    }
}

impl MacParams {
    pub fn cw_max(&self) -> u32 {
        self.cw_min << self.beta
    }

    /// Time after the end of a data frame by which its ACK must have
    /// arrived.
    pub fn ack_timeout(&self) -> u32 {
        self.sifs + self.ack_duration + self.slot
    }

    /// Tolerance used when matching occupancy durations.
    pub fn tolerance(&self) -> u32 {
        self.slot
    }

    pub fn max_frame_air_time(&self) -> u32 {
        air_time(MAX_PAYLOAD, self).expect("validated params")
    }

    /// Spacing between consecutive protocol frames sent with pinned backoff:
    /// from the end of one frame to the start of the next.
    pub fn priority_gap(&self) -> u32 {
        self.sifs + self.ack_duration + self.difs
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mac.slot", self.slot),
            ("mac.difs", self.difs),
            ("mac.sifs", self.sifs),
            ("mac.ack_duration", self.ack_duration),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        if self.sifs >= self.difs {
            return Err(Error::config("mac.sifs", "must be smaller than mac.difs"));
        }
        if self.cw_min < 2 {
            return Err(Error::config("mac.cw_min", "must be >= 2"));
        }
        if self.beta > 16 {
            return Err(Error::config("mac.beta", "must be <= 16"));
        }
        if self.bitrate == 0 {
            return Err(Error::config("mac.bitrate", "must be > 0"));
        }
        // smallest background frame is 500 bytes
        if air_time(500, self)? <= self.ack_duration {
            return Err(Error::config(
                "mac.ack_duration",
                "must be shorter than any data frame",
            ));
        }
        Ok(())
    }
}

/// Air time of a frame carrying `payload_len` bytes, rounded up to whole
/// microseconds.
pub fn air_time(payload_len: u32, params: &MacParams) -> Result<u32> {
    if payload_len == 0 {
        return Err(Error::InvalidArgument("payload length must be > 0".into()));
    }
    let bits = payload_len as u64 * 8 * 1_000_000;
    let us = bits.div_ceil(params.bitrate);
    Ok(us as u32 + params.phy_overhead)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overhead(bitrate: u64) -> MacParams {
        MacParams {
            bitrate,
            phy_overhead: 0,
            ..MacParams::default()
        }
    }

    #[test]
    fn air_time_examples() {
        assert_eq!(air_time(2304, &no_overhead(54_000_000)).unwrap(), 342);
        assert_eq!(air_time(2304, &no_overhead(1_000_000)).unwrap(), 18432);
        assert!(air_time(0, &MacParams::default()).is_err());
    }

    #[test]
    fn overhead_is_added() {
        let p = MacParams {
            phy_overhead: 20,
            ..no_overhead(54_000_000)
        };
        assert_eq!(air_time(2304, &p).unwrap(), 362);
    }

    #[test]
    fn defaults_are_valid() {
        let p = MacParams::default();
        p.validate().unwrap();
        assert_eq!(p.cw_max(), 2048);
        assert_eq!(p.ack_timeout(), 18 + 28 + 9);
        assert_eq!(p.priority_gap(), 80);
    }

    #[test]
    fn rejects_sifs_not_below_difs() {
        let p = MacParams {
            sifs: 34,
            ..MacParams::default()
        };
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "mac.sifs"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_tiny_window() {
        let p = MacParams {
            cw_min: 1,
            ..MacParams::default()
        };
        assert!(p.validate().is_err());
    }
}
