use serde::{Deserialize, Serialize};

use crate::analysis::false_positive_ratio;
use crate::detection::TransmissionOutcome;
use crate::error::{Error, Result};

/// Upper bound on `m`; `select_m` never searches past it.
pub const MAX_M: u32 = 256;

/// Protocol timers and the false-positive target used to pick `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingConfig {
    /// Key exchange timer, seconds.
    #[serde(rename = "T_s")]
    pub timer_s: f64,
    /// Monitoring window, seconds.
    #[serde(rename = "t_s")]
    pub monitor_s: f64,
    pub target_pfp: f64,
    pub safety_margin: u32,
    /// Skip estimation and use this `m`.
    pub fixed_m: Option<u32>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            timer_s: 1.5,
            monitor_s: 1.0,
            target_pfp: 0.005,
            safety_margin: 2,
            fixed_m: None,
        }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.monitor_s > 0.0) {
            return Err(Error::config("protocol.t_s", "must be > 0"));
        }
        if !(self.timer_s > self.monitor_s) {
            return Err(Error::config(
                "protocol.T_s",
                "must be larger than protocol.t_s",
            ));
        }
        if !(self.target_pfp > 0.0) {
            return Err(Error::config("protocol.target_pfp", "must be > 0"));
        }
        if let Some(m) = self.fixed_m {
            if m == 0 || m > MAX_M {
                return Err(Error::config(
                    "protocol.fixed_m",
                    format!("must be in 1..={MAX_M}"),
                ));
            }
        }
        Ok(())
    }

    pub fn detection_window_s(&self) -> f64 {
        self.timer_s - self.monitor_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub p_ch_hat: f64,
    /// Expected transmissions in the detection window.
    pub k_hat: u64,
    pub observed_success: u64,
    pub observed_collision: u64,
    /// Nothing was observed; the estimate carries no information.
    pub low_confidence: bool,
}

impl ChannelEstimate {
    pub fn from_counts(success: u64, collision: u64, monitor_s: f64, detection_s: f64) -> Self {
        let total = success + collision;
        if total == 0 {
            return ChannelEstimate {
                p_ch_hat: 0.0,
                k_hat: 0,
                observed_success: 0,
                observed_collision: 0,
                low_confidence: true,
            };
        }
        ChannelEstimate {
            p_ch_hat: collision as f64 / total as f64,
            k_hat: (total as f64 * detection_s / monitor_s).round() as u64,
            observed_success: success,
            observed_collision: collision,
            low_confidence: false,
        }
    }
}

/// Estimates the collision probability and traffic density from the
/// outcomes classified during the monitoring window.
pub fn estimate_channel(
    outcomes: &[TransmissionOutcome],
    monitor_s: f64,
    detection_s: f64,
) -> ChannelEstimate {
    let collision = outcomes.iter().filter(|o| o.kind.is_collision()).count() as u64;
    let success = outcomes.len() as u64 - collision;
    ChannelEstimate::from_counts(success, collision, monitor_s, detection_s)
}

/// Smallest `m` whose expected false-alarm count over `k_hat` observations
/// stays within the target, plus the safety margin.
pub fn select_m(est: &ChannelEstimate, cfg: &PairingConfig) -> Result<u32> {
    if !(0.0..1.0).contains(&est.p_ch_hat) {
        return Err(Error::config(
            "protocol.target_pfp",
            format!("no finite m reaches the target at p_ch = {}", est.p_ch_hat),
        ));
    }
    for m in 1..=MAX_M {
        if false_positive_ratio(est.k_hat as f64, est.p_ch_hat, m)? <= cfg.target_pfp {
            return Ok(m + cfg.safety_margin);
        }
    }
    Err(Error::config(
        "protocol.target_pfp",
        format!("target not reached with m <= {MAX_M}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(p: f64, k: u64) -> ChannelEstimate {
        ChannelEstimate {
            p_ch_hat: p,
            k_hat: k,
            observed_success: 0,
            observed_collision: 0,
            low_confidence: false,
        }
    }

    #[test]
    fn case_study_counts() {
        let e = ChannelEstimate::from_counts(1994, 71, 1.0, 0.5);
        assert!((e.p_ch_hat - 0.0344).abs() < 1e-4);
        assert_eq!(e.k_hat, 1033);
        assert!(!e.low_confidence);
    }

    #[test]
    fn degenerate_counts() {
        let e = ChannelEstimate::from_counts(0, 0, 1.0, 0.5);
        assert_eq!((e.p_ch_hat, e.k_hat, e.low_confidence), (0.0, 0, true));
        assert_eq!(ChannelEstimate::from_counts(10, 0, 1.0, 0.5).p_ch_hat, 0.0);
        assert_eq!(ChannelEstimate::from_counts(10, 10, 1.0, 0.5).p_ch_hat, 0.5);
    }

    #[test]
    fn select_m_examples() {
        let cfg = PairingConfig::default();
        assert_eq!(select_m(&est(0.0, 1000), &cfg).unwrap(), 3);
        assert_eq!(select_m(&est(0.0344, 1033), &cfg).unwrap(), 6);
        let cfg1 = PairingConfig {
            target_pfp: 0.01,
            ..PairingConfig::default()
        };
        assert_eq!(select_m(&est(0.25, 1545), &cfg1).unwrap(), 11);
        assert!(select_m(&est(1.0, 1545), &cfg1).is_err());
    }

    #[test]
    fn config_validation() {
        PairingConfig::default().validate().unwrap();
        let bad = PairingConfig {
            monitor_s: 2.0,
            ..PairingConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { key, .. }) if key == "protocol.T_s"));
    }

    proptest! {
        #[test]
        fn monotone(p in 0.0f64..0.6, dp in 0.0f64..0.3, k in 0u64..5000, dk in 0u64..2000,
                    t in 0.001f64..0.1, dt in 0.0f64..0.1) {
            let at = |p: f64, k: u64, target: f64| {
                let cfg = PairingConfig { target_pfp: target, ..PairingConfig::default() };
                select_m(&est(p, k), &cfg).unwrap()
            };
            let base = at(p, k, t);
            prop_assert!(at(p, k, t + dt) <= base);
            prop_assert!(at((p + dp).min(0.9), k, t) >= base);
            prop_assert!(at(p, k + dk, t) >= base);
        }
    }
}
