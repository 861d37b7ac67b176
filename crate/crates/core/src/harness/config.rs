use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::adversary::AttackKind;
use crate::error::{Error, Result};
use crate::mac::{MacParams, TrafficMode};
use crate::pairing::{DhGroup, PairingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Alice, Bob and possibly an attacker run the full protocol.
    Pairing,
    /// A silent observer runs the detector over background traffic only.
    Monitor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Saturated,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub n_background: u32,
    pub mode: TrafficKind,
    /// Per-station offered load for Poisson traffic, bits per second.
    pub rate: f64,
    pub payload_min: u32,
    pub payload_max: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            n_background: 5,
            mode: TrafficKind::Saturated,
            rate: 2.0e6,
            payload_min: 500,
            payload_max: 2000,
        }
    }
}

impl TrafficConfig {
    pub fn station_mode(&self) -> TrafficMode {
        match self.mode {
            TrafficKind::Saturated => TrafficMode::Saturated,
            TrafficKind::Poisson => TrafficMode::Poisson {
                rate_bps: self.rate,
            },
        }
    }
}

/// Group parameters; `p` may be written as a string when it does not fit a
/// TOML integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DhConfig {
    pub p: BigNum,
    pub g: BigNum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BigNum {
    Int(u64),
    Text(String),
}

impl BigNum {
    fn value(&self, key: &str) -> Result<BigUint> {
        match self {
            BigNum::Int(v) => Ok(BigUint::from(*v)),
            BigNum::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::config(key, format!("`{s}` is not a non-negative integer"))),
        }
    }
}

impl Default for DhConfig {
    fn default() -> Self {
        DhConfig {
            p: BigNum::Text(crate::pairing::DEFAULT_P.to_string()),
            g: BigNum::Int(2),
        }
    }
}

impl DhConfig {
    pub fn group(&self) -> Result<DhGroup> {
        DhGroup::new(self.p.value("dh.p")?, self.g.value("dh.g")?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerConfig {
    pub strategy: String,
    pub preamble_only: bool,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            strategy: "none".into(),
            preamble_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Require the prioritized spacing before counting a rule 2 alarm.
    pub pattern_check: bool,
    /// Parties install keys even after an alarm.
    pub ignore_alarms: bool,
    /// Thresholds evaluated in monitor mode.
    pub m: Vec<u32>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            pattern_check: false,
            ignore_alarms: false,
            m: vec![4, 5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Normal,
    Wilson,
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: RunMode,
    /// Monitor mode: observation window. Pairing mode: ignored, runs last
    /// until the key exchange timer expires.
    pub duration: f64,
    /// Time the channel runs before anything is measured.
    pub warmup: f64,
    pub replications: u32,
    pub base_seed: u64,
    pub ci: CiMethod,
    pub mac: MacParams,
    pub traffic: TrafficConfig,
    pub protocol: PairingConfig,
    pub dh: DhConfig,
    pub attacker: AttackerConfig,
    pub detection: DetectionConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: RunMode::Pairing,
            duration: 0.5,
            warmup: 0.1,
            replications: 1,
            base_seed: 1,
            ci: CiMethod::Normal,
            mac: MacParams::default(),
            traffic: TrafficConfig::default(),
            protocol: PairingConfig::default(),
            dh: DhConfig::default(),
            attacker: AttackerConfig::default(),
            detection: DetectionConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn attack_kind(&self) -> Result<AttackKind> {
        self.attacker.strategy.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.mac.validate()?;
        self.protocol.validate()?;
        self.dh.group()?;
        self.attack_kind()?;
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::config("duration", "must be > 0"));
        }
        if !(self.warmup >= 0.0) {
            return Err(Error::config("warmup", "must be >= 0"));
        }
        let t = &self.traffic;
        if t.n_background > 100 {
            return Err(Error::config("traffic.n_background", "must be <= 100"));
        }
        if t.payload_min == 0 || t.payload_min > t.payload_max {
            return Err(Error::config(
                "traffic.payload_min",
                "need 0 < payload_min <= payload_max",
            ));
        }
        if t.payload_max > crate::mac::MAX_PAYLOAD {
            return Err(Error::config(
                "traffic.payload_max",
                "exceeds the 802.11 maximum",
            ));
        }
        if t.mode == TrafficKind::Poisson && !(t.rate > 0.0) {
            return Err(Error::config("traffic.rate", "must be > 0"));
        }
        if self.mode == RunMode::Monitor
            && (self.detection.m.is_empty() || self.detection.m.contains(&0))
        {
            return Err(Error::config(
                "detection.m",
                "need at least one threshold, all >= 1",
            ));
        }
        Ok(())
    }
}
