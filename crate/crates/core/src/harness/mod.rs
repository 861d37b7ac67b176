//! Scenario configuration, the simulation driver, replication and output.

mod config;
mod output;
mod reproduce;
mod scenario;
mod stats;

pub use config::{
    AttackerConfig, BigNum, CiMethod, DetectionConfig, DhConfig, RunMode, ScenarioConfig,
    TrafficConfig, TrafficKind,
};
pub use output::{write_aggregate_csv, write_runs_csv, AggregateRecord, RunRecord};
pub use reproduce::{
    case_study_config, leading_collision_run, reproduce, simulate_channel, table2_config,
    table3_config, ChannelCounts, ReproduceOptions, TARGETS,
};
pub use scenario::{
    burst_check, run_monitor, run_once, run_pairing, BurstCheck, Detector, FrameSummary,
    PairingReport, RunResult,
};
pub use stats::{aggregate, confidence_interval, run_replications, Aggregate, ReplicationSet};
