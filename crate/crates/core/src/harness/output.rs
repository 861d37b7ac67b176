use std::path::Path;

use serde::Serialize;

use super::scenario::RunResult;
use super::stats::Aggregate;
use crate::error::Result;

/// CSV form of a [`RunResult`]; the header is the field list.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub run_id: u32,
    pub seed: u64,
    pub n_tx: u64,
    pub n_success: u64,
    pub n_collision: u64,
    pub max_consecutive_collisions: u32,
    pub alarm: bool,
    pub alarm_rule: String,
    pub detected_by: String,
    pub keys_match: bool,
}

impl From<&RunResult> for RunRecord {
    fn from(r: &RunResult) -> Self {
        RunRecord {
            run_id: r.run_id,
            seed: r.seed,
            n_tx: r.n_tx,
            n_success: r.n_success,
            n_collision: r.n_collision,
            max_consecutive_collisions: r.max_consecutive_collisions,
            alarm: r.alarm,
            alarm_rule: r
                .alarm_rule
                .map(|a| format!("rule{}", a.number()))
                .unwrap_or_default(),
            detected_by: r
                .detected_by
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            keys_match: r.keys_match,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AggregateRecord {
    pub label: String,
    pub runs: u64,
    pub alarms: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_n_tx: f64,
    pub mean_p_ch: f64,
    pub keys_match: u64,
}

impl From<&Aggregate> for AggregateRecord {
    fn from(a: &Aggregate) -> Self {
        AggregateRecord {
            label: a.label.clone(),
            runs: a.runs,
            alarms: a.alarms,
            rate: a.rate,
            ci_low: a.ci_low,
            ci_high: a.ci_high,
            mean_n_tx: a.mean_n_tx,
            mean_p_ch: a.mean_p_ch,
            keys_match: a.keys_match,
        }
    }
}

pub fn write_runs_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if runs.is_empty() {
        w.write_record([
            "run_id",
            "seed",
            "n_tx",
            "n_success",
            "n_collision",
            "max_consecutive_collisions",
            "alarm",
            "alarm_rule",
            "detected_by",
            "keys_match",
        ])?;
    }
    for r in runs {
        w.serialize(RunRecord::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(path: &Path, aggs: &[Aggregate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for a in aggs {
        w.serialize(AggregateRecord::from(a))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::AlarmRule;
    use crate::harness::Detector;

    #[test]
    fn header_is_field_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let r = RunResult {
            run_id: 3,
            seed: 4,
            n_tx: 10,
            n_success: 7,
            n_collision: 3,
            max_consecutive_collisions: 2,
            alarm: true,
            alarm_rule: Some(AlarmRule::Rule2),
            detected_by: vec![Detector::Alice, Detector::Bob],
            keys_match: false,
        };
        write_runs_csv(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,seed,n_tx,n_success,n_collision,max_consecutive_collisions,alarm,alarm_rule,detected_by,keys_match"
        );
        assert_eq!(
            lines.next().unwrap(),
            "3,4,10,7,3,2,true,rule2,alice;bob,false"
        );
    }
}
