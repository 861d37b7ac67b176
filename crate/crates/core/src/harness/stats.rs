use rayon::prelude::*;

use super::config::{CiMethod, RunMode, ScenarioConfig};
use super::scenario::{run_once, RunResult};
use crate::error::Result;

const Z95: f64 = 1.959_963_984_540_054;

/// 95% confidence interval for a binomial proportion, clamped to `[0, 1]`.
pub fn confidence_interval(successes: u64, n: u64, method: CiMethod) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    match method {
        CiMethod::Normal => {
            let h = Z95 * (p * (1.0 - p) / nf).sqrt();
            ((p - h).max(0.0), (p + h).min(1.0))
        }
        CiMethod::Wilson => {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / nf;
            let centre = (p + z2 / (2.0 * nf)) / denom;
            let h = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
            // at p = 0 or 1 one bound is exact; avoid rounding residue
            let lo = if successes == 0 {
                0.0
            } else {
                (centre - h).max(0.0)
            };
            let hi = if successes == n {
                1.0
            } else {
                (centre + h).min(1.0)
            };
            (lo, hi)
        }
    }
}

/// Summary of one group of replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub label: String,
    pub runs: u64,
    pub alarms: u64,
    /// Fraction of runs with an alarm: a false-positive rate without an
    /// attacker, a detection rate with one.
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_n_tx: f64,
    pub mean_p_ch: f64,
    pub keys_match: u64,
}

pub fn aggregate(label: &str, runs: &[RunResult], method: CiMethod) -> Aggregate {
    let n = runs.len() as u64;
    let alarms = runs.iter().filter(|r| r.alarm).count() as u64;
    let (ci_low, ci_high) = confidence_interval(alarms, n, method);
    let tx: u64 = runs.iter().map(|r| r.n_tx).sum();
    let col: u64 = runs.iter().map(|r| r.n_collision).sum();
    Aggregate {
        label: label.to_string(),
        runs: n,
        alarms,
        rate: if n == 0 {
            0.0
        } else {
            alarms as f64 / n as f64
        },
        ci_low,
        ci_high,
        mean_n_tx: if n == 0 { 0.0 } else { tx as f64 / n as f64 },
        mean_p_ch: if tx == 0 { 0.0 } else { col as f64 / tx as f64 },
        keys_match: runs.iter().filter(|r| r.keys_match).count() as u64,
    }
}

/// Runs of one configuration sharing a label (one per threshold in
/// monitor mode).
#[derive(Debug, Clone)]
pub struct ReplicationSet {
    pub label: String,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

/// Runs `cfg.replications` independent replications in parallel; results
/// come back in run_id order regardless of scheduling.
pub fn run_replications(cfg: &ScenarioConfig) -> Result<Vec<ReplicationSet>> {
    cfg.validate()?;
    let per_run: Vec<Vec<RunResult>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_once(cfg, r))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = match cfg.mode {
        RunMode::Pairing => vec![format!("pairing:{}", cfg.attacker.strategy)],
        RunMode::Monitor => cfg.detection.m.iter().map(|m| format!("m={m}")).collect(),
    };
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let runs: Vec<RunResult> = per_run.iter().map(|v| v[i].clone()).collect();
            let aggregate = aggregate(&label, &runs, cfg.ci);
            ReplicationSet {
                label,
                runs,
                aggregate,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_interval_matches_hand_value() {
        let (lo, hi) = confidence_interval(446, 20000, CiMethod::Normal);
        assert!((lo - 0.020252).abs() < 1e-5, "{lo}");
        assert!((hi - 0.024348).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn wilson_is_nonzero_width_at_zero() {
        let (lo, hi) = confidence_interval(0, 1000, CiMethod::Wilson);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.003 && hi < 0.004, "{hi}");
        assert_eq!(confidence_interval(0, 1000, CiMethod::Normal), (0.0, 0.0));
    }

    #[test]
    fn width_shrinks_like_inverse_sqrt() {
        let w = |n: u64| {
            let (lo, hi) = confidence_interval(n / 10, n, CiMethod::Normal);
            hi - lo
        };
        let ratio = w(1000) / w(4000);
        assert!((ratio - 2.0).abs() < 1e-9, "{ratio}");
    }
}
