use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_p(p_ch: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p_ch) {
        return Err(Error::InvalidArgument(format!(
            "collision probability {p_ch} outside [0, 1)"
        )));
    }
    Ok(())
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("threshold m must be >= 1".into()));
    }
    Ok(())
}

/// Stationary probability of the detector sitting in its alarm state `m`
/// when every observation collides independently with probability `p_ch`:
/// `(p^m - p^(m+1)) / (1 - p^(m+1))`.
pub fn stationary_alarm_prob(p_ch: f64, m: u32) -> Result<f64> {
    check_p(p_ch)?;
    check_m(m)?;
    let pm = p_ch.powi(m as i32);
    let pm1 = pm * p_ch;
    Ok((pm - pm1) / (1.0 - pm1))
}

/// Expected number of alarms over `k` observations, `k * pi_m`.
///
/// This is an expected count and can exceed 1; callers that report it as a
/// ratio clamp at presentation time.
pub fn false_positive_ratio(k: f64, p_ch: f64, m: u32) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("k = {k} must be >= 0")));
    }
    Ok(k * stationary_alarm_prob(p_ch, m)?)
}

/// Detector chain on states `0..=m` together with its stationary law.
#[derive(Debug, Clone)]
pub struct MarkovResult {
    pub stationary: Vec<f64>,
    pub transition: DMatrix<f64>,
}

/// Builds the `(m+1) x (m+1)` transition matrix (advance on a collision,
/// fall back to 0 on a success, state `m` always returns to 0) and solves
/// `pi = pi P`, `sum(pi) = 1` as a dense linear system.
pub fn solve_markov_bruteforce(p_ch: f64, m: u32) -> Result<MarkovResult> {
    check_p(p_ch)?;
    check_m(m)?;
    let size = m as usize + 1;
    let mut t = DMatrix::<f64>::zeros(size, size);
    for i in 0..m as usize {
        t[(i, i + 1)] = p_ch;
        t[(i, 0)] = 1.0 - p_ch;
    }
    t[(m as usize, 0)] = 1.0;

    // (P^T - I) pi = 0 with the last balance equation replaced by
    // normalisation
    let mut a = t.transpose() - DMatrix::<f64>::identity(size, size);
    for j in 0..size {
        a[(size - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(size);
    b[size - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Invariant(format!("singular chain for p={p_ch}, m={m}")))?;
    Ok(MarkovResult {
        stationary: pi.iter().copied().collect(),
        transition: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMetrics {
    /// Messages beyond the two of a plain exchange.
    pub extra_messages: u32,
    /// Seconds until a key may be installed.
    pub key_delay_s: f64,
}

pub fn cost_metrics(m: u32, timer_s: f64) -> Result<CostMetrics> {
    check_m(m)?;
    Ok(CostMetrics {
        extra_messages: 2 * (m - 1),
        key_delay_s: timer_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(stationary_alarm_prob(0.0, 3).unwrap(), 0.0);
        assert!((stationary_alarm_prob(0.5, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((stationary_alarm_prob(0.25, 2).unwrap() - 1.0 / 21.0).abs() < 1e-15);
        assert!(stationary_alarm_prob(1.0, 3).is_err());
        assert!(stationary_alarm_prob(0.2, 0).is_err());
    }

    #[test]
    fn two_state_chain_by_hand() {
        let r = solve_markov_bruteforce(0.5, 1).unwrap();
        assert!((r.stationary[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.stationary[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rows_are_stochastic() {
        for &p in &[0.0, 0.1, 0.37, 0.9] {
            let r = solve_markov_bruteforce(p, 6).unwrap();
            for i in 0..r.transition.nrows() {
                let s: f64 = r.transition.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-15);
            }
            let total: f64 = r.stationary.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            // pi = pi P
            let pi = nalgebra::RowDVector::from_vec(r.stationary.clone());
            let next = &pi * &r.transition;
            for (a, b) in pi.iter().zip(next.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_agrees_with_linear_solve() {
        for step in 1..=10 {
            let p = step as f64 * 0.05;
            for m in 1..=12 {
                let exact = stationary_alarm_prob(p, m).unwrap();
                let solved = solve_markov_bruteforce(p, m).unwrap().stationary[m as usize];
                assert!((exact - solved).abs() <= 1e-12, "p={p} m={m}");
            }
        }
    }

    #[test]
    fn false_positive_examples() {
        let v = false_positive_ratio(4000.0, 0.25, 10).unwrap();
        assert!((v - 2.86e-3).abs() < 5e-6, "{v}");
        assert_eq!(false_positive_ratio(0.0, 0.25, 4).unwrap(), 0.0);
        let v = false_positive_ratio(1033.0, 0.0344, 4).unwrap();
        assert!((v - 1.4e-3).abs() < 5e-5, "{v}");
        assert!(false_positive_ratio(-1.0, 0.1, 3).is_err());
    }

    #[test]
    fn fp_monotonicity() {
        for &p in &[0.05, 0.15, 0.25] {
            for m in 1..12 {
                let a = false_positive_ratio(2000.0, p, m).unwrap();
                let b = false_positive_ratio(2000.0, p, m + 1).unwrap();
                assert!(b < a);
                let c = false_positive_ratio(2001.0, p, m).unwrap();
                assert!(c > a);
                let d = false_positive_ratio(2000.0, p + 0.01, m).unwrap();
                assert!(d > a);
            }
        }
    }

    #[test]
    fn costs() {
        assert_eq!(cost_metrics(1, 1.5).unwrap().extra_messages, 0);
        let c = cost_metrics(7, 1.5).unwrap();
        assert_eq!(c.extra_messages, 12);
        assert_eq!(c.key_delay_s, 1.5);
        assert_eq!(cost_metrics(10, 1.5).unwrap().extra_messages, 18);
    }
}
