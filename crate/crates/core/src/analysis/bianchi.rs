use crate::error::{Error, Result};
use crate::mac::MacParams;

/// Saturated operating point of `n_stations` contending stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcfOperatingPoint {
    pub n_stations: u32,
    /// Per-slot transmission probability of one station.
    pub tau: f64,
    /// Probability that a transmission collides, seen by the transmitter.
    pub p_cond: f64,
    /// Probability that an observed transmission is a collision.
    pub p_ch: f64,
}

/// Per-slot transmission probability of a retry-limited saturated station
/// whose attempts collide independently with probability `p`.
///
/// Stage `i` draws its backoff uniformly from `{0, ..., W_i - 1}` with
/// `W_i = 2^min(i, beta) * cw_min`, and a frame gets `retry_limit + 1`
/// attempts. By renewal-reward, tau is expected attempts per frame over
/// expected slots per frame, each stage costing `(W_i + 1) / 2` slots.
pub fn tau_of_p(p: f64, params: &MacParams) -> f64 {
    let mut attempts = 0.0;
    let mut slots = 0.0;
    let mut reach = 1.0;
    for stage in 0..=params.retry_limit {
        let w = (params.cw_min as f64) * 2f64.powi(stage.min(params.beta) as i32);
        attempts += reach;
        slots += reach * (w + 1.0) / 2.0;
        reach *= p;
    }
    attempts / slots
}

/// Probability that an observed transmission is a collision when `n`
/// stations each transmit in a slot with probability `tau`.
pub fn channel_collision_prob(n_stations: u32, tau: f64) -> Result<f64> {
    if n_stations == 0 {
        return Err(Error::InvalidArgument("station count must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    let n = n_stations as f64;
    if n_stations == 1 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau == 1.0 {
        return Ok(1.0);
    }
    let idle = (1.0 - tau).powf(n);
    let single = n * tau * (1.0 - tau).powf(n - 1.0);
    let busy = 1.0 - idle;
    Ok((busy - single) / busy)
}

/// Solves the coupled `tau(p)`, `p = 1 - (1 - tau)^(n-1)` system by
/// bisection on `p`.
pub fn bianchi_fixed_point(n_stations: u32, params: &MacParams) -> Result<DcfOperatingPoint> {
    if n_stations == 0 {
        return Err(Error::InvalidArgument("station count must be >= 1".into()));
    }
    let others = (n_stations - 1) as f64;
    let residual = |p: f64| p - (1.0 - (1.0 - tau_of_p(p, params)).powf(others));

    let p_cond = if n_stations == 1 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        // residual(0) < 0 < residual(1) and residual is increasing
        let mut iterations = 0;
        loop {
            let mid = 0.5 * (lo + hi);
            let r = residual(mid);
            if r.abs() <= 1e-13 || hi - lo < 1e-15 {
                break mid;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 200 {
                return Err(Error::NoConvergence(format!(
                    "bisection for n={n_stations} stalled at p in [{lo}, {hi}], residual {r:e}"
                )));
            }
        }
    };
    let r = residual(p_cond);
    if r.abs() > 1e-10 {
        return Err(Error::NoConvergence(format!(
            "residual {r:e} at p={p_cond} for n={n_stations}"
        )));
    }
    let tau = tau_of_p(p_cond, params);
    Ok(DcfOperatingPoint {
        n_stations,
        tau,
        p_cond,
        p_ch: channel_collision_prob(n_stations, tau)?,
    })
}
