//! Closed-form analytics for saturated DCF and the consecutive-collision
//! detector, each with an independent numerical counterpart.

mod bianchi;
mod detector_chain;

pub use bianchi::{bianchi_fixed_point, channel_collision_prob, tau_of_p, DcfOperatingPoint};
pub use detector_chain::{
    cost_metrics, false_positive_ratio, solve_markov_bruteforce, stationary_alarm_prob,
    CostMetrics, MarkovResult,
};
