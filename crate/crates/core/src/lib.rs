//! Link-layer detection of man-in-the-middle attacks against in-band
//! Diffie-Hellman pairing over 802.11 DCF.
//!
//! The crate is organised bottom-up:
//!
//! - [`mac`]: a deterministic discrete-event simulator of a single 802.11
//!   collision domain (binary exponential backoff, SIFS/DIFS timing, ACKs,
//!   directional transmissions).
//! - [`pairing`]: Diffie-Hellman arithmetic, the padded key-exchange frame
//!   and the Alice/Bob protocol state machines.
//! - [`adversary`]: jamming/forging attacker strategies.
//! - [`detection`]: channel occupancy classification, the consecutive
//!   collision detector and the three detection rules.
//! - [`analysis`]: saturated DCF fixed point, collision probability and the
//!   detector Markov chain.
//! - [`harness`]: scenario configuration, Monte Carlo replication and the
//!   named reproductions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod analysis;
pub mod detection;
pub mod error;
pub mod harness;
pub mod mac;
pub mod pairing;

pub use error::{Error, Result};
