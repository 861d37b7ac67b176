//! Repeated-message Diffie-Hellman pairing: group arithmetic, the padded
//! wire format, channel estimation, choice of `m`, and the two parties'
//! protocol state machines.

mod dh;
mod estimate;
mod message;
mod party;

pub use dh::{dh_public, dh_shared, mod_pow, DhGroup, DhKeyPair, DEFAULT_P};
pub use estimate::{estimate_channel, select_m, ChannelEstimate, PairingConfig, MAX_M};
pub use message::{build_message, ProtocolMessage, FRAME_LEN};
pub use party::{
    alice_step, bob_step, PartyAction, PartyEvent, PartyPhase, PartyState, Role, TimerKind,
};
