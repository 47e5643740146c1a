//! Polar codes for classical-quantum channels with finite Abelian input groups.
//!
//! The crate builds synthetic channels by recursive channel combining,
//! measures how their Holevo information and fidelity parameters polarize
//! (including on quotient channels), chooses per-branch subgroups to form
//! a code, and simulates a successive-cancellation decoder built from
//! sequential pretty-good measurements. Multiple-access channels are
//! handled by viewing the product of the users' groups as one group.

pub mod error;
pub mod channel;
pub mod checks;
pub mod code;
pub mod decoder;
pub mod group;
pub mod limits;
pub mod linalg;
pub mod mac;
pub mod polarize;

pub use error::{Error, Result};
