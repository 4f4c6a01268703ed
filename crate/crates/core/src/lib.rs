//! Four-party honest-majority secure computation over Z_{2^ℓ} with
//! arithmetic, boolean and garbled sharings, conversions between them, and
//! fixed-point machine-learning building blocks.
//!
//! Parties run as independent state machines connected by metered
//! channels, so every protocol's round and communication cost can be
//! asserted exactly.

pub mod adversary;
pub mod arith;
pub mod bench;
pub mod circuit;
pub mod convert;
pub mod ctx;
pub mod error;
pub mod garbled;
pub mod ml;
pub mod net;
pub mod party;
pub mod prf;
pub mod ring;
pub mod sharing;

pub use ctx::{run, run_party, run_with, Backend, Config, MsbMode, Party, RunOutput};
pub use error::{Error, Result};
pub use party::{PartyId, PartySet, P0, P1, P2, P3};
pub use ring::{FixedPoint, Ring, RingElement};
