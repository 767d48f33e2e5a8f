//! Deterministic multi-party simulation fabric.
//!
//! Protocol runs are executed over an in-process [`bus::Bus`] with
//! synchronous rounds. Every message is serialized with the [`wire`] format
//! and recorded in a [`transcript::Transcript`], so byte accounting and
//! coalition views are read off the same record the parties exchanged.

pub mod accounting;
pub mod bus;
pub mod message;
pub mod party;
pub mod scenario;
pub mod transcript;
pub mod wire;

pub use bus::Bus;
pub use message::{Message, MessageKind};
pub use party::{ClientId, PartyId};
pub use scenario::{run_scenario, ClientGroup, Scenario};
pub use transcript::{view_of, Transcript};
