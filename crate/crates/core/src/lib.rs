//! Poisoning-robust, differentially secure vector summation across several
//! non-colluding servers.
//!
//! Clients split a real vector `x` (with `‖x‖ ≤ 1`) into Gaussian additive
//! shares, one per server. The servers check that the shared vector has a
//! bounded Euclidean norm by thresholding a noisy random projection of the
//! share sum, without ever reconstructing `x`, and then add up the shares of
//! every accepted client. A malicious client can shift the output by at most
//! the calibrated robustness budget `ρ`, except with probability `β`, while
//! any strict subset of servers sees a transcript that is `(ε, δ)`-close to
//! one produced by a simulator that never saw `x`.
//!
//! Module map:
//!
//! - [`math`]: Gaussian mechanism, chi-square tail thresholds, projection
//!   matrices and closed-form parameter calibration.
//! - [`sharing`]: Gaussian additive secret sharing, its simulator, and share
//!   truncation/quantization.
//! - [`norm`]: the norm-verification protocol and its simulator.
//! - [`aggregate`]: end-to-end robust aggregation over many clients.
//! - [`sim`]: deterministic round-based message bus, transcripts, wire
//!   format and scenario configuration.
//! - [`audit`]: statistical checks of the completeness, soundness, exact
//!   simulation and privacy-loss claims.
//! - [`experiment`]: Monte Carlo sweeps over parameter grids.

pub mod aggregate;
pub mod audit;
mod error;
pub mod experiment;
pub mod math;
pub mod norm;
pub mod rng;
pub mod sharing;
pub mod sim;
mod vector;

pub use error::{Error, Result};
pub use math::calibrate::{CalibrationReport, CalibrationRequest, ProtocolParams, TauMode};
pub use rng::Seed;
pub use sim::party::{ClientId, PartyId};
pub use vector::RealVector;
