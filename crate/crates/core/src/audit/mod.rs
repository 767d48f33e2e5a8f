//! Statistical checks of the protocol's distributional claims.
//!
//! Sampling checks run at inflated `δ, β ≥ 1e-2` where Monte Carlo has
//! power; production-scale `δ` is certified through closed-form normal
//! tails instead. Privacy losses always come from analytic Gaussian
//! densities.

pub mod closeness;
pub mod ks;
pub mod loss;
pub mod rate;
pub mod report;
pub mod suite;
pub mod tails;

pub use closeness::{two_sample_closeness, ClosenessReport, Verdict};
pub use loss::{analytic_exceed_probability, conditioned_projection_privacy, privacy_loss_mc, PrivacyLossEstimate};
pub use rate::{rate_estimate, RateEstimate};
pub use report::{AuditRow, CheckVerdict};
pub use suite::{run_suite, SuiteConfig};
pub use tails::{chi2_tail_frequencies, ChiSquareTail};
