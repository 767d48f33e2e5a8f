//! Statistical primitives and closed-form protocol calibration.

pub mod calibrate;
pub mod projection;
pub mod stats;

pub use calibrate::{
    calibrate, completeness_tau, soundness_rho, CalibrationReport, CalibrationRequest,
    Derivation, ProtocolParams, TauMode,
};
pub use projection::{sample_projection, ProjectionMatrix, SeedProvenance};
pub use stats::{c_delta, chi2_thresholds, gaussian_sigma, normal_tail};
