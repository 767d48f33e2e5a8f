//! Closed-form calibration of every protocol parameter.
//!
//! Given the privacy targets `(ε, δ)` for norm verification, `(ε_ss, δ_ss)`
//! for secret sharing and the per-client failure probability `β`:
//!
//! - `σ_v = 2·c_δ·√(ln(4/δ))/ε`
//! - `σ_ss = 2·√(ln(2/δ_ss))/ε_ss` (worst case: a single honest verifier)
//! - `τ² = (1/k + S·σ_v²)·(k + 2·ln(1/β) + 2·√(k·ln(1/β)))`
//! - `ρ² = k·τ²/(k − 2·√(k·ln(1/β))) − k·S·σ_v²`
//!
//! The last bound is vacuous unless `k > 4·ln(1/β)`.

use serde::{Deserialize, Serialize};

use super::stats::{c_delta, check_unit_open, chi2_quantile, gaussian_sigma};
use crate::error::{invalid, Error, Result};
use crate::sharing::Truncation;

/// A complete parameter set for one protocol instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Number of verifiers `S`.
    pub verifiers: usize,
    /// Number of provers `n`.
    pub provers: usize,
    /// Input dimension `d`.
    pub dim: usize,
    /// Projection dimension `k`.
    pub proj_dim: usize,
    pub eps: f64,
    pub delta: f64,
    pub eps_ss: f64,
    pub delta_ss: f64,
    pub beta: f64,
    pub sigma_ss: f64,
    pub sigma_v: f64,
    pub tau: f64,
    /// Robustness budget. Infinite when only completeness was calibrated.
    #[serde(with = "float_or_inf")]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
}

impl ProtocolParams {
    /// Checks the structural invariants (not the calibration bounds).
    pub fn validate(&self) -> Result<()> {
        if self.verifiers < 2 {
            return Err(invalid(format!("need at least 2 verifiers, got {}", self.verifiers)));
        }
        if self.provers < 1 || self.dim < 1 || self.proj_dim < 1 {
            return Err(invalid("provers, dim and proj_dim must all be >= 1"));
        }
        for (name, v) in [
            ("sigma_ss", self.sigma_ss),
            ("sigma_v", self.sigma_v),
            ("tau", self.tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.rho >= 1.0) {
            return Err(invalid(format!("rho must be >= 1, got {}", self.rho)));
        }
        if let Some(t) = &self.truncation {
            t.validate()?;
        }
        Ok(())
    }

    /// Lists every calibration bound these parameters violate.
    pub fn calibration_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tol = 1e-9;
        match c_delta(self.proj_dim, self.delta) {
            Ok(c) if self.eps > 0.0 => {
                let min = 2.0 * c * (4.0 / self.delta).ln().sqrt() / self.eps;
                if self.sigma_v < min * (1.0 - tol) {
                    out.push(format!("sigma_v {} < 2·c_δ·√(ln(4/δ))/ε = {min}", self.sigma_v));
                }
            }
            _ => out.push("eps/delta out of range".into()),
        }
        match gaussian_sigma(self.eps_ss, self.delta_ss, 1.0) {
            Ok(min) if self.sigma_ss < min * (1.0 - tol) => out.push(format!(
                "sigma_ss {} < 2·√(ln(2/δ_ss))/ε_ss = {min}",
                self.sigma_ss
            )),
            Ok(_) => {}
            Err(_) => out.push("eps_ss/delta_ss out of range".into()),
        }
        match completeness_tau(self.proj_dim, self.verifiers, self.sigma_v, self.beta) {
            Ok(min) if self.tau < min * (1.0 - tol) => {
                out.push(format!("tau {} below completeness bound {min}", self.tau))
            }
            Ok(_) => {}
            Err(e) => out.push(e.to_string()),
        }
        if self.rho.is_finite() {
            match soundness_rho(self.proj_dim, self.verifiers, self.sigma_v, self.beta, self.tau) {
                Ok(min) if self.rho < min * (1.0 - tol) => {
                    out.push(format!("rho {} below soundness bound {min}", self.rho))
                }
                Ok(_) => {}
                Err(e) => out.push(e.to_string()),
            }
        }
        out
    }

    /// Fixed-layout encoding used when hashing transcripts.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(160);
        for n in [self.verifiers, self.provers, self.dim, self.proj_dim] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in [
            self.eps,
            self.delta,
            self.eps_ss,
            self.delta_ss,
            self.beta,
            self.sigma_ss,
            self.sigma_v,
            self.tau,
            self.rho,
        ] {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        match &self.truncation {
            None => out.push(0),
            Some(t) => {
                out.push(1);
                out.extend_from_slice(&t.bound.to_bits().to_le_bytes());
                out.extend_from_slice(&t.step.to_bits().to_le_bytes());
            }
        }
        out
    }
}

/// Serializes `+∞` as the string `"inf"` so JSON can carry it.
mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// How the acceptance threshold is derived from the `χ²_k` law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauMode {
    /// Laurent–Massart tail bounds.
    #[default]
    TailBound,
    /// Exact `χ²_k` quantiles at `1 − β` (for `τ`) and `β` (for `ρ`).
    ExactCdf,
}

/// Inputs to [`calibrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRequest {
    pub eps: f64,
    pub delta: f64,
    pub eps_ss: f64,
    pub delta_ss: f64,
    pub beta: f64,
    pub verifiers: usize,
    pub proj_dim: usize,
    pub dim: usize,
    pub provers: usize,
    #[serde(default)]
    pub tau_mode: TauMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
}

impl CalibrationRequest {
    /// Uses `(eps, delta)` for the secret-sharing targets too.
    pub fn new(eps: f64, delta: f64, beta: f64, verifiers: usize, proj_dim: usize, dim: usize) -> Self {
        CalibrationRequest {
            eps,
            delta,
            eps_ss: eps,
            delta_ss: delta,
            beta,
            verifiers,
            proj_dim,
            dim,
            provers: 1,
            tau_mode: TauMode::TailBound,
            truncation: None,
        }
    }

    pub fn with_sharing_privacy(mut self, eps_ss: f64, delta_ss: f64) -> Self {
        self.eps_ss = eps_ss;
        self.delta_ss = delta_ss;
        self
    }

    pub fn with_provers(mut self, n: usize) -> Self {
        self.provers = n;
        self
    }

    pub fn with_tau_mode(mut self, mode: TauMode) -> Self {
        self.tau_mode = mode;
        self
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = Some(t);
        self
    }

    fn check(&self) -> Result<()> {
        if self.verifiers < 2 {
            return Err(invalid(format!("need at least 2 verifiers, got {}", self.verifiers)));
        }
        if self.proj_dim < 1 || self.dim < 1 || self.provers < 1 {
            return Err(invalid("k, d and n must all be >= 1"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) || !(self.eps_ss > 0.0 && self.eps_ss.is_finite()) {
            return Err(invalid("eps and eps_ss must be finite and > 0"));
        }
        check_unit_open("delta", self.delta)?;
        check_unit_open("delta_ss", self.delta_ss)?;
        check_unit_open("beta", self.beta)?;
        if let Some(t) = &self.truncation {
            t.validate()?;
        }
        Ok(())
    }

    /// Calibrates `σ_v`, `σ_ss` and `τ` but leaves `ρ` infinite.
    ///
    /// For grid points where `k ≤ 4·ln(1/β)` the soundness bound is vacuous
    /// yet completeness is still meaningful.
    pub fn calibrate_completeness_only(&self) -> Result<ProtocolParams> {
        self.check()?;
        let (sigma_v, sigma_ss) = self.sigmas()?;
        let tau = match self.tau_mode {
            TauMode::TailBound => completeness_tau(self.proj_dim, self.verifiers, sigma_v, self.beta)?,
            TauMode::ExactCdf => exact_tau(self.proj_dim, self.verifiers, sigma_v, self.beta)?,
        };
        Ok(self.params(sigma_ss, sigma_v, tau, f64::INFINITY))
    }

    fn sigmas(&self) -> Result<(f64, f64)> {
        let c = c_delta(self.proj_dim, self.delta)?;
        let sigma_v = 2.0 * c * (4.0 / self.delta).ln().sqrt() / self.eps;
        let sigma_ss = gaussian_sigma(self.eps_ss, self.delta_ss, 1.0)?;
        Ok((sigma_v, sigma_ss))
    }

    fn params(&self, sigma_ss: f64, sigma_v: f64, tau: f64, rho: f64) -> ProtocolParams {
        ProtocolParams {
            verifiers: self.verifiers,
            provers: self.provers,
            dim: self.dim,
            proj_dim: self.proj_dim,
            eps: self.eps,
            delta: self.delta,
            eps_ss: self.eps_ss,
            delta_ss: self.delta_ss,
            beta: self.beta,
            sigma_ss,
            sigma_v,
            tau,
            rho,
            truncation: self.truncation.clone(),
        }
    }
}

/// One line of the calibration derivation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub name: String,
    pub formula: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub params: ProtocolParams,
    pub c_delta: f64,
    /// `√(ln(1/β))/k`.
    pub lambda: f64,
    pub rho_exact: f64,
    /// First-order expansion `ρ² ≈ 1 + 4·(1 + k·S·σ_v²)·√(ln(1/β)/k)`.
    pub rho_asymptotic_estimate: f64,
    pub tau_mode: TauMode,
    pub derivation_log: Vec<Derivation>,
}

/// Minimal threshold with `Pr[‖v‖ ≥ τ] ≤ β` for honest inputs (tail-bound form).
pub fn completeness_tau(k: usize, verifiers: usize, sigma_v: f64, beta: f64) -> Result<f64> {
    check_common(k, verifiers, sigma_v, beta)?;
    let kf = k as f64;
    let lb = (1.0 / beta).ln();
    let scale = 1.0 / kf + verifiers as f64 * sigma_v * sigma_v;
    Ok((scale * (kf + 2.0 * lb + 2.0 * (kf * lb).sqrt())).sqrt())
}

/// Minimal `ρ` with `Pr[‖v‖ < τ] ≤ β` whenever the share sum has norm `≥ ρ`.
pub fn soundness_rho(k: usize, verifiers: usize, sigma_v: f64, beta: f64, tau: f64) -> Result<f64> {
    check_common(k, verifiers, sigma_v, beta)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be finite and > 0, got {tau}")));
    }
    let kf = k as f64;
    let lb = (1.0 / beta).ln();
    let denom = kf - 2.0 * (kf * lb).sqrt();
    if denom <= 0.0 {
        return Err(Error::InfeasibleParameters(format!(
            "k = {k} must exceed 4·ln(1/β) = {:.4} for the soundness bound to hold",
            4.0 * lb
        )));
    }
    let rho2 = kf * tau * tau / denom - kf * verifiers as f64 * sigma_v * sigma_v;
    Ok(rho2.max(0.0).sqrt())
}

fn exact_tau(k: usize, verifiers: usize, sigma_v: f64, beta: f64) -> Result<f64> {
    check_common(k, verifiers, sigma_v, beta)?;
    let scale = 1.0 / k as f64 + verifiers as f64 * sigma_v * sigma_v;
    Ok((scale * chi2_quantile(k, 1.0 - beta)?).sqrt())
}

fn exact_rho(k: usize, verifiers: usize, sigma_v: f64, beta: f64, tau: f64) -> Result<f64> {
    let q = chi2_quantile(k, beta)?;
    let kf = k as f64;
    let rho2 = kf * (tau * tau / q - verifiers as f64 * sigma_v * sigma_v);
    Ok(rho2.max(0.0).sqrt())
}

fn check_common(k: usize, verifiers: usize, sigma_v: f64, beta: f64) -> Result<()> {
    if k < 1 {
        return Err(invalid("k must be >= 1"));
    }
    if verifiers < 1 {
        return Err(invalid("need at least one verifier"));
    }
    if !(sigma_v > 0.0 && sigma_v.is_finite()) {
        return Err(invalid(format!("sigma_v must be finite and > 0, got {sigma_v}")));
    }
    check_unit_open("beta", beta)
}

/// Sets `σ_v`, `σ_ss`, `τ` and `ρ` to their minimal admissible values.
pub fn calibrate(req: &CalibrationRequest) -> Result<CalibrationReport> {
    req.check()?;
    let k = req.proj_dim;
    let s = req.verifiers;
    let kf = k as f64;
    let lb = (1.0 / req.beta).ln();

    // Tail-bound soundness is the contract even when the exact quantiles
    // are used for the reported thresholds.
    if req.tau_mode == TauMode::TailBound && kf <= 4.0 * lb {
        return Err(Error::InfeasibleParameters(format!(
            "k = {k} must exceed 4·ln(1/β) = {:.4} for the soundness bound to hold",
            4.0 * lb
        )));
    }

    let c = c_delta(k, req.delta)?;
    let lambda = lb.sqrt() / kf;
    let (sigma_v, sigma_ss) = req.sigmas()?;
    let (tau, rho) = match req.tau_mode {
        TauMode::TailBound => {
            let tau = completeness_tau(k, s, sigma_v, req.beta)?;
            (tau, soundness_rho(k, s, sigma_v, req.beta, tau)?)
        }
        TauMode::ExactCdf => {
            let tau = exact_tau(k, s, sigma_v, req.beta)?;
            (tau, exact_rho(k, s, sigma_v, req.beta, tau)?)
        }
    };
    let noise = kf * s as f64 * sigma_v * sigma_v;
    let rho_asym = (1.0 + 4.0 * (1.0 + noise) * (lb / kf).sqrt()).sqrt();

    let log = vec![
        d("c_delta", "√(1 + 2√(ln(1/δ)/k) + 2·ln(1/δ)/k)", c),
        d("lambda", "√(ln(1/β))/k", lambda),
        d("sigma_v", "2·c_δ·√(ln(4/δ))/ε", sigma_v),
        d("sigma_ss", "2·√(ln(2/δ_ss))/ε_ss", sigma_ss),
        match req.tau_mode {
            TauMode::TailBound => d(
                "tau_squared",
                "(1/k + S·σ_v²)·(k + 2·ln(1/β) + 2·√(k·ln(1/β)))",
                tau * tau,
            ),
            TauMode::ExactCdf => d("tau_squared", "(1/k + S·σ_v²)·χ²_k⁻¹(1 − β)", tau * tau),
        },
        d("tau", "√τ²", tau),
        match req.tau_mode {
            TauMode::TailBound => d(
                "rho_squared",
                "k·τ²/(k − 2·√(k·ln(1/β))) − k·S·σ_v²",
                rho * rho,
            ),
            TauMode::ExactCdf => d("rho_squared", "k·(τ²/χ²_k⁻¹(β) − S·σ_v²)", rho * rho),
        },
        d("rho", "√ρ²", rho),
        d(
            "rho_asymptotic",
            "√(1 + 4·(1 + k·S·σ_v²)·√(ln(1/β)/k))",
            rho_asym,
        ),
    ];

    Ok(CalibrationReport {
        params: req.params(sigma_ss, sigma_v, tau, rho),
        c_delta: c,
        lambda,
        rho_exact: rho,
        rho_asymptotic_estimate: rho_asym,
        tau_mode: req.tau_mode,
        derivation_log: log,
    })
}

fn d(name: &str, formula: &str, value: f64) -> Derivation {
    Derivation {
        name: name.to_string(),
        formula: formula.to_string(),
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> CalibrationRequest {
        CalibrationRequest::new(1.0, 1e-5, 0.01, 2, 64, 1024).with_provers(100)
    }

    #[test]
    fn sigma_ss_is_the_gaussian_mechanism_sigma() {
        let r = calibrate(&req()).unwrap();
        assert_eq!(r.params.sigma_ss, gaussian_sigma(1.0, 1e-5, 1.0).unwrap());
    }

    #[test]
    fn infeasible_when_k_too_small() {
        let r = CalibrationRequest::new(1.0, 1e-5, 1e-12, 2, 16, 8);
        assert!(matches!(calibrate(&r), Err(Error::InfeasibleParameters(_))));
        // completeness alone is still available
        let p = r.calibrate_completeness_only().unwrap();
        assert!(p.rho.is_infinite());
        assert!(p.tau > 0.0);
    }

    #[test]
    fn report_is_self_consistent() {
        let r = calibrate(&req()).unwrap();
        assert!(r.params.validate().is_ok());
        assert!(r.params.calibration_violations().is_empty());
        assert!((r.c_delta - c_delta(64, 1e-5).unwrap()).abs() < 1e-15);
        assert!((r.lambda - (100f64).ln().sqrt() / 64.0).abs() < 1e-15);
        assert_eq!(r.rho_exact, r.params.rho);
        assert!(r.params.rho >= 1.0);
        let names: Vec<_> = r.derivation_log.iter().map(|d| d.name.as_str()).collect();
        for n in ["c_delta", "lambda", "sigma_v", "tau_squared", "rho_squared"] {
            assert!(names.contains(&n), "{n} missing from derivation log");
        }
    }

    #[test]
    fn rho_is_minimal_for_soundness() {
        let p = calibrate(&req()).unwrap().params;
        let kf = p.proj_dim as f64;
        let lb = (1.0 / p.beta).ln();
        let rhs = kf * p.tau * p.tau / (kf - 2.0 * (kf * lb).sqrt())
            - kf * p.verifiers as f64 * p.sigma_v * p.sigma_v;
        assert!((p.rho * p.rho - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn exact_cdf_tau_is_smaller() {
        let tail = calibrate(&req()).unwrap();
        let exact = calibrate(&req().with_tau_mode(TauMode::ExactCdf)).unwrap();
        assert!(exact.params.tau < tail.params.tau);
        assert!(exact.params.rho < tail.params.rho);
        assert!(exact.params.rho >= 1.0);
    }

    #[test]
    fn violations_are_reported() {
        let mut p = calibrate(&req()).unwrap().params;
        p.sigma_v *= 0.5;
        p.tau = 1.0;
        let v = p.calibration_violations();
        assert!(v.iter().any(|s| s.starts_with("sigma_v")));
        assert!(v.iter().any(|s| s.starts_with("tau")));
    }

    #[test]
    fn invalid_requests() {
        let mut r = req();
        r.verifiers = 1;
        assert!(matches!(calibrate(&r), Err(Error::InvalidParameter(_))));
        let mut r = req();
        r.beta = 1.0;
        assert!(matches!(calibrate(&r), Err(Error::InvalidParameter(_))));
        let mut r = req();
        r.eps = 0.0;
        assert!(matches!(calibrate(&r), Err(Error::InvalidParameter(_))));
    }
}
