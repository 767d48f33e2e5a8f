//! Versioned scenario files describing one aggregation experiment.
//!
//! ```toml
//! schema = "robustsum-scenario/1"
//! verifiers = 2
//! dim = 64
//! proj_dim = 64
//! eps = 1.0
//! delta = 1e-2
//! beta = 0.01
//! coalition = [1]
//!
//! [[clients]]
//! label = "honest"
//! count = 10
//!
//! [[clients]]
//! label = "adv"
//! count = 1
//! behavior = "norm-inflating"
//! rho_multiple = 2.0
//! pattern = "concentrated"
//! ```
//!
//! Client `j` of group `label` gets the id `label-j`; its randomness is
//! derived from the master seed and that id only.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::aggregate::{run_aggregation, AggregateResult, AggregationOptions, Behavior, ClientSubmission, MassPattern};
use crate::error::{Error, Result};
use crate::math::calibrate::{calibrate, CalibrationReport, CalibrationRequest, ProtocolParams, TauMode};
use crate::norm::WMode;
use crate::rng::Seed;
use crate::sharing::Truncation;
use crate::sim::party::{ClientId, PartyId};
use crate::sim::transcript::Transcript;

pub const SCENARIO_SCHEMA: &str = "robustsum-scenario/1";

fn default_schema() -> String {
    SCENARIO_SCHEMA.to_string()
}

fn default_norm() -> f64 {
    1.0
}

fn default_trials() -> usize {
    1
}

/// A block of identically configured clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientGroup {
    pub label: String,
    pub count: usize,
    #[serde(default)]
    pub behavior: Behavior,
    /// Input norm. Honest groups need `norm ≤ 1`.
    #[serde(default = "default_norm")]
    pub norm: f64,
    /// Norm as a multiple of the calibrated `ρ`; overrides `norm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_multiple: Option<f64>,
    #[serde(default)]
    pub pattern: MassPattern,
    /// Verifier skipped (partial-send) or sent a malformed share
    /// (inconsistent-shares). Defaults to the last verifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omit_verifier: Option<usize>,
}

impl ClientGroup {
    pub fn honest(label: &str, count: usize) -> Self {
        ClientGroup {
            label: label.to_string(),
            count,
            behavior: Behavior::Honest,
            norm: 1.0,
            rho_multiple: None,
            pattern: MassPattern::Random,
            omit_verifier: None,
        }
    }

    pub fn norm_inflating(label: &str, count: usize, rho_multiple: f64, pattern: MassPattern) -> Self {
        ClientGroup {
            behavior: Behavior::NormInflating,
            rho_multiple: Some(rho_multiple),
            pattern,
            ..Self::honest(label, count)
        }
    }

    pub fn client_id(&self, j: usize) -> Result<ClientId> {
        ClientId::parse(format!("{}-{j}", self.label)).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    fn target_norm(&self, rho: f64) -> f64 {
        self.rho_multiple.map_or(self.norm, |m| m * rho)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub verifiers: usize,
    pub dim: usize,
    pub proj_dim: usize,
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ss: Option<f64>,
    #[serde(default)]
    pub tau_mode: TauMode,
    #[serde(default)]
    pub w_mode: WMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_threshold: Option<f64>,
    /// Verifier coalition whose view is recorded.
    #[serde(default)]
    pub coalition: BTreeSet<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Calibrate with `β/n` so the whole session fails with probability `≤ β`.
    #[serde(default)]
    pub session_calibrated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_noise: Option<f64>,
    pub clients: Vec<ClientGroup>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

impl Scenario {
    /// A scenario with no clients and default options.
    pub fn new(verifiers: usize, dim: usize, proj_dim: usize, eps: f64, delta: f64, beta: f64) -> Self {
        Scenario {
            schema: default_schema(),
            verifiers,
            dim,
            proj_dim,
            eps,
            delta,
            beta,
            eps_ss: None,
            delta_ss: None,
            tau_mode: TauMode::TailBound,
            w_mode: WMode::Shared,
            validity_threshold: None,
            coalition: BTreeSet::new(),
            trials: 1,
            session_calibrated: false,
            truncation: None,
            output_noise: None,
            clients: Vec::new(),
        }
    }

    pub fn with_group(mut self, g: ClientGroup) -> Self {
        self.clients.push(g);
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Number of clients `n`.
    pub fn provers(&self) -> usize {
        self.clients.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(bad(format!("unsupported schema {:?}, expected {SCENARIO_SCHEMA:?}", self.schema)));
        }
        if self.verifiers < 2 {
            return Err(bad("need at least 2 verifiers"));
        }
        if self.dim < 1 || self.proj_dim < 1 {
            return Err(bad("dim and proj_dim must be >= 1"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) || self.eps_ss.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err(bad("eps and eps_ss must be finite and > 0"));
        }
        for (name, v) in [("delta", Some(self.delta)), ("beta", Some(self.beta)), ("delta_ss", self.delta_ss)] {
            if v.is_some_and(|v| !(v > 0.0 && v < 1.0)) {
                return Err(bad(format!("{name} must lie in (0, 1)")));
            }
        }
        if let Some(t) = &self.truncation {
            t.validate().map_err(|e| bad(e.to_string()))?;
        }
        if self.provers() == 0 {
            return Err(bad("scenario has no clients"));
        }
        if self.trials == 0 {
            return Err(bad("trials must be >= 1"));
        }
        if self.coalition.len() >= self.verifiers || self.coalition.iter().any(|&i| i >= self.verifiers) {
            return Err(bad(format!(
                "coalition {:?} must be a strict subset of verifiers 0..{}",
                self.coalition, self.verifiers
            )));
        }
        if let Some(f) = self.validity_threshold {
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad(format!("validity_threshold must lie in (0, 1], got {f}")));
            }
        }
        if let Some(s) = self.output_noise {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(bad(format!("output_noise must be >= 0, got {s}")));
            }
        }
        let mut labels = HashSet::new();
        for g in &self.clients {
            if !labels.insert(g.label.as_str()) {
                return Err(bad(format!("duplicate client group label {:?}", g.label)));
            }
            // ids are "label-j" and j has no dash, so distinct labels never collide
            g.client_id(g.count.saturating_sub(1))?;
            if !(g.norm >= 0.0 && g.norm.is_finite()) {
                return Err(bad(format!("group {:?}: norm must be finite and >= 0", g.label)));
            }
            if let Some(m) = g.rho_multiple {
                if !(m >= 0.0 && m.is_finite()) {
                    return Err(bad(format!("group {:?}: rho_multiple must be finite and >= 0", g.label)));
                }
            }
            if g.behavior == Behavior::Honest && (g.norm > 1.0 || g.rho_multiple.is_some()) {
                return Err(bad(format!("honest group {:?} needs norm <= 1", g.label)));
            }
            if g.omit_verifier.is_some_and(|i| i >= self.verifiers) {
                return Err(bad(format!("group {:?}: omit_verifier out of range", g.label)));
            }
        }
        Ok(())
    }

    pub fn calibration_request(&self) -> CalibrationRequest {
        let n = self.provers().max(1);
        let beta = if self.session_calibrated { self.beta / n as f64 } else { self.beta };
        let mut req = CalibrationRequest::new(self.eps, self.delta, beta, self.verifiers, self.proj_dim, self.dim)
            .with_sharing_privacy(self.eps_ss.unwrap_or(self.eps), self.delta_ss.unwrap_or(self.delta))
            .with_provers(n)
            .with_tau_mode(self.tau_mode);
        if let Some(t) = &self.truncation {
            req = req.with_truncation(t.clone());
        }
        req
    }

    pub fn calibrate(&self) -> Result<CalibrationReport> {
        self.validate()?;
        calibrate(&self.calibration_request())
    }

    pub fn options(&self) -> AggregationOptions {
        AggregationOptions {
            w_mode: self.w_mode,
            validity_threshold: self.validity_threshold,
            output_noise: self.output_noise,
        }
    }

    /// Every client's wire behaviour, in group order.
    pub fn build_submissions(&self, params: &ProtocolParams, master_seed: &Seed) -> Result<Vec<ClientSubmission>> {
        if params.verifiers != self.verifiers || params.dim != self.dim || params.proj_dim != self.proj_dim {
            return Err(bad("params do not match the scenario shape"));
        }
        let mut out = Vec::with_capacity(self.provers());
        for g in &self.clients {
            let target = g.omit_verifier.unwrap_or(self.verifiers - 1);
            for j in 0..g.count {
                let id = g.client_id(j)?;
                let seed = PartyId::Client(id.clone()).seed(master_seed);
                let x = g.pattern.vector(&mut seed.derive("input").rng(), self.dim, g.target_norm(params.rho));
                let share_seed = seed.derive("shares");
                out.push(match g.behavior {
                    Behavior::Honest => ClientSubmission::honest(id, &x, params, share_seed)?,
                    Behavior::NormInflating => ClientSubmission::norm_inflating(id, &x, params, share_seed)?,
                    Behavior::PartialSend => ClientSubmission::partial_send(id, &x, params, target, share_seed)?,
                    Behavior::InconsistentShares => {
                        ClientSubmission::inconsistent_shares(id, &x, params, target, share_seed)?
                    }
                });
            }
        }
        Ok(out)
    }

    /// The same scenario without the named group.
    pub fn without_group(&self, label: &str) -> Scenario {
        let mut s = self.clone();
        s.clients.retain(|g| g.label != label);
        s
    }
}

/// Runs the full protocol for `scenario` over the bus.
pub fn run_scenario(scenario: &Scenario, params: &ProtocolParams, master_seed: Seed) -> Result<(AggregateResult, Transcript)> {
    scenario.validate()?;
    let subs = scenario.build_submissions(params, &master_seed)?;
    run_aggregation(&subs, params, &scenario.options(), master_seed)
}
