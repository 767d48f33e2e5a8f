//! Monte Carlo sweeps of completeness and soundness over parameter grids.
//!
//! Grid points are enumerated in a fixed order (β, k, S, d, pattern) and
//! each point's trials use seeds derived from the master seed and the
//! point index, so rows are reproducible and come out in grid order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregate::MassPattern;
use crate::audit::rate::{count_parallel, RateEstimate};
use crate::audit::report::write_csv;
use crate::error::{invalid, Error, Result};
use crate::math::calibrate::{calibrate, CalibrationRequest, ProtocolParams, TauMode};
use crate::norm::{run_norm_verification, WMode};
use crate::rng::Seed;
use crate::sharing::share_vector;
use crate::sim::party::ClientId;

pub const EXPERIMENT_SCHEMA: &str = "robustsum-experiment/1";
pub const EXPERIMENT_CSV_SCHEMA: &str = "robustsum-experiment-rows/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Honest inputs of norm `input_norm`; the accept rate should be `≥ 1 − β`.
    Completeness,
    /// Share sums of norm `rho_multiple · ρ`; the accept rate should be `≤ β`.
    Soundness,
}

fn default_schema() -> String {
    EXPERIMENT_SCHEMA.to_string()
}
fn one() -> f64 {
    1.0
}
fn default_patterns() -> Vec<MassPattern> {
    vec![MassPattern::Random]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub kind: ExperimentKind,
    pub eps: f64,
    pub delta: f64,
    pub betas: Vec<f64>,
    pub proj_dims: Vec<usize>,
    pub verifiers: Vec<usize>,
    pub dims: Vec<usize>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<MassPattern>,
    #[serde(default = "one")]
    pub input_norm: f64,
    #[serde(default = "one")]
    pub rho_multiple: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub tau_mode: TauMode,
    #[serde(default)]
    pub w_mode: WMode,
    /// CSV destination, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta: f64,
    pub proj_dim: usize,
    pub verifiers: usize,
    pub dim: usize,
    pub pattern: MassPattern,
}

/// One CSV row per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub kind: ExperimentKind,
    pub beta: f64,
    pub k: usize,
    #[serde(rename = "S")]
    pub verifiers: usize,
    pub d: usize,
    pub pattern: MassPattern,
    /// Norm of the verified vector.
    pub norm: f64,
    pub tau: f64,
    pub rho: f64,
    pub trials: u64,
    pub accepts: u64,
    pub rate: f64,
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `1 − β` for completeness, `β` for soundness.
    pub bound: f64,
    pub pass: bool,
}

impl ExperimentGrid {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let g: ExperimentGrid = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != EXPERIMENT_SCHEMA {
            return Err(invalid(format!("unsupported schema {:?}, expected {EXPERIMENT_SCHEMA:?}", self.schema)));
        }
        if self.betas.is_empty()
            || self.proj_dims.is_empty()
            || self.verifiers.is_empty()
            || self.dims.is_empty()
            || self.patterns.is_empty()
        {
            return Err(invalid("experiment grid is empty"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(self.input_norm >= 0.0 && self.input_norm <= 1.0) {
            return Err(invalid(format!("input_norm must lie in [0, 1], got {}", self.input_norm)));
        }
        if !(self.rho_multiple >= 0.0 && self.rho_multiple.is_finite()) {
            return Err(invalid("rho_multiple must be finite and >= 0"));
        }
        for p in self.points() {
            self.request(&p).calibrate_completeness_only()?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &beta in &self.betas {
            for &proj_dim in &self.proj_dims {
                for &verifiers in &self.verifiers {
                    for &dim in &self.dims {
                        for &pattern in &self.patterns {
                            out.push(GridPoint { beta, proj_dim, verifiers, dim, pattern });
                        }
                    }
                }
            }
        }
        out
    }

    fn request(&self, p: &GridPoint) -> CalibrationRequest {
        CalibrationRequest::new(self.eps, self.delta, p.beta, p.verifiers, p.proj_dim, p.dim).with_tau_mode(self.tau_mode)
    }

    /// Completeness still makes sense where the soundness bound is vacuous
    /// (`k ≤ 4·ln(1/β)`); soundness points there are an error.
    pub fn params_for(&self, p: &GridPoint) -> Result<ProtocolParams> {
        let req = self.request(p);
        match (calibrate(&req), self.kind) {
            (Ok(r), _) => Ok(r.params),
            (Err(Error::InfeasibleParameters(_)), ExperimentKind::Completeness) => req.calibrate_completeness_only(),
            (Err(e), _) => Err(e),
        }
    }

    pub fn run_point(&self, index: usize, p: &GridPoint) -> Result<ExperimentRow> {
        let params = self.params_for(p)?;
        let seed = Seed::from_u64(self.seed).derive_indexed("point", index as u64);
        let (rate, bound, pass) = match self.kind {
            ExperimentKind::Completeness => {
                let r = count_parallel(self.trials, &seed, |s| {
                    completeness_trial(&params, self.input_norm, p.pattern, self.w_mode, s)
                })?;
                (r, 1.0 - p.beta, r.at_least(1.0 - p.beta))
            }
            ExperimentKind::Soundness => {
                let norm = self.rho_multiple * params.rho;
                let r = count_parallel(self.trials, &seed, |s| soundness_trial(&params, norm, p.pattern, self.w_mode, s))?;
                (r, p.beta, r.at_most(p.beta))
            }
        };
        Ok(row(self, p, &params, &rate, bound, pass))
    }

    pub fn run(&self) -> Result<Vec<ExperimentRow>> {
        self.validate()?;
        self.points().iter().enumerate().map(|(i, p)| self.run_point(i, p)).collect()
    }
}

fn row(g: &ExperimentGrid, p: &GridPoint, params: &ProtocolParams, r: &RateEstimate, bound: f64, pass: bool) -> ExperimentRow {
    ExperimentRow {
        kind: g.kind,
        beta: p.beta,
        k: p.proj_dim,
        verifiers: p.verifiers,
        d: p.dim,
        pattern: p.pattern,
        norm: match g.kind {
            ExperimentKind::Completeness => g.input_norm,
            ExperimentKind::Soundness => g.rho_multiple * params.rho,
        },
        tau: params.tau,
        rho: params.rho,
        trials: r.trials,
        accepts: r.successes,
        rate: r.rate,
        standard_error: r.standard_error,
        ci_low: r.ci95.0,
        ci_high: r.ci95.1,
        bound,
        pass,
    }
}

/// One norm verification of an honest input; returns the accept bit.
pub fn completeness_trial(params: &ProtocolParams, norm: f64, pattern: MassPattern, mode: WMode, seed: Seed) -> Result<bool> {
    verify_once(params, norm, pattern, mode, seed)
}

/// One norm verification whose shares sum to a vector of norm `norm`
/// (typically `ρ`); returns the accept bit.
pub fn soundness_trial(params: &ProtocolParams, norm: f64, pattern: MassPattern, mode: WMode, seed: Seed) -> Result<bool> {
    verify_once(params, norm, pattern, mode, seed)
}

fn verify_once(params: &ProtocolParams, norm: f64, pattern: MassPattern, mode: WMode, seed: Seed) -> Result<bool> {
    let x = pattern.vector(&mut seed.derive("input").rng(), params.dim, norm);
    let b = share_vector(ClientId::new("prover"), &x, params.verifiers, params.sigma_ss, seed.derive("shares"))?;
    let (o, _) = run_norm_verification(&b, params, seed.derive("session"), mode)?;
    Ok(o.accept)
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    write_csv(EXPERIMENT_CSV_SCHEMA, rows, out)
}
