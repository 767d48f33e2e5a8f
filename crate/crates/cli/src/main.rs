//! `robustsum`: calibration, single runs, sweeps and audits.
//!
//! Exit codes: 0 success, 1 audit failure or I/O error, 2 usage, config or
//! infeasible parameters, 3 protocol abort.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use robustsum::aggregate::MassPattern;
use robustsum::audit::{report, run_suite, SuiteConfig};
use robustsum::experiment::{write_rows, ExperimentGrid};
use robustsum::math::{calibrate, CalibrationRequest, TauMode};
use robustsum::norm::{run_norm_verification, WMode};
use robustsum::sharing::{reconstruct, share_vector, Truncation};
use robustsum::sim::{run_scenario, view_of, PartyId, Scenario};
use robustsum::{ClientId, Error, RealVector, Seed};

/// Overrides the default output directory (`robustsum-out`).
const OUT_DIR_ENV: &str = "ROBUSTSUM_OUT_DIR";

#[derive(Parser)]
#[command(name = "robustsum", version, about = "Poisoning-robust, differentially secure vector summation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive sigma_v, sigma_ss, tau and rho from the privacy and failure targets.
    Calibrate {
        #[command(flatten)]
        p: ParamArgs,
        /// Write the full report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Secret-share one vector and print the shares as JSON.
    Share {
        /// Comma-separated coordinates; a random vector of norm --norm otherwise.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
        #[arg(long = "S", default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 1.0)]
        eps_ss: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta_ss: f64,
        /// Clamp shares to [-B, B] and round to multiples of --step.
        #[arg(long)]
        truncate: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one norm verification over the simulated network.
    VerifyNorm {
        #[command(flatten)]
        p: ParamArgs,
        /// Norm of the verified vector.
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
        #[arg(long, value_enum, default_value_t = PatternArg::Random)]
        pattern: PatternArg,
        #[arg(long, value_enum, default_value_t = WModeArg::Shared)]
        w_mode: WModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transcript file (default: <out dir>/verify-norm-<seed>.ndjson).
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run one aggregation session described by a scenario file.
    Aggregate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transcript file (default: <out dir>/aggregate-<seed>.ndjson).
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Include full payloads (hex) in the transcript.
        #[arg(long)]
        payloads: bool,
    },
    /// Sweep completeness or soundness over a parameter grid; writes CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// CSV file (default: the grid's `output`, else <out dir>/experiment.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the statistical audit battery; writes CSV.
    Audit {
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file (default: <out dir>/audit.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    beta: f64,
    /// Number of verifiers.
    #[arg(long = "S")]
    s: usize,
    /// Projection dimension.
    #[arg(long)]
    k: usize,
    /// Input dimension.
    #[arg(long)]
    d: usize,
    /// Number of provers.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Secret-sharing epsilon (defaults to --eps).
    #[arg(long)]
    eps_ss: Option<f64>,
    /// Secret-sharing delta (defaults to --delta).
    #[arg(long)]
    delta_ss: Option<f64>,
    /// Use exact chi-square quantiles for tau and rho.
    #[arg(long)]
    exact_cdf: bool,
}

impl ParamArgs {
    fn request(&self) -> CalibrationRequest {
        CalibrationRequest::new(self.eps, self.delta, self.beta, self.s, self.k, self.d)
            .with_sharing_privacy(self.eps_ss.unwrap_or(self.eps), self.delta_ss.unwrap_or(self.delta))
            .with_provers(self.n)
            .with_tau_mode(if self.exact_cdf { TauMode::ExactCdf } else { TauMode::TailBound })
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PatternArg {
    Random,
    Concentrated,
    Spread,
}

impl From<PatternArg> for MassPattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Random => MassPattern::Random,
            PatternArg::Concentrated => MassPattern::Concentrated,
            PatternArg::Spread => MassPattern::Spread,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WModeArg {
    Shared,
    Verifier0,
}

impl From<WModeArg> for WMode {
    fn from(w: WModeArg) -> Self {
        match w {
            WModeArg::Shared => WMode::Shared,
            WModeArg::Verifier0 => WMode::Verifier0,
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ProtocolAbort(_) => 3,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 1, msg: format!("{}: {e}", path.display()) }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("robustsum-out"), PathBuf::from)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_fail(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure { code: 2, msg: format!("{}: {e}", path.display()) })
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Calibrate { p, out } => {
            let report = calibrate(&p.request())?;
            for d in &report.derivation_log {
                println!("{:<18} {:>24}   {}", d.name, d.value, d.formula);
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                write_file(&path, text.as_bytes())?;
            }
            Ok(0)
        }
        Command::Share { x, d, norm, s, eps_ss, delta_ss, truncate, step, seed } => {
            let seed = Seed::from_u64(seed);
            let x = match x {
                Some(v) => RealVector::new(v)?,
                None => MassPattern::Random.vector(&mut seed.derive("input").rng(), d, norm),
            };
            let sigma_ss = robustsum::math::gaussian_sigma(eps_ss, delta_ss, 1.0)?;
            let mut bundle = share_vector(ClientId::new("cli"), &x, s, sigma_ss, seed.derive("shares"))?;
            if let Some(b) = truncate {
                bundle = bundle.truncated(&Truncation::new(b, step)?);
            }
            let err = reconstruct(&bundle)?.distance(&x)?;
            let shares: Vec<&[f64]> = bundle.shares().iter().map(RealVector::as_slice).collect();
            print_json(&json!({
                "sigma_ss": sigma_ss,
                "x": x.as_slice(),
                "shares": shares,
                "reconstruction_error": err,
            }));
            Ok(0)
        }
        Command::VerifyNorm { p, norm, pattern, w_mode, seed, transcript } => {
            let params = calibrate(&p.request())?.params;
            let master = Seed::from_u64(seed);
            let x = MassPattern::from(pattern).vector(&mut master.derive("input").rng(), p.d, norm);
            let bundle = share_vector(ClientId::new("prover"), &x, p.s, params.sigma_ss, master.derive("shares"))?;
            let (outcome, t) = run_norm_verification(&bundle, &params, master.derive("session"), w_mode.into())?;
            let path = transcript.unwrap_or_else(|| out_dir().join(format!("verify-norm-{seed}.ndjson")));
            write_file(&path, t.to_ndjson(false).as_bytes())?;
            print_json(&json!({
                "accept": outcome.accept,
                "v_norm": outcome.v_norm,
                "tau": outcome.tau,
                "rho": params.rho,
                "messages": t.len(),
                "transcript": path.display().to_string(),
                "transcript_sha256": t.hash_hex(),
            }));
            Ok(0)
        }
        Command::Aggregate { config, seed, transcript, payloads } => {
            let scenario = Scenario::from_toml_str(&read_file(&config)?)?;
            let params = scenario.calibrate()?.params;
            let (result, t) = run_scenario(&scenario, &params, Seed::from_u64(seed))?;
            let path = transcript.unwrap_or_else(|| out_dir().join(format!("aggregate-{seed}.ndjson")));
            write_file(&path, t.to_ndjson(payloads).as_bytes())?;
            let coalition: BTreeSet<PartyId> = scenario.coalition.iter().map(|&i| PartyId::Verifier(i)).collect();
            let view = view_of(&t, &coalition)?;
            print_json(&json!({
                "n": scenario.provers(),
                "eligible": result.eligible.len(),
                "accepted": result.accepted.len(),
                "aborted": result.aborted,
                "sum_norm": result.sum.as_ref().map(RealVector::norm),
                "rho": params.rho,
                "coalition": scenario.coalition,
                "coalition_view_messages": view.len(),
                "messages": t.len(),
                "transcript": path.display().to_string(),
                "transcript_sha256": t.hash_hex(),
            }));
            Ok(if result.aborted { 3 } else { 0 })
        }
        Command::Experiment { config, out } => {
            let grid = ExperimentGrid::from_toml_str(&read_file(&config)?)?;
            let rows = grid.run()?;
            let path = out
                .or_else(|| grid.output.as_ref().map(|o| out_dir().join(o)))
                .unwrap_or_else(|| out_dir().join("experiment.csv"));
            let mut buf = Vec::new();
            write_rows(&rows, &mut buf)?;
            write_file(&path, &buf)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            println!("{} rows ({passed} within bound) -> {}", rows.len(), path.display());
            Ok(0)
        }
        Command::Audit { quick, seed, out } => {
            let cfg = SuiteConfig { seed, ..if quick { SuiteConfig::quick() } else { SuiteConfig::default() } };
            let rows = run_suite(&cfg)?;
            let path = out.unwrap_or_else(|| out_dir().join("audit.csv"));
            write_file(&path, report::audit_csv(&rows)?.as_bytes())?;
            for r in &rows {
                println!("{:<24} {:<32} {:>12.6e} {:>12.6e} {:?}", r.check_id, r.parameters, r.statistic, r.threshold, r.verdict);
            }
            let failed = rows.iter().filter(|r| !r.passed()).count();
            println!("{} checks, {failed} failed -> {}", rows.len(), path.display());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
