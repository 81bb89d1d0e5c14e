//! Command-line front end: system ingestion, certification runs,
//! interconnection checks, simulation campaigns, and a one-shot
//! regeneration of the toolkit's reference numbers.
//!
//! Commands communicate through JSON. Descriptors and configs come in as
//! files; reports go to stdout wrapped in a [`RunReport`] envelope that
//! carries the command name, a digest of the exact inputs, the seed
//! registry, and the results with every tolerance spelled out. Output is
//! deterministic: maps serialize with sorted keys, floats in shortest
//! round-trip form, seeds live in the inputs, and wall-clock time goes
//! to stderr only — identical invocations produce byte-identical
//! reports.
//!
//! Exit codes: `0` every requested check passed; `1` at least one check
//! failed (unstable verdict, per-run simulation failure, reference row
//! out of tolerance); `2` inputs outside a command's domain (non-Hurwitz
//! plant, non-mixed crossover, failed interconnection hypotheses); `3`
//! usage errors (bad flags, unreadable files, schema violations).

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::extract::{choose_crossover, extract_mixed_lti, CertMethod, Crossover};
use crate::interconnect::{
    alpha_threshold, check_theorem2, homotopy_gain_bound, MIN_TAU_STEPS,
};
use crate::kyp::{
    fdi_check, random_problem, solve_kyp, KypOutcome, INITIAL_SIGMA, MAX_AP_ITERATIONS,
};
use crate::lti::{band_sup_gain, FreqBand, StateSpace, HURWITZ_MARGIN};
use crate::mat::{DMat, SymMat2};
use crate::simulate::{
    check_dichotomy, check_storage_inequalities, empirical_gain, simulate_feedback, simulate_lti,
    simulate_pwl, standard_suite, GainSample, InputSignal, PwlSystem, SignalKind, StorageConfig,
    DEFAULT_HORIZON, DEFAULT_STEP, MAX_STEP, SIGNAL_DECAY_TAIL,
};
use crate::supply::{
    classify_trajectory, default_classification_tol, Classification, SupplySpec, Verdict,
    DECAY_REL_TOL,
};

/// Every requested check passed.
pub const EXIT_PASS: i32 = 0;
/// At least one requested check failed.
pub const EXIT_CHECK_FAIL: i32 = 1;
/// Inputs were valid but outside the command's mathematical domain.
pub const EXIT_DOMAIN: i32 = 2;
/// Bad flags, unreadable files, or schema violations.
pub const EXIT_USAGE: i32 = 3;

/// Offset applied to the suite seed to derive the second exogenous
/// channel of feedback campaigns (the 64-bit golden-ratio constant, so
/// the two channels never collide for nearby user seeds).
const PARTNER_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// `Re G` floor used by the reproduction's crossover row; small enough
/// that the computed edge sits within 1e-4 of the exact realness
/// boundary.
const CROSSOVER_FLOOR: f64 = 1e-5;

/// Slopes of the saturating plant exercised by the reproduction suites.
const REPRO_ALPHAS: [f64; 3] = [0.1, 0.3, 0.4];
/// Inputs per slope in the reproduction suites.
const REPRO_PER_ALPHA: usize = 12;
/// Base seed for the reproduction suites.
const REPRO_BASE_SEED: u64 = 7;
/// Number of seeded problems in the reproduction's solver-vs-sweep
/// battery.
const REPRO_BATTERY_COUNT: u64 = 60;

/// Reference low-band gain certificate for the loop partner `G`.
const REFERENCE_GAMMA2: f64 = 1.51;

/// How a command can fail outside the pass/check-fail axis.
enum Failure {
    /// Bad flags, unreadable files, schema violations: exit 3.
    Usage(String),
    /// Valid inputs outside the command's domain: exit 2.
    Domain(String),
}

type CmdResult = Result<i32, Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "mixedgain",
    version,
    about = "Certification toolkit for mixed small-gain/passivity properties of SISO systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract and certify mixed supply parameters of an LTI system.
    Certify {
        /// System descriptor JSON file (LTI kind).
        #[arg(long)]
        system: PathBuf,
        /// Band crossover frequency in rad/s, > 0.
        #[arg(long, allow_negative_numbers = true)]
        omega_bar: f64,
        /// Additive slack on mu, gamma, and epsilon, >= 0.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        margin: f64,
        /// Certification path for each extracted quantity.
        #[arg(long, value_enum, default_value = "grid")]
        method: MethodArg,
    },
    /// Decide feedback-loop stability for a pair of supply specifications.
    Interconnect {
        /// Supply specification JSON for subsystem 1.
        #[arg(long)]
        spec1: PathBuf,
        /// Supply specification JSON for subsystem 2.
        #[arg(long)]
        spec2: PathBuf,
        /// Also build the explicit closed-loop gain bound on a homotopy
        /// grid with this many points (>= 11).
        #[arg(long)]
        gain_bound: Option<usize>,
    },
    /// Run a simulation campaign described by a config file.
    Simulate {
        /// Campaign configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the summary and trajectory CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the reference numbers and compare them row by row.
    Reproduce {
        /// Optional directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Grid,
    Kyp,
    Both,
}

impl From<MethodArg> for CertMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Grid => CertMethod::Grid,
            MethodArg::Kyp => CertMethod::Kyp,
            MethodArg::Both => CertMethod::Both,
        }
    }
}

/// Parse `std::env::args` and dispatch; returns the process exit code.
pub fn run() -> i32 {
    run_with_args(std::env::args().collect())
}

/// Dispatch on an explicit argument vector (first entry: program name).
pub fn run_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let requested = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if requested { EXIT_PASS } else { EXIT_USAGE };
        }
    };
    let outcome = match cli.command {
        Command::Certify { system, omega_bar, margin, method } => {
            cmd_certify(&system, omega_bar, margin, method.into())
        }
        Command::Interconnect { spec1, spec2, gain_bound } => {
            cmd_interconnect(&spec1, &spec2, gain_bound)
        }
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Reproduce { out } => cmd_reproduce(out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DOMAIN
        }
    }
}

/// On-disk system description. LTI systems carry `a` row-major (length
/// n^2) plus `b`, `c` (length n) and scalar `d`; the saturating plant
/// carries its left-half slope `alpha`. Uppercase matrix keys are
/// accepted on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemDescriptor {
    Lti {
        name: String,
        #[serde(alias = "A")]
        a: Vec<f64>,
        #[serde(alias = "B")]
        b: Vec<f64>,
        #[serde(alias = "C")]
        c: Vec<f64>,
        #[serde(alias = "D")]
        d: f64,
    },
    Pwl { name: String, alpha: f64 },
}

impl SystemDescriptor {
    pub fn name(&self) -> &str {
        match self {
            SystemDescriptor::Lti { name, .. } | SystemDescriptor::Pwl { name, .. } => name,
        }
    }

    /// Validate the stored matrices and build the state-space system.
    pub fn to_state_space(&self) -> Result<StateSpace, String> {
        match self {
            SystemDescriptor::Pwl { .. } => {
                Err("descriptor is the saturating plant, not an LTI system".into())
            }
            SystemDescriptor::Lti { a, b, c, d, .. } => {
                let n = b.len();
                if c.len() != n {
                    return Err(format!("B has length {n} but C has length {}", c.len()));
                }
                if a.len() != n * n {
                    return Err(format!(
                        "A has {} entries; expected n^2 = {} for n = {n}",
                        a.len(),
                        n * n
                    ));
                }
                if !a.iter().chain(b).chain(c).chain(std::iter::once(d)).all(|v| v.is_finite()) {
                    return Err("matrix entries must be finite".into());
                }
                Ok(StateSpace::new(DMat::from_row_major(n, n, a.clone()), b.clone(), c.clone(), *d))
            }
        }
    }

    /// Validate the slope and build the saturating plant.
    pub fn to_pwl(&self) -> Result<PwlSystem, String> {
        match self {
            SystemDescriptor::Lti { .. } => {
                Err("descriptor is an LTI system, not the saturating plant".into())
            }
            SystemDescriptor::Pwl { alpha, .. } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0) {
                    return Err(format!("alpha = {alpha} must lie in (0, 1)"));
                }
                Ok(PwlSystem::new(*alpha))
            }
        }
    }
}

/// Envelope for every command's JSON output. Wall time is measured and
/// reported on stderr but never serialized, so identical invocations
/// stay byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: &'static str,
    pub inputs_digest: String,
    pub seeds: Vec<u64>,
    pub results: serde_json::Value,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl RunReport {
    fn new(command: &str, digest: String, seeds: Vec<u64>, results: serde_json::Value) -> Self {
        RunReport {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs_digest: digest,
            seeds,
            results,
            wall_time_ms: 0.0,
        }
    }

    fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Report JSON to stdout, wall time to stderr.
    fn print(&self) {
        println!("{}", self.to_pretty());
        eprintln!("wall time: {:.1} ms", self.wall_time_ms);
    }
}

/// SHA-256 over labeled input parts, each delimited so that moving bytes
/// between parts changes the digest.
fn digest_inputs(parts: &[(&str, &str)]) -> String {
    let mut h = Sha256::new();
    for (label, text) in parts {
        h.update(label.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        h.update([0u8]);
    }
    let mut s = String::with_capacity(64);
    for byte in h.finalize() {
        write!(s, "{byte:02x}").expect("writing to a string cannot fail");
    }
    s
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Read and JSON-parse a file, returning the value and the raw text for
/// digesting.
fn parse_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    what: &str,
) -> Result<(T, String), Failure> {
    let text = read_file(path)?;
    let value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{what} {}: {e}", path.display())))?;
    Ok((value, text))
}

fn validate_supply(s: &SupplySpec, which: &str) -> Result<(), Failure> {
    let finite = |m: &SymMat2| m.a11.is_finite() && m.a12.is_finite() && m.a22.is_finite();
    if !(finite(&s.theta) && finite(&s.pi) && s.epsilon.is_finite()) {
        return Err(Failure::Usage(format!("{which}: supply entries must be finite")));
    }
    Ok(())
}

fn method_name(m: CertMethod) -> &'static str {
    match m {
        CertMethod::Grid => "grid",
        CertMethod::Kyp => "kyp",
        CertMethod::Both => "both",
    }
}

fn cmd_certify(path: &Path, omega_bar: f64, margin: f64, method: CertMethod) -> CmdResult {
    let started = Instant::now();
    if !(omega_bar.is_finite() && omega_bar > 0.0) {
        return Err(Failure::Usage(format!(
            "--omega-bar must be positive and finite, got {omega_bar}"
        )));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Failure::Usage(format!(
            "--margin must be nonnegative and finite, got {margin}"
        )));
    }
    let (descriptor, text): (SystemDescriptor, String) = parse_json(path, "system descriptor")?;
    if matches!(descriptor, SystemDescriptor::Pwl { .. }) {
        return Err(Failure::Domain("certify requires an LTI system descriptor".into()));
    }
    let sys = descriptor.to_state_space().map_err(Failure::Usage)?;
    let report =
        extract_mixed_lti(&sys, omega_bar, margin, method).map_err(|e| Failure::Domain(e.to_string()))?;
    let digest = digest_inputs(&[
        ("system", &text),
        ("omega_bar", &format!("{omega_bar:?}")),
        ("margin", &format!("{margin:?}")),
        ("method", method_name(method)),
    ]);
    let results = json!({
        "system": descriptor,
        "parameters": { "omega_bar": omega_bar, "margin": margin, "method_requested": method },
        "tolerances": {
            "hurwitz_margin": HURWITZ_MARGIN,
            "solver_max_iterations": MAX_AP_ITERATIONS,
            "solver_initial_sigma": INITIAL_SIGMA,
        },
        "report": report,
    });
    let mut envelope = RunReport::new("certify", digest, vec![], results);
    envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    envelope.print();
    Ok(EXIT_PASS)
}

fn cmd_interconnect(p1: &Path, p2: &Path, gain_bound: Option<usize>) -> CmdResult {
    let started = Instant::now();
    if let Some(n) = gain_bound {
        if n < MIN_TAU_STEPS {
            return Err(Failure::Usage(format!(
                "--gain-bound needs at least {MIN_TAU_STEPS} grid points, got {n}"
            )));
        }
    }
    let (spec1, text1): (SupplySpec, String) = parse_json(p1, "supply specification")?;
    let (spec2, text2): (SupplySpec, String) = parse_json(p2, "supply specification")?;
    validate_supply(&spec1, "spec1")?;
    validate_supply(&spec2, "spec2")?;
    let digest = digest_inputs(&[
        ("spec1", &text1),
        ("spec2", &text2),
        ("gain_bound", &format!("{gain_bound:?}")),
    ]);

    let mut verdict = check_theorem2(&spec1, &spec2);
    // Strict eigenvalue signs decide definiteness; no numerical slack.
    let tolerances = json!({ "pencil_definiteness_margin": 0.0 });

    if !verdict.hypotheses_ok {
        let failed = verdict.checks.failures().join(", ");
        let results = json!({ "verdict": verdict, "homotopy": null, "tolerances": tolerances });
        let mut envelope = RunReport::new("interconnect", digest, vec![], results);
        envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        envelope.print();
        return Err(Failure::Domain(format!("interconnection hypotheses failed: {failed}")));
    }

    let mut homotopy = None;
    if verdict.stable {
        if let Some(taus) = gain_bound {
            let witnesses = verdict.witnesses.expect("stable verdicts carry witnesses");
            match homotopy_gain_bound(&spec1, &spec2, witnesses, taus) {
                Ok(hb) => {
                    verdict.gain_bound = Some(hb.gamma_cl);
                    homotopy = Some(hb);
                }
                Err(e) => {
                    eprintln!("gain-bound construction failed: {e}");
                    let results =
                        json!({ "verdict": verdict, "homotopy": null, "tolerances": tolerances });
                    let mut envelope = RunReport::new("interconnect", digest, vec![], results);
                    envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
                    envelope.print();
                    return Ok(EXIT_CHECK_FAIL);
                }
            }
        }
    } else if gain_bound.is_some() {
        eprintln!("gain bound skipped: the verdict is unstable");
    }

    let stable = verdict.stable;
    let results = json!({ "verdict": verdict, "homotopy": homotopy, "tolerances": tolerances });
    let mut envelope = RunReport::new("interconnect", digest, vec![], results);
    envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    envelope.print();
    Ok(if stable { EXIT_PASS } else { EXIT_CHECK_FAIL })
}

/// Campaign configuration for `simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub name: String,
    pub system: SystemDescriptor,
    /// Optional LTI partner; when present the campaign runs the negative
    /// feedback loop and `system` must be the saturating plant.
    #[serde(default)]
    pub feedback_with: Option<SystemDescriptor>,
    pub suite: SuiteConfig,
    /// Integrator step, in (0, 0.1].
    pub step: f64,
    pub checks: Vec<CheckKind>,
    /// Supply specification for the `classify` check.
    #[serde(default)]
    pub spec: Option<SupplySpec>,
    /// Storage parameters for the `storage` and `dichotomy` checks.
    #[serde(default)]
    pub storage: Option<StorageParams>,
    /// Write one CSV per run (failing runs always get one).
    #[serde(default)]
    pub write_trajectories: bool,
}

/// Seeded input-suite parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub base_seed: u64,
    pub count: usize,
    /// Simulation horizon; at least 40 so every suite signal decays.
    pub horizon: f64,
}

/// Storage-function parameters accepted from configs (`k` is derived
/// from the plant's slope, never read from the file).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StorageParams {
    pub eps_s1: f64,
    pub delta: f64,
}

/// Verifiers a campaign can run per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Classify the trajectory against the supply specification.
    Classify,
    /// Pointwise storage-derivative inequalities (saturating plant only).
    Storage,
    /// Integral dichotomy check (saturating plant only).
    Dichotomy,
    /// Record output/input energies and the worst empirical gain.
    Gain,
}

/// Per-run outcome in the campaign summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub input: InputSignal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_input: Option<InputSignal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_worst_rel: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<crate::simulate::DichotomyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainSample>,
    pub failures: Vec<String>,
}

enum Plant {
    OpenPwl(PwlSystem),
    OpenLti(StateSpace),
    Feedback(PwlSystem, StateSpace),
}

/// Seeds embedded in a suite's seeded signal kinds, in suite order.
fn suite_seeds(suite: &[InputSignal]) -> Vec<u64> {
    suite
        .iter()
        .filter_map(|s| match s.kind {
            SignalKind::RandomBandlimited { seed, .. } => Some(seed),
            SignalKind::PiecewiseConst { seed } => Some(seed),
            _ => None,
        })
        .collect()
}

fn cmd_simulate(config_path: &Path, out: &Path) -> CmdResult {
    let started = Instant::now();
    let (cfg, text): (SimulateConfig, String) = parse_json(config_path, "campaign config")?;

    // Config validation: everything here is a usage error (exit 3).
    if cfg.suite.count == 0 {
        return Err(Failure::Usage("input suite is empty".into()));
    }
    if !(cfg.suite.horizon.is_finite() && cfg.suite.horizon >= 2.0 * SIGNAL_DECAY_TAIL) {
        return Err(Failure::Usage(format!(
            "suite horizon must be at least {} so every signal decays, got {}",
            2.0 * SIGNAL_DECAY_TAIL,
            cfg.suite.horizon
        )));
    }
    if !(cfg.step.is_finite() && cfg.step > 0.0 && cfg.step <= MAX_STEP) {
        return Err(Failure::Usage(format!(
            "step must lie in (0, {MAX_STEP}], got {}",
            cfg.step
        )));
    }
    let plant = match (&cfg.system, &cfg.feedback_with) {
        (SystemDescriptor::Pwl { .. }, Some(partner)) => {
            let pwl = cfg.system.to_pwl().map_err(Failure::Usage)?;
            if matches!(partner, SystemDescriptor::Pwl { .. }) {
                return Err(Failure::Usage("feedback partner must be an LTI descriptor".into()));
            }
            let lti = partner.to_state_space().map_err(Failure::Usage)?;
            Plant::Feedback(pwl, lti)
        }
        (SystemDescriptor::Lti { .. }, Some(_)) => {
            return Err(Failure::Usage(
                "feedback campaigns need the saturating plant as the primary system".into(),
            ));
        }
        (SystemDescriptor::Pwl { .. }, None) => {
            Plant::OpenPwl(cfg.system.to_pwl().map_err(Failure::Usage)?)
        }
        (SystemDescriptor::Lti { .. }, None) => {
            Plant::OpenLti(cfg.system.to_state_space().map_err(Failure::Usage)?)
        }
    };
    let spec = if cfg.checks.contains(&CheckKind::Classify) {
        let s = cfg
            .spec
            .ok_or_else(|| Failure::Usage("classify check needs the `spec` block".into()))?;
        validate_supply(&s, "spec")?;
        Some(s)
    } else {
        None
    };
    let needs_storage =
        cfg.checks.iter().any(|c| matches!(c, CheckKind::Storage | CheckKind::Dichotomy));
    let storage_cfg = if needs_storage {
        let params = cfg
            .storage
            .ok_or_else(|| Failure::Usage("storage/dichotomy checks need the `storage` block".into()))?;
        let pwl = match &plant {
            Plant::OpenPwl(p) | Plant::Feedback(p, _) => *p,
            Plant::OpenLti(_) => {
                return Err(Failure::Usage(
                    "storage checks apply to the saturating plant only".into(),
                ));
            }
        };
        Some(
            StorageConfig::new(&pwl, params.eps_s1, params.delta)
                .map_err(|e| Failure::Usage(e.to_string()))?,
        )
    } else {
        None
    };
    fs::create_dir_all(out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;

    // Deterministic suites; the feedback partner channel gets an offset
    // seed so the two channels are independent but reproducible.
    let suite = standard_suite(cfg.suite.base_seed, cfg.suite.count, cfg.suite.horizon);
    let partner_suite = match &plant {
        Plant::Feedback(..) => Some(standard_suite(
            cfg.suite.base_seed.wrapping_add(PARTNER_SEED_OFFSET),
            cfg.suite.count,
            cfg.suite.horizon,
        )),
        _ => None,
    };

    let mut records: Vec<RunRecord> = Vec::with_capacity(suite.len());
    let mut gain_samples: Vec<GainSample> = Vec::new();
    for (i, input) in suite.iter().enumerate() {
        let partner_input = partner_suite.as_ref().map(|s| s[i]);
        let mut rec = RunRecord {
            index: i,
            input: *input,
            partner_input,
            classification: None,
            storage_worst_rel: None,
            dichotomy: None,
            gain: None,
            failures: Vec::new(),
        };
        let sim = match &plant {
            Plant::OpenPwl(p) => simulate_pwl(p, input, cfg.step).map(|t| (t, None)),
            Plant::OpenLti(s) => simulate_lti(s, input, cfg.step).map(|t| (t, None)),
            Plant::Feedback(p, s) => {
                let w2 = partner_input.expect("feedback campaigns carry a partner suite");
                simulate_feedback(p, s, input, &w2, cfg.step).map(|(t1, t2)| (t1, Some(t2)))
            }
        };
        let (traj, partner_traj) = match sim {
            Ok(pair) => pair,
            Err(e) => {
                rec.failures.push(format!("simulation failed: {e}"));
                records.push(rec);
                continue;
            }
        };
        for check in &cfg.checks {
            match check {
                CheckKind::Classify => {
                    let s = spec.as_ref().expect("validated above");
                    match classify_trajectory(&traj, s, default_classification_tol(&traj)) {
                        Ok(c) => {
                            if c.verdict == Verdict::Neither {
                                rec.failures.push("classification: neither branch holds".into());
                            }
                            rec.classification = Some(c);
                        }
                        Err(e) => rec.failures.push(format!("classification failed: {e}")),
                    }
                }
                CheckKind::Storage => {
                    let pwl = match &plant {
                        Plant::OpenPwl(p) | Plant::Feedback(p, _) => p,
                        Plant::OpenLti(_) => unreachable!("validated above"),
                    };
                    let sc = storage_cfg.as_ref().expect("validated above");
                    match check_storage_inequalities(&traj, pwl, sc) {
                        Ok(m) => {
                            if !m.all_nonnegative() {
                                rec.failures.push(format!(
                                    "storage margin below floor: {:?}",
                                    m.worst_rel
                                ));
                            }
                            rec.storage_worst_rel = Some(m.worst_rel);
                        }
                        Err(e) => rec.failures.push(format!("storage check failed: {e}")),
                    }
                }
                CheckKind::Dichotomy => {
                    let pwl = match &plant {
                        Plant::OpenPwl(p) | Plant::Feedback(p, _) => p,
                        Plant::OpenLti(_) => unreachable!("validated above"),
                    };
                    let sc = storage_cfg.as_ref().expect("validated above");
                    match check_dichotomy(&traj, pwl, sc) {
                        Ok(d) => {
                            if !(d.dichotomy_ok && d.chain_ok) {
                                rec.failures.push(format!(
                                    "dichotomy failed: int U = {}, int V = {}",
                                    d.int_u, d.int_v
                                ));
                            }
                            rec.dichotomy = Some(d);
                        }
                        Err(e) => rec.failures.push(format!("dichotomy check failed: {e}")),
                    }
                }
                CheckKind::Gain => {
                    let sample = match (&partner_traj, partner_input) {
                        (Some(t2), Some(w2)) => GainSample::from_feedback(&traj, t2, input, &w2),
                        _ => GainSample::from_open_loop(&traj),
                    };
                    rec.gain = Some(sample);
                    gain_samples.push(sample);
                }
            }
        }
        if cfg.write_trajectories || !rec.failures.is_empty() {
            let path = out.join(format!("run_{i:03}.csv"));
            fs::write(&path, traj.to_csv())
                .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            if let Some(t2) = &partner_traj {
                let path = out.join(format!("run_{i:03}_partner.csv"));
                fs::write(&path, t2.to_csv())
                    .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
        }
        records.push(rec);
    }

    let failed = records.iter().filter(|r| !r.failures.is_empty()).count();
    let empirical = if !gain_samples.is_empty()
        && gain_samples.iter().all(|s| s.input_energy > 0.0)
    {
        Some(empirical_gain(&gain_samples))
    } else {
        None
    };
    let mut seeds = vec![cfg.suite.base_seed];
    seeds.extend(suite_seeds(&suite));
    if let Some(ps) = &partner_suite {
        seeds.push(cfg.suite.base_seed.wrapping_add(PARTNER_SEED_OFFSET));
        seeds.extend(suite_seeds(ps));
    }
    let digest = digest_inputs(&[("config", &text)]);
    let results = json!({
        "config": cfg,
        "runs": records,
        "runs_failed": failed,
        "empirical_gain": empirical,
        "tolerances": {
            "decay_rel_tol": DECAY_REL_TOL,
            "storage_rel_floor": -1e-9,
            "classification_tol": "1e-6 * (1 + input_energy)",
        },
    });
    let mut envelope = RunReport::new("simulate", digest, seeds, results);
    envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    let text = envelope.to_pretty();
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, format!("{text}\n"))
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", summary_path.display())))?;
    envelope.print();
    Ok(if failed == 0 { EXIT_PASS } else { EXIT_CHECK_FAIL })
}

/// One computed-vs-reference comparison in the reproduction table.
#[derive(Debug, Clone, Serialize)]
pub struct ReproRow {
    pub name: String,
    pub computed: String,
    pub reference: String,
    pub tolerance: String,
    pub pass: bool,
    pub note: String,
}

impl ReproRow {
    fn new(
        name: &str,
        computed: String,
        reference: &str,
        tolerance: &str,
        pass: bool,
        note: &str,
    ) -> Self {
        ReproRow {
            name: name.into(),
            computed,
            reference: reference.into(),
            tolerance: tolerance.into(),
            pass,
            note: note.into(),
        }
    }
}

/// The loop partner `G(s) = 3 / ((s + 1)(s + 2))` in controllable
/// canonical form.
fn reference_plant() -> StateSpace {
    StateSpace::new(
        DMat::from_row_major(2, 2, vec![0.0, 1.0, -2.0, -3.0]),
        vec![0.0, 1.0],
        vec![3.0, 0.0],
        0.0,
    )
}

/// Reference supply pair for the loop partner: gain 0.7 above the
/// crossover, gain 1.51 with input-strict passivity shift -0.001 below.
fn reference_spec2() -> SupplySpec {
    SupplySpec::new(SymMat2::diag(0.49, -1.0), SymMat2::diag(2.2801, -1.0), -0.001)
}

/// Supply pair certified for the saturating plant: gain branch
/// `[[alpha, delta/2], [delta/2, -1]]`, passivity branch `diag(1, -1)`
/// with shift zero.
fn saturating_spec(alpha: f64, delta: f64) -> SupplySpec {
    SupplySpec::new(
        SymMat2::new(alpha, delta / 2.0, -1.0),
        SymMat2::diag(1.0, -1.0),
        0.0,
    )
}

struct SuiteOutcome {
    runs: usize,
    neither: usize,
    worst_storage_rel: f64,
    dichotomy_failures: usize,
    errors: Vec<String>,
}

/// Simulate the saturating plant across slopes and inputs, running all
/// three verifiers on every trajectory.
fn pwl_reference_suite(alphas: &[f64], per_alpha: usize, base_seed: u64) -> SuiteOutcome {
    let mut outcome = SuiteOutcome {
        runs: 0,
        neither: 0,
        worst_storage_rel: f64::INFINITY,
        dichotomy_failures: 0,
        errors: Vec::new(),
    };
    for (ai, &alpha) in alphas.iter().enumerate() {
        let sys = PwlSystem::new(alpha);
        let spec = saturating_spec(alpha, 0.0);
        let cfg = StorageConfig::new(&sys, 0.5, 0.0).expect("storage parameters are valid");
        let suite = standard_suite(base_seed + 100 * ai as u64, per_alpha, DEFAULT_HORIZON);
        for input in &suite {
            outcome.runs += 1;
            let traj = match simulate_pwl(&sys, input, DEFAULT_STEP) {
                Ok(t) => t,
                Err(e) => {
                    outcome.errors.push(format!("simulation failed: {e}"));
                    continue;
                }
            };
            match classify_trajectory(&traj, &spec, default_classification_tol(&traj)) {
                Ok(c) if c.verdict == Verdict::Neither => outcome.neither += 1,
                Ok(_) => {}
                Err(e) => outcome.errors.push(format!("classification failed: {e}")),
            }
            match check_storage_inequalities(&traj, &sys, &cfg) {
                Ok(m) => {
                    for rel in m.worst_rel {
                        outcome.worst_storage_rel = outcome.worst_storage_rel.min(rel);
                    }
                }
                Err(e) => outcome.errors.push(format!("storage check failed: {e}")),
            }
            match check_dichotomy(&traj, &sys, &cfg) {
                Ok(d) if !(d.dichotomy_ok && d.chain_ok) => outcome.dichotomy_failures += 1,
                Ok(_) => {}
                Err(e) => outcome.errors.push(format!("dichotomy check failed: {e}")),
            }
        }
    }
    outcome
}

struct BatteryOutcome {
    total: u64,
    disagree: usize,
    verify_fail: usize,
    unknown: usize,
}

impl BatteryOutcome {
    fn unknown_rate(&self) -> f64 {
        self.unknown as f64 / self.total as f64
    }
}

/// Run the LMI solver against the frequency sweep on seeded problems.
fn run_battery(count: u64) -> BatteryOutcome {
    let mut out = BatteryOutcome { total: count, disagree: 0, verify_fail: 0, unknown: 0 };
    for seed in 0..count {
        let prob = random_problem(seed);
        let fdi = fdi_check(&prob).expect("battery plants sweep cleanly");
        match solve_kyp(&prob) {
            KypOutcome::Feasible(cert) => {
                if !cert.verify(&prob).unwrap_or(false) {
                    out.verify_fail += 1;
                }
                if !fdi.holds {
                    out.disagree += 1;
                }
            }
            KypOutcome::Unknown { .. } => out.unknown += 1,
        }
    }
    out
}

fn cmd_reproduce(out: Option<&Path>) -> CmdResult {
    let started = Instant::now();
    let plant = reference_plant();
    let spec2 = reference_spec2();
    let mut rows: Vec<ReproRow> = Vec::new();

    // Band extrema at the sqrt(2) crossover.
    let low = band_sup_gain(&plant, &FreqBand::low(SQRT_2)).expect("reference plant sweeps cleanly");
    rows.push(ReproRow::new(
        "low-band sup |G| on [0, sqrt(2)]",
        format!("{low:.10}"),
        "1.51",
        "|computed - 1.500| <= 1e-3",
        (low - 1.5).abs() <= 1e-3,
        "reference value is a rounded-up gain certificate",
    ));
    let high =
        band_sup_gain(&plant, &FreqBand::high(SQRT_2)).expect("reference plant sweeps cleanly");
    rows.push(ReproRow::new(
        "high-band sup |G| on [sqrt(2), inf)",
        format!("{high:.10}"),
        "0.7",
        "|computed - 0.7071| <= 1e-3",
        (high - 0.7071).abs() <= 1e-3,
        "reference rounds at a slightly wider band edge",
    ));

    // Realness crossover.
    let crossover = choose_crossover(&plant, CROSSOVER_FLOOR)
        .expect("reference plant is Hurwitz and passive at DC");
    let (cross_text, cross_pass) = match crossover {
        Crossover::Finite { omega_bar } => {
            (format!("{omega_bar:.10}"), (omega_bar - SQRT_2).abs() <= 1e-4)
        }
        Crossover::Unbounded => ("unbounded".into(), false),
    };
    rows.push(ReproRow::new(
        "realness crossover (Re G floor 1e-5)",
        cross_text,
        "sqrt(2) ~ 1.4142135624",
        "|computed - sqrt(2)| <= 1e-4",
        cross_pass,
        "",
    ));

    // Feasibility threshold of the saturating plant's slope.
    let t0 = alpha_threshold(0.0, &spec2);
    rows.push(ReproRow::new(
        "slope threshold alpha* at delta = 0",
        format!("{t0:.7}"),
        "0.43",
        "|computed - 0.4386| <= 1e-3",
        (t0 - 0.4386).abs() <= 1e-3,
        "reference rounds down: every alpha < 0.43 is certified",
    ));
    let t05 = alpha_threshold(0.05, &spec2);
    let t10 = alpha_threshold(0.10, &spec2);
    rows.push(ReproRow::new(
        "threshold decreases in the coupling delta",
        format!("{t0:.6} > {t05:.6} > {t10:.6}"),
        "strictly decreasing",
        "strict inequalities",
        t0 > t05 && t05 > t10,
        "",
    ));

    // The pure gain product cannot close the loop; the mixed test can.
    let stable = check_theorem2(&saturating_spec(0.3, 0.0), &spec2).stable;
    let product = 1.0 * REFERENCE_GAMMA2;
    rows.push(ReproRow::new(
        "small-gain product gamma1 * gamma2",
        format!("{product:.2}, mixed verdict stable = {stable}"),
        ">= 1 (inconclusive) while the mixed test certifies",
        "product >= 1 and a stable verdict",
        product >= 1.0 && stable,
        "subsystem 1 has unit gain, so the product equals gamma2",
    ));

    // Simulation suites on the saturating plant.
    let suite = pwl_reference_suite(&REPRO_ALPHAS, REPRO_PER_ALPHA, REPRO_BASE_SEED);
    for err in &suite.errors {
        eprintln!("suite error: {err}");
    }
    rows.push(ReproRow::new(
        "classification coverage (3 slopes x 12 inputs)",
        format!("{} uncovered of {} runs", suite.neither, suite.runs),
        "0 uncovered",
        "every input satisfies a branch",
        suite.neither == 0 && suite.errors.is_empty(),
        "",
    ));
    rows.push(ReproRow::new(
        "storage-inequality worst relative margin",
        format!("{:.3e}", suite.worst_storage_rel),
        ">= -1e-9",
        "relative to each sample's scale",
        suite.worst_storage_rel >= -1e-9 && suite.errors.is_empty(),
        "",
    ));
    rows.push(ReproRow::new(
        "integral dichotomy",
        format!("{} failures of {} runs", suite.dichotomy_failures, suite.runs),
        "0 failures",
        "int U <= tol or int V <= tol per run",
        suite.dichotomy_failures == 0 && suite.errors.is_empty(),
        "",
    ));

    // Solver-vs-sweep battery.
    let battery = run_battery(REPRO_BATTERY_COUNT);
    rows.push(ReproRow::new(
        "LMI feasible while the frequency sweep fails",
        format!("{} of {}", battery.disagree, battery.total),
        "0 disagreements",
        "exact count",
        battery.disagree == 0 && battery.verify_fail == 0,
        "every returned certificate re-verified by eigenvalue check",
    ));
    rows.push(ReproRow::new(
        "LMI unknown rate",
        format!("{:.1}%", 100.0 * battery.unknown_rate()),
        "< 20%",
        "fraction of the battery",
        battery.unknown_rate() < 0.2,
        "",
    ));

    // Table on stdout, one row per line.
    for row in &rows {
        let badge = if row.pass { "PASS" } else { "FAIL" };
        println!(
            "[{badge}] {:<46} computed {:<34} expected {} ({})",
            row.name, row.computed, row.reference, row.tolerance
        );
        if !row.note.is_empty() {
            println!("       {}", row.note);
        }
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} of {} rows passed", rows.len() - failed, rows.len());

    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        let mut seeds: Vec<u64> =
            (0..REPRO_ALPHAS.len()).map(|ai| REPRO_BASE_SEED + 100 * ai as u64).collect();
        seeds.extend(0..REPRO_BATTERY_COUNT);
        let digest = digest_inputs(&[(
            "parameters",
            &format!(
                "alphas={REPRO_ALPHAS:?};per_alpha={REPRO_PER_ALPHA};base={REPRO_BASE_SEED};\
                 battery={REPRO_BATTERY_COUNT};floor={CROSSOVER_FLOOR:?}"
            ),
        )]);
        let results = json!({
            "rows": rows,
            "rows_failed": failed,
            "parameters": {
                "suite_alphas": REPRO_ALPHAS,
                "suite_per_alpha": REPRO_PER_ALPHA,
                "suite_base_seed": REPRO_BASE_SEED,
                "battery_count": REPRO_BATTERY_COUNT,
                "crossover_floor": CROSSOVER_FLOOR,
                "step": DEFAULT_STEP,
                "horizon": DEFAULT_HORIZON,
            },
        });
        let mut envelope = RunReport::new("reproduce", digest, seeds, results);
        envelope.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        let text = envelope.to_pretty();
        let path = dir.join("reproduce.json");
        fs::write(&path, format!("{text}\n"))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    eprintln!("wall time: {:.1} ms", started.elapsed().as_secs_f64() * 1e3);
    Ok(if failed == 0 { EXIT_PASS } else { EXIT_CHECK_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lti_json() -> String {
        json!({
            "kind": "lti", "name": "demo",
            "a": [0.0, 1.0, -2.0, -3.0], "b": [0.0, 1.0], "c": [3.0, 0.0], "d": 0.0,
        })
        .to_string()
    }

    fn run(args: &[&str]) -> i32 {
        let mut argv = vec!["mixedgain".to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        run_with_args(argv)
    }

    #[test]
    fn descriptor_roundtrip_and_aliases() {
        let d: SystemDescriptor = serde_json::from_str(&lti_json()).unwrap();
        let sys = d.to_state_space().unwrap();
        assert_eq!(sys.n(), 2);
        assert_eq!(d.name(), "demo");
        let upper = r#"{"kind":"lti","name":"demo","A":[0.0,1.0,-2.0,-3.0],
                        "B":[0.0,1.0],"C":[3.0,0.0],"D":0.0}"#;
        let d2: SystemDescriptor = serde_json::from_str(upper).unwrap();
        assert_eq!(d, d2);
        let text = serde_json::to_string(&d).unwrap();
        assert!(text.contains("\"kind\":\"lti\""));
        let back: SystemDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn descriptor_validation_rejects_bad_shapes() {
        let short_a = SystemDescriptor::Lti {
            name: "bad".into(),
            a: vec![1.0, 2.0, 3.0],
            b: vec![0.0, 1.0],
            c: vec![1.0, 0.0],
            d: 0.0,
        };
        assert!(short_a.to_state_space().is_err());
        assert!(short_a.to_pwl().is_err());
        let bad_slope = SystemDescriptor::Pwl { name: "bad".into(), alpha: 1.2 };
        assert!(bad_slope.to_pwl().is_err());
        let nan = SystemDescriptor::Lti {
            name: "nan".into(),
            a: vec![f64::NAN],
            b: vec![1.0],
            c: vec![1.0],
            d: 0.0,
        };
        assert!(nan.to_state_space().is_err());
    }

    #[test]
    fn digest_separates_parts_and_is_stable() {
        let a = digest_inputs(&[("x", "ab"), ("y", "c")]);
        let b = digest_inputs(&[("x", "a"), ("y", "bc")]);
        assert_ne!(a, b);
        assert_eq!(a, digest_inputs(&[("x", "ab"), ("y", "c")]));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn certify_command_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let sys_path = dir.path().join("sys.json");
        fs::write(&sys_path, lti_json()).unwrap();
        let sys = sys_path.to_str().unwrap();
        // Healthy extraction inside the passive band.
        assert_eq!(run(&["certify", "--system", sys, "--omega-bar", "1.4"]), EXIT_PASS);
        // A crossover past sqrt(2) puts the realness floor below zero.
        assert_eq!(run(&["certify", "--system", sys, "--omega-bar", "1.5"]), EXIT_DOMAIN);
        // Unstable plant.
        let unstable = dir.path().join("unstable.json");
        fs::write(
            &unstable,
            json!({"kind": "lti", "name": "u", "a": [1.0], "b": [1.0], "c": [1.0], "d": 0.0})
                .to_string(),
        )
        .unwrap();
        assert_eq!(
            run(&["certify", "--system", unstable.to_str().unwrap(), "--omega-bar", "1.0"]),
            EXIT_DOMAIN
        );
        // The saturating plant is outside certify's domain.
        let pwl = dir.path().join("pwl.json");
        fs::write(&pwl, r#"{"kind":"pwl","name":"sat","alpha":0.3}"#).unwrap();
        assert_eq!(
            run(&["certify", "--system", pwl.to_str().unwrap(), "--omega-bar", "1.0"]),
            EXIT_DOMAIN
        );
        // Missing files, bad flags, and bad parameters are usage errors.
        assert_eq!(
            run(&["certify", "--system", "/nonexistent.json", "--omega-bar", "1.0"]),
            EXIT_USAGE
        );
        assert_eq!(run(&["certify", "--no-such-flag"]), EXIT_USAGE);
        assert_eq!(run(&["certify", "--system", sys, "--omega-bar", "-2.0"]), EXIT_USAGE);
    }

    #[test]
    fn interconnect_command_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let write_spec = |name: &str, s: &SupplySpec| -> String {
            let p = dir.path().join(name);
            fs::write(&p, serde_json::to_string(s).unwrap()).unwrap();
            p.to_str().unwrap().to_string()
        };
        let ok1 = write_spec("s1.json", &saturating_spec(0.3, 0.0));
        let past_threshold = write_spec("s1bad.json", &saturating_spec(0.5, 0.0));
        let s2 = write_spec("s2.json", &reference_spec2());
        // epsilon2 = 0 violates the strictness hypothesis.
        let gate = write_spec(
            "gate.json",
            &SupplySpec::new(SymMat2::diag(0.49, -1.0), SymMat2::diag(2.2801, -1.0), 0.0),
        );
        let go = |a: &str, b: &str| run(&["interconnect", "--spec1", a, "--spec2", b]);
        assert_eq!(go(&ok1, &s2), EXIT_PASS);
        assert_eq!(go(&past_threshold, &s2), EXIT_CHECK_FAIL);
        assert_eq!(go(&ok1, &gate), EXIT_DOMAIN);
        // Too few homotopy points is a usage error.
        assert_eq!(
            run(&["interconnect", "--spec1", &ok1, "--spec2", &s2, "--gain-bound", "3"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn simulate_command_validates_config() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = dir.path().join("c.json");
        let base = json!({
            "name": "smoke",
            "system": {"kind": "pwl", "name": "sat", "alpha": 0.3},
            "suite": {"base_seed": 5, "count": 2, "horizon": 40.0},
            "step": 0.01,
            "checks": ["classify", "storage", "dichotomy", "gain"],
            "spec": saturating_spec(0.3, 0.0),
            "storage": {"eps_s1": 0.5, "delta": 0.0},
        });
        fs::write(&config, base.to_string()).unwrap();
        let go = |c: &Path, o: &Path| {
            run(&["simulate", "--config", c.to_str().unwrap(), "--out", o.to_str().unwrap()])
        };
        assert_eq!(go(&config, &out), EXIT_PASS);
        assert!(out.join("summary.json").exists());
        // Empty suite is a config error.
        let mut bad = base.clone();
        bad["suite"]["count"] = 0.into();
        fs::write(&config, bad.to_string()).unwrap();
        assert_eq!(go(&config, &out), EXIT_USAGE);
        // Storage checks need the saturating plant.
        let mut bad = base.clone();
        bad["system"] = serde_json::from_str(&lti_json()).unwrap();
        fs::write(&config, bad.to_string()).unwrap();
        assert_eq!(go(&config, &out), EXIT_USAGE);
        // Horizons too short for the suite signals are rejected up front.
        let mut bad = base;
        bad["suite"]["horizon"] = 30.0.into();
        fs::write(&config, bad.to_string()).unwrap();
        assert_eq!(go(&config, &out), EXIT_USAGE);
    }
}
