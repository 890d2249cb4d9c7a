//! Command-line front end: code verification, single-shot decoding, fault
//! scans, memory experiments, decay fitting, and decoder benchmarking.
//!
//! Exit codes: 0 success, 1 check failure (a verification, scan, or assertion
//! found a problem), 2 usage or configuration error.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use dfsqec::codes::{self, verify_code, verify_concatenation, CheckResult, CodeSpec};
use dfsqec::config::{ConfigMap, Manifest, RunConfig, RunSummary, SeriesHandoff};
use dfsqec::experiments::{run_memory, QubitKind};
use dfsqec::fit::{
    crossing_time, fit, fit_counts, improvement_factor, DecayModel, FitData, FitOutcome,
    LifetimeReport, ModelKind, RatePinning, INTEGRITY_FLOOR, PROCESS_FIDELITY_FLOOR,
};
use dfsqec::ft::cycle::CycleDriver;
use dfsqec::ft::decoder::{DecodeMode, SyndromeRecord};
use dfsqec::ft::encode::LogicalState;
use dfsqec::ft::scan::{deflagged_circuits, FaultScan};

#[derive(Parser)]
#[command(
    name = "dfsqec",
    version,
    about = "Simulator, fault-tolerance verifier, and real-time decoder \
             for the ten-qubit pair-concatenated code"
)]
struct Cli {
    /// Config file: one `key = value` per line, `#` comments.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config value (repeatable), e.g. --set shots=5000.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Random seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for output files (CSV, JSON, manifest).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; defaults to available parallelism. Results are
    /// identical at any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inspect and verify the code definitions.
    Codes {
        #[command(subcommand)]
        cmd: CodesCmd,
    },
    /// Decode syndrome records: one from the command line, or a CSV batch.
    Decode {
        /// Record text, e.g.: r=10000 s=1001  (optionally flags=110 round=1)
        record: Vec<String>,
        /// Decoder disposition for marginal records.
        #[arg(long, value_enum, default_value_t = ModeArg::Correct)]
        mode: ModeArg,
        /// CSV file with columns r,s[,flags[,round]]; streams decoded rows.
        #[arg(long, value_name = "FILE")]
        batch: Option<PathBuf>,
    },
    /// Exhaustively inject single faults across the QEC cycle and check the
    /// fault-tolerance conditions.
    FaultScan {
        /// Negative control: strip the flag qubits first (violations are
        /// then expected, and the scan exits nonzero).
        #[arg(long)]
        deflagged: bool,
    },
    /// Run the memory experiment described by the config.
    Run,
    /// Fit decay models to one or more run summaries and report lifetimes.
    Fit {
        /// summary.json files produced by `run`.
        #[arg(required = true, value_name = "SUMMARY.JSON")]
        inputs: Vec<PathBuf>,
        /// Lifetime search horizon in seconds.
        #[arg(long, default_value_t = 3600.0)]
        horizon: f64,
    },
    /// Time the decoder on uniformly random syndrome records.
    BenchDecoder {
        /// Number of records.
        #[arg(short, long, default_value_t = 1_000_000)]
        n: u64,
        /// Exit nonzero if the median latency exceeds this many microseconds.
        #[arg(long, value_name = "US")]
        max_median_us: Option<f64>,
    },
}

#[derive(Subcommand)]
enum CodesCmd {
    /// Print each code's definition and run the full verification suite.
    Verify {
        /// 211 (the pair code), 513 (the inner code), or 1014 (the
        /// concatenated code); verifies all three when omitted.
        name: Option<String>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Correct,
    PostSelect,
}

impl From<ModeArg> for DecodeMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Correct => DecodeMode::Correct,
            ModeArg::PostSelect => DecodeMode::PostSelect,
        }
    }
}

/// A failed command: how it failed decides the exit code.
enum Failure {
    /// A verification or assertion did not hold (exit 1).
    Check(String),
    /// Bad usage or configuration (exit 2).
    Usage(String),
    /// The run itself failed: I/O, engine, or fit errors (exit 1).
    Run(String),
}

impl Failure {
    fn run(e: impl std::fmt::Display) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<dfsqec::config::ConfigError> for Failure {
    fn from(e: dfsqec::config::ConfigError) -> Self {
        match e {
            dfsqec::config::ConfigError::Io(e) => Failure::Run(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match &cli.cmd {
        Cmd::Codes { cmd: CodesCmd::Verify { name } } => cmd_codes_verify(&cli, name.as_deref()),
        Cmd::Decode { record, mode, batch } => {
            cmd_decode(&cli, record, (*mode).into(), batch.as_deref())
        }
        Cmd::FaultScan { deflagged } => cmd_fault_scan(&cli, *deflagged),
        Cmd::Run => cmd_run(&cli),
        Cmd::Fit { inputs, horizon } => cmd_fit(&cli, inputs, *horizon),
        Cmd::BenchDecoder { n, max_median_us } => cmd_bench(&cli, *n, *max_median_us),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// The output directory, created on first use.
fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Write the reproducibility manifest for a subcommand into `dir`.
fn write_manifest(
    dir: &Path,
    subcommand: &str,
    config: &ConfigMap,
    seed: u64,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let manifest = Manifest::new(subcommand, config, seed, workers);
    write_file(dir, "manifest.json", &manifest.to_json())?;
    Ok(())
}

/// A synthetic config map for subcommands whose parameters come from flags.
fn flags_map(pairs: &[(&str, String)]) -> ConfigMap {
    let mut map = ConfigMap::default();
    for (k, v) in pairs {
        map.insert(k, v.clone());
    }
    map
}

// ---------------------------------------------------------------------------
// codes verify
// ---------------------------------------------------------------------------

fn code_by_name(name: &str) -> Option<CodeSpec> {
    match name {
        "211" | "dfs" => Some(codes::build_dfs()),
        "513" => Some(codes::build_513()),
        "1014" | "full" => Some(codes::build_1014()),
        _ => None,
    }
}

fn print_code_document(code: &CodeSpec) {
    println!(
        "code {} ({} qubits, {} logical, declared distance {})",
        code.name, code.n, code.k, code.d
    );
    println!("  generators:");
    for (i, g) in code.generators.iter().enumerate() {
        println!("    g{i} = {g}");
    }
    println!("  logical X = {}", code.logical_x);
    println!("  logical Y = {}", code.logical_y);
    println!("  logical Z = {}", code.logical_z);
}

fn print_checks(checks: &[CheckResult]) -> bool {
    let mut all = true;
    for c in checks {
        let verdict = if c.passed { "ok" } else { "FAIL" };
        println!("  check {:<28} {} ({})", c.name, verdict, c.detail);
        all &= c.passed;
    }
    all
}

fn cmd_codes_verify(cli: &Cli, name: Option<&str>) -> Result<(), Failure> {
    let targets: Vec<CodeSpec> = match name {
        Some(n) => vec![code_by_name(n).ok_or_else(|| {
            Failure::Usage(format!("unknown code {n:?}; expected 211, 513, or 1014"))
        })?],
        None => vec![codes::build_dfs(), codes::build_513(), codes::build_1014()],
    };

    #[derive(Serialize)]
    struct VerifyDocument {
        report: dfsqec::codes::VerifyReport,
        concatenation: Vec<CheckResult>,
    }

    let started = Instant::now();
    let mut documents = Vec::new();
    let mut all_passed = true;
    for code in &targets {
        print_code_document(code);
        let report = verify_code(code).map_err(Failure::run)?;
        all_passed &= print_checks(&report.checks);
        let concat = if code.n == 10 {
            let checks = verify_concatenation(code).map_err(Failure::run)?;
            all_passed &= print_checks(&checks);
            checks
        } else {
            Vec::new()
        };
        println!(
            "  distance: declared {}, computed {}",
            report.distance_declared, report.distance_computed
        );
        all_passed &= report.distance_declared == report.distance_computed;
        println!();
        documents.push(VerifyDocument { report, concatenation: concat });
    }
    println!(
        "{} code(s) verified in {:.2} s: {}",
        documents.len(),
        started.elapsed().as_secs_f64(),
        if all_passed { "all checks passed" } else { "CHECKS FAILED" }
    );

    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        let json = serde_json::to_string_pretty(&documents).map_err(Failure::run)?;
        write_file(&dir, "verify.json", &json)?;
        let config = flags_map(&[("code", name.unwrap_or("all").to_string())]);
        write_manifest(&dir, "codes verify", &config, 0, cli.workers)?;
    }

    if all_passed {
        Ok(())
    } else {
        Err(Failure::Check("code verification reported failures".into()))
    }
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

fn outcome_text(outcome: &dfsqec::ft::decoder::DecodeOutcome) -> String {
    let mut text = outcome.correction.to_string();
    if outcome.ambiguous {
        text.push_str(" ambiguous");
    }
    if outcome.rejected {
        text.push_str(" rejected");
    }
    text
}

fn cmd_decode(
    cli: &Cli,
    record_args: &[String],
    mode: DecodeMode,
    batch: Option<&Path>,
) -> Result<(), Failure> {
    if record_args.is_empty() && batch.is_none() {
        return Err(Failure::Usage(
            "give a record (e.g. `decode r=10000 s=1001`) or --batch FILE".into(),
        ));
    }
    let code = codes::build_1014();
    let driver = CycleDriver::new(&code).map_err(Failure::run)?;
    let decoder = driver.decoder();
    let seed = cli.seed.unwrap_or(0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    if !record_args.is_empty() {
        let text = record_args.join(" ");
        let record = SyndromeRecord::parse(&text).map_err(|e| Failure::Usage(e.to_string()))?;
        let outcome = decoder.decode_full(&record, mode, &mut rng).map_err(Failure::run)?;
        println!("{}", outcome_text(&outcome));
    }

    if let Some(path) = batch {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Failure::Usage(format!("{}: empty batch file", path.display())))??;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        if !matches!(columns.as_slice(), ["r", "s"] | ["r", "s", "flags"] | ["r", "s", "flags", "round"])
        {
            return Err(Failure::Usage(format!(
                "{}: header must be r,s[,flags[,round]], got {header:?}",
                path.display()
            )));
        }

        let mut sink: Box<dyn Write> = if cli.out.is_some() {
            let dir = out_dir(cli)?;
            Box::new(std::fs::File::create(dir.join("decode.csv"))?)
        } else {
            Box::new(std::io::stdout().lock())
        };
        writeln!(sink, "r,s,flags,round,correction,ambiguous,rejected")?;

        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Failure::Usage(format!(
                    "{} line {}: expected {} fields, got {}",
                    path.display(),
                    i + 2,
                    columns.len(),
                    fields.len()
                )));
            }
            let mut text = format!("r={} s={}", fields[0], fields[1]);
            if fields.len() > 2 && !fields[2].is_empty() && fields[2] != "000" {
                text.push_str(&format!(" flags={}", fields[2]));
                if fields.len() > 3 && !fields[3].is_empty() {
                    text.push_str(&format!(" round={}", fields[3]));
                }
            }
            let record = SyndromeRecord::parse(&text).map_err(|e| {
                Failure::Usage(format!("{} line {}: {e}", path.display(), i + 2))
            })?;
            let outcome = decoder.decode_full(&record, mode, &mut rng).map_err(Failure::run)?;
            writeln!(
                sink,
                "{},{},{},{},{},{},{}",
                fields[0],
                fields[1],
                if fields.len() > 2 { fields[2] } else { "000" },
                if fields.len() > 3 { fields[3] } else { "" },
                outcome.correction,
                outcome.ambiguous,
                outcome.rejected
            )?;
        }

        if cli.out.is_some() {
            let dir = out_dir(cli)?;
            let config = flags_map(&[
                ("mode", mode_name(mode).to_string()),
                ("batch", path.display().to_string()),
            ]);
            write_manifest(&dir, "decode", &config, seed, cli.workers)?;
        }
    }
    Ok(())
}

fn mode_name(mode: DecodeMode) -> &'static str {
    match mode {
        DecodeMode::Correct => "correct",
        DecodeMode::PostSelect => "post_select",
    }
}

// ---------------------------------------------------------------------------
// fault-scan
// ---------------------------------------------------------------------------

fn cmd_fault_scan(cli: &Cli, deflagged: bool) -> Result<(), Failure> {
    let code = codes::build_1014();
    let started = Instant::now();

    let scan = if deflagged {
        println!("negative control: flag qubits stripped from the extraction circuits");
        let reference = CycleDriver::new(&code).map_err(Failure::run)?;
        let stripped = deflagged_circuits(reference.circuits());
        let driver = CycleDriver::with_circuits(&code, stripped).map_err(Failure::run)?;
        FaultScan::with_driver(&code, driver).map_err(Failure::run)?
    } else {
        FaultScan::new(&code).map_err(Failure::run)?
    };

    // The hook table is part of the cycle driver; building it at all proves
    // the flag-pattern table is conflict-free.
    let hook_entries = CycleDriver::new(&code)
        .map_err(Failure::run)?
        .decoder()
        .hook_table()
        .map(|t| t.len())
        .unwrap_or(0);

    let report = scan.run().map_err(Failure::run)?;
    let elapsed = started.elapsed().as_secs_f64();

    println!("fault locations:        {}", report.sites);
    println!("fault variants run:     {}", report.faults);
    println!("codespace inputs run:   {}", report.codespace_cases);
    println!("correction inputs run:  {}", report.correction_cases);
    println!("escalated to full pass: {}", report.escalated);
    println!("hook-table decodes:     {}", report.hook_hits);
    println!("ambiguous decodes:      {}", report.ambiguous);
    println!("max residual weight:    {}", report.max_residual_weight);
    println!("hook table entries:     {hook_entries} (conflict-free by construction)");
    println!("violations:             {}", report.violations.len());
    for v in report.violations.iter().take(10) {
        println!("  [{}] {}", v.condition, v.detail);
    }
    if report.violations.len() > 10 {
        println!("  ... and {} more", report.violations.len() - 10);
    }
    println!("wall time:              {elapsed:.2} s");

    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        #[derive(Serialize)]
        struct ScanDocument {
            deflagged: bool,
            sites: usize,
            faults: usize,
            codespace_cases: usize,
            correction_cases: usize,
            escalated: usize,
            hook_hits: usize,
            ambiguous: usize,
            max_residual_weight: u8,
            hook_entries: usize,
            violations: Vec<String>,
            wall_time_s: f64,
        }
        let doc = ScanDocument {
            deflagged,
            sites: report.sites,
            faults: report.faults,
            codespace_cases: report.codespace_cases,
            correction_cases: report.correction_cases,
            escalated: report.escalated,
            hook_hits: report.hook_hits,
            ambiguous: report.ambiguous,
            max_residual_weight: report.max_residual_weight,
            hook_entries,
            violations: report
                .violations
                .iter()
                .map(|v| format!("[{}] {}", v.condition, v.detail))
                .collect(),
            wall_time_s: elapsed,
        };
        let json = serde_json::to_string_pretty(&doc).map_err(Failure::run)?;
        write_file(&dir, "scan.json", &json)?;
        let config = flags_map(&[("deflagged", deflagged.to_string())]);
        write_manifest(&dir, "fault-scan", &config, 0, cli.workers)?;
    }

    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "{} fault-tolerance violation(s) found",
            report.violations.len()
        )))
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(cli: &Cli) -> Result<(), Failure> {
    let mut map = match &cli.config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::default(),
    };
    for assignment in &cli.set {
        map.set(assignment)?;
    }
    if let Some(seed) = cli.seed {
        map.set(&format!("seed={seed}"))?;
    }
    let config = RunConfig::from_map(map)?;

    let started = Instant::now();
    let result = run_memory(&config.plan).map_err(Failure::run)?;
    let elapsed = started.elapsed().as_secs_f64();

    let n_states = result.states.len();
    let n_times = result.times_s.len();
    println!(
        "ran {:?} memory: {} states x {} times x {} shots in {elapsed:.2} s",
        result.kind, n_states, n_times, config.plan.shots
    );
    for (si, state) in result.states.clone().iter().enumerate() {
        let survivals: Vec<String> = (0..n_times)
            .map(|ti| match result.survival(*state, ti) {
                Some(est) => format!("{:.3}", est.p),
                None => "n/a".into(),
            })
            .collect();
        println!("  state {state}: p = [{}]", survivals.join(", "));
        let _ = si;
    }

    let summary = RunSummary::build(result, config.assume_partners);
    if let Some(rows) = &summary.metrics {
        for row in rows {
            println!(
                "  t = {:>7.2} s: F_avg = {:.4}  F_process = {:.4}  integrity = {:.4}",
                row.time_s, row.f_avg, row.f_process, row.integrity
            );
        }
    } else if let Some(note) = &summary.metrics_note {
        println!("  metrics skipped: {note}");
    }
    if let Some(rows) = &summary.retention {
        for row in rows {
            let per_cycle = row
                .per_cycle
                .map(|p| format!("{p:.4}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "  t = {:>7.2} s: retained {}/{} ({:.4}), per-cycle {}",
                row.time_s, row.accepted, row.total, row.fraction.p, per_cycle
            );
        }
    }

    let dir = out_dir(cli)?;
    let csv_path = write_file(&dir, "memory.csv", &summary.result.to_csv())?;
    let json_path = write_file(&dir, "summary.json", &summary.to_json()?)?;
    let echo = config.to_map();
    let cfg_path = write_file(&dir, "resolved.cfg", &echo.canonical_text())?;
    write_manifest(&dir, "run", &echo, config.plan.seed, cli.workers)?;
    println!(
        "wrote {}, {}, {}, and manifest.json",
        csv_path.display(),
        json_path.display(),
        cfg_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Format a float for CSV: empty when absent.
fn csv_f64(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

/// The standard error attached to a named free parameter, if it was free.
fn err_for(outcome: &FitOutcome, name: &str) -> Option<f64> {
    outcome
        .free_names
        .iter()
        .position(|n| n == name)
        .map(|i| outcome.std_errors[i])
}

struct FitRow {
    source: String,
    state: String,
    outcome: FitOutcome,
    pinning: RatePinning,
    /// Headline decay rate per second, for cross-kind comparison.
    rate_per_s: Option<f64>,
    rate_convention: &'static str,
}

fn fit_row(source: &str, tau: f64, kind: ModelKind, handoff: &SeriesHandoff) -> Result<FitRow, Failure> {
    let outcome = fit_counts(kind, handoff.pinning, &handoff.series)
        .map_err(|e| Failure::Run(format!("{source}: state {}: {e}", handoff.series.state)))?;
    let (rate, convention) = match outcome.model {
        DecayModel::FreeDecay { gamma, gamma_static, .. } => {
            if gamma_static > 0.0 && gamma == 0.0 {
                (Some(gamma_static / std::f64::consts::SQRT_2), "gamma_static/sqrt(2)")
            } else {
                (Some(gamma), "gamma")
            }
        }
        DecayModel::CycleDecay { eps_m, .. } => (Some(2.0 * eps_m / tau), "2*eps_m/tau"),
        DecayModel::Retention { eta } => (Some(eta), "eta"),
    };
    Ok(FitRow {
        source: source.into(),
        state: handoff.series.state.to_string(),
        outcome,
        pinning: handoff.pinning,
        rate_per_s: rate,
        rate_convention: convention,
    })
}

fn pinning_name(pin: RatePinning) -> &'static str {
    match pin {
        RatePinning::None => "none",
        RatePinning::PinExponential => "pin_exponential",
        RatePinning::PinGaussian => "pin_gaussian",
    }
}

fn model_fields(model: &DecayModel) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::new();
    match *model {
        DecayModel::FreeDecay { eps_s, gamma, gamma_static } => {
            m.insert("eps_s", eps_s);
            m.insert("gamma", gamma);
            m.insert("gamma_static", gamma_static);
        }
        DecayModel::CycleDecay { eps_s, eps_m } => {
            m.insert("eps_s", eps_s);
            m.insert("eps_m", eps_m);
        }
        DecayModel::Retention { eta } => {
            m.insert("eta", eta);
        }
    }
    m
}

/// Survival curves per basis, from the fitted models; a basis with a single
/// fitted state borrows it for the partner (recorded in `assumed`).
struct MetricCurves {
    /// (state curve, partner curve) per basis in Z, X, Y order.
    bases: Vec<(DecayModel, DecayModel)>,
    tau: f64,
    assumed: Vec<String>,
}

impl MetricCurves {
    fn build(
        fitted: &[(LogicalState, DecayModel)],
        tau: f64,
    ) -> Result<Self, String> {
        let model_for = |state: LogicalState| {
            fitted.iter().find(|(s, _)| *s == state).map(|(_, m)| m.clone())
        };
        let mut bases = Vec::new();
        let mut assumed = Vec::new();
        for (a, b) in [
            (LogicalState::Zero, LogicalState::One),
            (LogicalState::Plus, LogicalState::Minus),
            (LogicalState::PlusI, LogicalState::MinusI),
        ] {
            let ma = model_for(a);
            let mb = model_for(b);
            let pair = match (ma, mb) {
                (Some(ma), Some(mb)) => (ma, mb),
                (Some(ma), None) => {
                    assumed.push(b.to_string());
                    (ma.clone(), ma)
                }
                (None, Some(mb)) => {
                    assumed.push(a.to_string());
                    (mb.clone(), mb)
                }
                (None, None) => {
                    return Err(format!(
                        "no fitted states in the {a}/{b} basis; cannot build fidelity curves"
                    ))
                }
            };
            bases.push(pair);
        }
        Ok(Self { bases, tau, assumed })
    }

    fn basis_survival(&self, i: usize, t: f64) -> f64 {
        let (a, b) = &self.bases[i];
        0.5 * (a.evaluate_at_seconds(t, self.tau) + b.evaluate_at_seconds(t, self.tau))
    }

    fn process_fidelity(&self, t: f64) -> f64 {
        let f_avg =
            (0..3).map(|i| self.basis_survival(i, t)).sum::<f64>() / 3.0;
        (3.0 * f_avg - 1.0) / 2.0
    }

    fn integrity(&self, t: f64) -> f64 {
        let p_worst = (0..3)
            .map(|i| self.basis_survival(i, t))
            .fold(f64::INFINITY, f64::min);
        2.0 * (p_worst - 0.5).abs()
    }
}

#[derive(Serialize)]
struct SourceLifetimes {
    source: String,
    kind: QubitKind,
    process_fidelity: Option<LifetimeReport>,
    integrity: Option<LifetimeReport>,
    retention_eta_per_s: Option<f64>,
    assumed_partners: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    process_fidelity_improvement_vs_first: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    integrity_improvement_vs_first: Option<f64>,
}

fn cmd_fit(cli: &Cli, inputs: &[PathBuf], horizon: f64) -> Result<(), Failure> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Failure::Usage(format!(
            "--horizon must be a positive number of seconds, got {horizon}"
        )));
    }
    let mut rows: Vec<FitRow> = Vec::new();
    let mut lifetimes: Vec<SourceLifetimes> = Vec::new();

    for path in inputs {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let summary = RunSummary::from_json(&text)
            .map_err(|e| Failure::Usage(format!("{source}: not a run summary: {e}")))?;
        let tau = summary.fit.tau_cycle;

        let mut fitted: Vec<(LogicalState, DecayModel)> = Vec::new();
        for handoff in &summary.fit.series {
            let row = fit_row(&source, tau, summary.fit.model, handoff)?;
            fitted.push((handoff.series.state, row.outcome.model.clone()));
            println!(
                "{source}: state {} [{}] {:?} chi2/dof = {:.2}/{}{}",
                row.state,
                pinning_name(row.pinning),
                row.outcome.model,
                row.outcome.chi2,
                row.outcome.dof,
                if row.outcome.boundary { " (boundary)" } else { "" }
            );
            rows.push(row);
        }

        let mut retention_eta = None;
        if let Some(retention) = &summary.fit.retention {
            let p: Vec<f64> = retention
                .accepted
                .iter()
                .zip(&retention.total)
                .map(|(&a, &n)| a as f64 / n as f64)
                .collect();
            let data = FitData::from_counts(&retention.time_s, &p, &retention.total);
            let outcome = fit(ModelKind::Retention, RatePinning::None, &data)
                .map_err(|e| Failure::Run(format!("{source}: retention: {e}")))?;
            if let DecayModel::Retention { eta } = outcome.model {
                retention_eta = Some(eta);
                println!("{source}: retention eta = {eta:.4}/s");
            }
            rows.push(FitRow {
                source: source.clone(),
                state: "pooled".into(),
                pinning: RatePinning::None,
                rate_per_s: retention_eta,
                rate_convention: "eta",
                outcome,
            });
        }

        let (process, integrity, assumed, note) = match MetricCurves::build(&fitted, tau) {
            Ok(curves) => {
                let process = LifetimeReport {
                    seconds: crossing_time(
                        |t| curves.process_fidelity(t),
                        PROCESS_FIDELITY_FLOOR,
                        horizon,
                    ),
                    target: PROCESS_FIDELITY_FLOOR,
                    horizon,
                };
                let integrity = LifetimeReport {
                    seconds: crossing_time(|t| curves.integrity(t), INTEGRITY_FLOOR, horizon),
                    target: INTEGRITY_FLOOR,
                    horizon,
                };
                (Some(process), Some(integrity), curves.assumed, None)
            }
            Err(msg) => (None, None, Vec::new(), Some(msg)),
        };
        if let Some(p) = &process {
            println!(
                "{source}: process-fidelity lifetime = {}",
                p.seconds.map(|s| format!("{s:.2} s")).unwrap_or_else(|| "beyond horizon".into())
            );
        }
        if let Some(r) = &integrity {
            println!(
                "{source}: integrity lifetime = {}",
                r.seconds.map(|s| format!("{s:.2} s")).unwrap_or_else(|| "beyond horizon".into())
            );
        }
        lifetimes.push(SourceLifetimes {
            source,
            kind: summary.result.kind,
            process_fidelity: process,
            integrity,
            retention_eta_per_s: retention_eta,
            assumed_partners: assumed,
            note,
            process_fidelity_improvement_vs_first: None,
            integrity_improvement_vs_first: None,
        });
    }

    // Improvement factors vs the first input (the reference memory).
    if lifetimes.len() > 1 {
        let reference_p = lifetimes[0].process_fidelity;
        let reference_r = lifetimes[0].integrity;
        let reference_name = lifetimes[0].source.clone();
        for row in lifetimes.iter_mut().skip(1) {
            row.process_fidelity_improvement_vs_first = match (&row.process_fidelity, &reference_p)
            {
                (Some(a), Some(b)) => improvement_factor(a, b),
                _ => None,
            };
            row.integrity_improvement_vs_first = match (&row.integrity, &reference_r) {
                (Some(a), Some(b)) => improvement_factor(a, b),
                _ => None,
            };
            if let Some(f) = row.process_fidelity_improvement_vs_first {
                println!(
                    "{}: process-fidelity lifetime improvement vs {}: {f:.2}x",
                    row.source, reference_name
                );
            }
        }
    }

    let dir = out_dir(cli)?;
    let mut csv = String::from(
        "source,state,model,pinning,eps_s,eps_s_err,gamma,gamma_err,gamma_static,\
         gamma_static_err,eps_m,eps_m_err,eta,eta_err,rate_per_s,rate_convention,\
         chi2,dof,boundary\n",
    );
    for row in &rows {
        let fields = model_fields(&row.outcome.model);
        let get = |name: &str| fields.get(name).copied();
        let err = |name: &str| err_for(&row.outcome, name);
        csv.push_str(&format!(
            "{},{},{:?},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.source,
            row.state,
            row.outcome.model.kind(),
            pinning_name(row.pinning),
            csv_f64(get("eps_s")),
            csv_f64(err("eps_s")),
            csv_f64(get("gamma")),
            csv_f64(err("gamma")),
            csv_f64(get("gamma_static")),
            csv_f64(err("gamma_static")),
            csv_f64(get("eps_m")),
            csv_f64(err("eps_m")),
            csv_f64(get("eta")),
            csv_f64(err("eta")),
            csv_f64(row.rate_per_s),
            row.rate_convention,
            row.outcome.chi2,
            row.outcome.dof,
            row.outcome.boundary,
        ));
    }
    let csv_path = write_file(&dir, "fits.csv", &csv)?;

    #[derive(Serialize)]
    struct LifetimesDocument {
        horizon_s: f64,
        process_fidelity_target: f64,
        integrity_target: f64,
        sources: Vec<SourceLifetimes>,
    }
    let doc = LifetimesDocument {
        horizon_s: horizon,
        process_fidelity_target: PROCESS_FIDELITY_FLOOR,
        integrity_target: INTEGRITY_FLOOR,
        sources: lifetimes,
    };
    let json_path =
        write_file(&dir, "lifetimes.json", &serde_json::to_string_pretty(&doc).map_err(Failure::run)?)?;

    let input_list: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    let config = flags_map(&[
        ("inputs", input_list.join(",")),
        ("horizon", horizon.to_string()),
    ]);
    write_manifest(&dir, "fit", &config, cli.seed.unwrap_or(0), cli.workers)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench-decoder
// ---------------------------------------------------------------------------

fn cmd_bench(cli: &Cli, n: u64, max_median_us: Option<f64>) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let code = codes::build_1014();
    let driver = CycleDriver::new(&code).map_err(Failure::run)?;
    let decoder = driver.decoder();
    let seed = cli.seed.unwrap_or(0);

    // Pre-draw the records so generation cost stays out of the timings.
    let mut gen_rng = ChaCha12Rng::seed_from_u64(seed);
    let records: Vec<SyndromeRecord> = (0..n)
        .map(|_| {
            use rand::Rng;
            SyndromeRecord::new(gen_rng.gen::<u8>() & 0b1_1111, gen_rng.gen::<u8>() & 0b1111)
        })
        .collect();

    let mut tie_rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(1));
    let mut latencies_ns: Vec<u64> = Vec::with_capacity(records.len());
    let started = Instant::now();
    let mut corrections_weight: u64 = 0;
    for record in &records {
        let t0 = Instant::now();
        let outcome = decoder
            .decode_full(record, DecodeMode::Correct, &mut tie_rng)
            .map_err(Failure::run)?;
        latencies_ns.push(t0.elapsed().as_nanos() as u64);
        corrections_weight += outcome.correction.weight() as u64;
    }
    let wall = started.elapsed().as_secs_f64();

    latencies_ns.sort_unstable();
    let at = |q: f64| latencies_ns[((latencies_ns.len() - 1) as f64 * q) as usize];
    let median_ns = at(0.5);
    let median_us = median_ns as f64 / 1e3;

    println!("decoded {n} random records in {wall:.2} s ({:.0} records/s)", n as f64 / wall);
    println!("mean correction weight: {:.3}", corrections_weight as f64 / n as f64);
    println!("latency: median {median_us:.3} us");
    println!("  p90  {:.3} us", at(0.9) as f64 / 1e3);
    println!("  p99  {:.3} us", at(0.99) as f64 / 1e3);
    println!("  max  {:.3} us", *latencies_ns.last().unwrap() as f64 / 1e3);
    println!("histogram:");
    let edges_us = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let mut lower = 0.0;
    for &edge in &edges_us {
        let count = latencies_ns
            .iter()
            .filter(|&&ns| ns as f64 / 1e3 >= lower && (ns as f64) / 1e3 < edge)
            .count();
        println!("  [{lower:>5.1}, {edge:>5.1}) us: {count}");
        lower = edge;
    }
    let over = latencies_ns.iter().filter(|&&ns| ns as f64 / 1e3 >= lower).count();
    println!("  [{lower:>5.1},   inf) us: {over}");

    if cli.out.is_some() {
        let dir = out_dir(cli)?;
        #[derive(Serialize)]
        struct BenchDocument {
            records: u64,
            wall_time_s: f64,
            median_us: f64,
            p90_us: f64,
            p99_us: f64,
            max_us: f64,
        }
        let doc = BenchDocument {
            records: n,
            wall_time_s: wall,
            median_us,
            p90_us: at(0.9) as f64 / 1e3,
            p99_us: at(0.99) as f64 / 1e3,
            max_us: *latencies_ns.last().unwrap() as f64 / 1e3,
        };
        write_file(&dir, "bench.json", &serde_json::to_string_pretty(&doc).map_err(Failure::run)?)?;
        let config = flags_map(&[("n", n.to_string())]);
        write_manifest(&dir, "bench-decoder", &config, seed, cli.workers)?;
    }

    if let Some(limit) = max_median_us {
        if median_us > limit {
            return Err(Failure::Check(format!(
                "median decode latency {median_us:.3} us exceeds the {limit} us limit"
            )));
        }
    }
    Ok(())
}
