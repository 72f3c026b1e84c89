//! `fmhd` — command-line harness for the fractional MHD spectral laboratory.
//!
//! Subcommands run one scenario each against a plain-text configuration and
//! persist a record per run to the append-only registry. Exit status: 0 when
//! every embedded audit passed, 1 on audit/experiment failure, 2 on
//! configuration errors.

// Validation uses `!(x > c)` so NaN fails alongside the wrong sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod registry;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, parse_config_multi, RunConfig, Scenario};
use registry::RunRecord;

#[derive(Parser)]
#[command(
    name = "fmhd",
    about = "Spectral laboratory for fractional MHD decay experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run configuration (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the registry and per-run artifacts.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Optional configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration: any value may be a comma-separated list.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs to execute concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-rational decay-exponent bootstrap with ordering and margin audits
    Bootstrap(RunArgs),
    /// Linear semigroup decay of a spectral density vs the predicted exponent
    SemigroupDecay(RunArgs),
    /// Integrate the mollified MHD system and audit the energy ledger
    Simulate(RunArgs),
    /// Fast audit battery across all modules
    Verify(VerifyArgs),
    /// Expand a list-valued config into a batch and run it concurrently
    Sweep(SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Bootstrap(a) => run_single(&a, Scenario::Bootstrap),
        Command::SemigroupDecay(a) => run_single(&a, Scenario::SemigroupDecay),
        Command::Simulate(a) => run_single(&a, Scenario::Simulate),
        Command::Verify(a) => run_verify(&a),
        Command::Sweep(a) => run_sweep(&a),
    }
}

fn read_config(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read config {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn apply_seed_override(cfg: &mut RunConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        if cfg.params.contains_key("seed") {
            cfg.params.insert("seed".into(), s.to_string());
        }
    }
}

fn run_single(args: &RunArgs, scenario: Scenario) -> ExitCode {
    let text = match read_config(&args.config) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let mut cfg = match parse_config(&text, scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    apply_seed_override(&mut cfg, args.seed);
    let (record, passed) = execute_and_record(&cfg, &args.out);
    println!(
        "{} {} -> {} ({})",
        cfg.scenario.name(),
        record.run_id,
        record.status,
        record.result_hash
    );
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_verify(args: &VerifyArgs) -> ExitCode {
    let text = match &args.config {
        Some(path) => match read_config(path) {
            Ok(t) => t,
            Err(code) => return code,
        },
        None => "scenario = verify\n".to_string(),
    };
    let mut cfg = match parse_config(&text, Scenario::Verify) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    apply_seed_override(&mut cfg, args.seed);
    let (record, passed) = execute_and_record(&cfg, &args.out);
    // The verify report doubles as console output.
    if let Some(path) = record
        .artifacts
        .iter()
        .find(|a| a.ends_with("verify_report.csv"))
    {
        if let Ok(report) = std::fs::read_to_string(args.out.join(path)) {
            print!("{report}");
        }
    }
    println!("verify {} -> {}", record.run_id, record.status);
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_sweep(args: &SweepArgs) -> ExitCode {
    let text = match read_config(&args.config) {
        Ok(t) => t,
        Err(code) => return code,
    };
    // The sweep's scenario key names the target scenario.
    let scenario = text
        .lines()
        .filter_map(|l| {
            l.split_once('#')
                .map(|(h, _)| h)
                .unwrap_or(l)
                .trim()
                .split_once('=')
        })
        .find(|(k, _)| k.trim() == "scenario")
        .and_then(|(_, v)| Scenario::parse(v.trim()));
    let Some(scenario) = scenario else {
        eprintln!("error: sweep config needs a 'scenario' key naming the target scenario");
        return ExitCode::from(2);
    };
    let mut configs = match parse_config_multi(&text, scenario, true) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for cfg in &mut configs {
        apply_seed_override(cfg, args.seed);
    }
    let jobs = args.jobs.max(1);
    println!(
        "sweep: {} runs of '{}' with {} worker(s)",
        configs.len(),
        scenario.name(),
        jobs
    );

    let mut stack: Vec<(usize, RunConfig)> = configs.into_iter().enumerate().collect();
    stack.reverse();
    let queue = Mutex::new(stack);
    let results = Mutex::new(Vec::<(usize, String, String, bool)>::new());
    let out_dir = args.out.clone();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").pop();
                let Some((idx, cfg)) = next else { break };
                let (record, passed) = execute_and_record(&cfg, &out_dir);
                results.lock().expect("results lock").push((
                    idx,
                    record.run_id,
                    record.status,
                    passed,
                ));
            });
        }
    });
    let mut results = results.into_inner().expect("results");
    results.sort_by_key(|r| r.0);
    let mut all_pass = true;
    for (idx, run_id, status, passed) in &results {
        println!("  [{idx}] {run_id} -> {status}");
        all_pass &= *passed;
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Run one scenario, write artifacts under `<out>/<run_id>/`, append the
/// registry record. Failures are recorded, not propagated.
fn execute_and_record(cfg: &RunConfig, out_dir: &Path) -> (RunRecord, bool) {
    let run_id = registry::run_id(cfg);
    let outcome = scenarios::run_scenario(cfg);
    let run_dir = out_dir.join(&run_id);
    let mut artifact_paths = Vec::new();
    if let Err(e) = std::fs::create_dir_all(&run_dir) {
        eprintln!("warning: cannot create {}: {e}", run_dir.display());
    }
    for (name, body) in &outcome.artifacts {
        let path = run_dir.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            eprintln!("warning: cannot write {}: {e}", path.display());
        }
        artifact_paths.push(format!("{run_id}/{name}"));
    }
    let status = if outcome.passed { "pass" } else { "fail" };
    let record = RunRecord {
        run_id: run_id.clone(),
        schema: cfg.schema_version,
        scenario: cfg.scenario.name().to_string(),
        timestamp: registry::now_unix(),
        status: status.to_string(),
        result_hash: registry::result_hash(&outcome.artifacts),
        config: cfg.params.clone(),
        metrics: outcome.metrics.clone(),
        artifacts: artifact_paths,
        error: outcome.failure.clone(),
    };
    if let Err(e) = registry::append(out_dir, &record) {
        eprintln!("warning: cannot append registry record: {e}");
    }
    (record, outcome.passed)
}
