//! `d2dpc`: run sessions, sweep the memory/load tradeoff, audit privacy and
//! replay the golden example.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! usage or runtime errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use d2dpc::analysis::{tradeoff_table, write_tradeoff_csv};
use d2dpc::audit::{
    audit_colluding, range_constant_library, AuditMode, AuditOptions, AuditReport, KeyKind, Variant,
    DEFAULT_BUDGET, SAMPLED_TOLERANCE,
};
use d2dpc::placement::{Library, SchemeParams};
use d2dpc::session::{run_session, DemandMode, SchemeKind, SessionConfig};
use d2dpc::{selftest, Rational};

#[derive(Parser, Debug)]
#[command(name = "d2dpc", version, about = "Private D2D coded caching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one session (or a demand sweep) and print the report as JSON.
    Run(RunArgs),
    /// Write the memory/load tradeoff table as CSV.
    Sweep(SweepArgs),
    /// Audit demand privacy of the coded scheme.
    Audit(AuditArgs),
    /// Check the two-user, three-file golden example.
    Selftest(SelftestArgs),
}

#[derive(Parser, Debug)]
struct RunArgs {
    /// coded, uncoded or shared-link-ref
    #[arg(long, default_value = "coded")]
    scheme: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// Corner index (coded, shared-link-ref).
    #[arg(long)]
    t: Option<usize>,
    /// Memory in files, e.g. `2` or `3/2` (uncoded).
    #[arg(long)]
    m: Option<String>,
    /// File size in bits; defaults to the smallest valid size.
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, env = "D2DPC_SEED", default_value_t = 0)]
    seed: u64,
    /// Comma-separated demands, `all` or `random`.
    #[arg(long, default_value = "random")]
    demands: String,
    /// Transcript path (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser, Debug)]
struct SweepArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KeyArg {
    Exact,
    Relabeled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FilesArg {
    Random,
    RangeConstant,
}

#[derive(Parser, Debug)]
struct AuditArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    /// Observer set, e.g. `1` or `1,2`; every single user when absent.
    #[arg(long)]
    audit_observer: Option<String>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    audit_mode: ModeArg,
    /// View key; exact for exhaustive audits, relabeled for sampled ones by default.
    #[arg(long, value_enum)]
    audit_key: Option<KeyArg>,
    /// File realization; random for exhaustive audits, range-constant for sampled ones by default.
    #[arg(long, value_enum)]
    audit_files: Option<FilesArg>,
    /// Audit the deliberately broken variant instead of the scheme.
    #[arg(long)]
    mutate: bool,
    /// Largest tape count an exhaustive audit may enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Samples per demand vector in sampled mode.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = SAMPLED_TOLERANCE)]
    tolerance: f64,
    #[arg(long, env = "D2DPC_SEED", default_value_t = 0)]
    seed: u64,
    /// Report path (JSON); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser, Debug)]
struct SelftestArgs {
    /// Bits per piece; the file size is six times this.
    #[arg(long, default_value_t = 1)]
    piece_bits: usize,
    #[arg(long, env = "D2DPC_SEED", default_value_t = 0)]
    seed: u64,
}

fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        let numer: num::BigInt = digits.parse().with_context(|| format!("bad memory value {s:?}"))?;
        let denom = num::BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(Rational::new(numer, denom));
    }
    s.parse::<Rational>()
        .map_err(|e| anyhow::anyhow!("bad memory value {s:?}: {e}"))
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().with_context(|| format!("bad entry {x:?} in {s:?}")))
        .collect()
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let config = SessionConfig {
        scheme: args.scheme.parse::<SchemeKind>()?,
        k: args.k,
        n: args.n,
        t: args.t,
        m: args.m.as_deref().map(parse_rational).transpose()?,
        b: args.b,
        seed: args.seed,
        demands: args.demands.parse::<DemandMode>()?,
        transcript: args.out,
    };
    let report = run_session(&config)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(report.passed)
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let rows = tradeoff_table(args.k, args.n)?;
    let mut out = output(&args.out)?;
    write_tradeoff_csv(&mut out, args.k, args.n, &rows)?;
    out.flush()?;
    Ok(true)
}

fn cmd_audit(args: AuditArgs) -> Result<bool> {
    let params = SchemeParams::with_piece_bits(args.k, args.n, args.t, 1)?;
    let sampled = matches!(args.audit_mode, ModeArg::Sampled);
    let key = match args.audit_key {
        Some(KeyArg::Exact) => KeyKind::Exact,
        Some(KeyArg::Relabeled) => KeyKind::Relabeled,
        None if sampled => KeyKind::Relabeled,
        None => KeyKind::Exact,
    };
    let library = match args.audit_files {
        Some(FilesArg::RangeConstant) => range_constant_library(&params, args.seed)?,
        Some(FilesArg::Random) => Library::random(params.n, params.b, 1, args.seed)?,
        None if sampled => range_constant_library(&params, args.seed)?,
        None => Library::random(params.n, params.b, 1, args.seed)?,
    };
    let mut opts = if sampled {
        AuditOptions::sampled(args.samples, args.seed)
    } else {
        AuditOptions::exhaustive()
    };
    if let AuditMode::Exhaustive { budget } = &mut opts.mode {
        *budget = args.budget;
    }
    opts.tolerance = if sampled { args.tolerance } else { 0.0 };
    opts = opts.with_key(key).with_variant(if args.mutate {
        Variant::Mutated
    } else {
        Variant::Private
    });

    let observer_sets: Vec<Vec<usize>> = match &args.audit_observer {
        Some(s) => vec![parse_list(s)?],
        None => (1..=params.k).map(|k| vec![k]).collect(),
    };
    let mut reports: Vec<AuditReport> = Vec::new();
    for obs in &observer_sets {
        reports.push(audit_colluding(&params, &library, obs, &opts)?);
    }
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &reports)?;
    writeln!(out)?;
    out.flush()?;
    for r in &reports {
        eprintln!(
            "observer {:?}: {} pairs, max distance {:.6}, {}",
            r.observer,
            r.pairs.len(),
            r.max_distance().max(0.0),
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    Ok(reports.iter().all(AuditReport::passed))
}

fn cmd_selftest(args: SelftestArgs) -> Result<bool> {
    let checks = selftest::run_selftest(args.piece_bits, args.seed)?;
    let mut ok = true;
    let mut out = io::stdout().lock();
    for c in &checks {
        ok &= c.passed;
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            writeln!(out, "{verdict} {}", c.name)?;
        } else {
            writeln!(out, "{verdict} {} ({})", c.name, c.detail)?;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
