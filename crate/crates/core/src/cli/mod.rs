//! Batch front end: `ccmin <command> --config run.json`.
//!
//! Exit codes: 0 pass, 1 verified false, 2 configuration error, 3 runtime
//! failure, 4 inconclusive.

pub mod config;
pub mod vfld;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::ccdiag::{concentration_q, Harness, Verdict, VerificationReport};
use crate::error::{Error, Result};
use crate::flow::{scan_mass, solve_multistart, TraceRow};
use crate::nonlin::check_assumptions;
pub use config::{Needs, RunConfig, FORMAT_VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "CCMIN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ccmin", version, about = "Constrained minimization and concentration diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the flow and sampling seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize on the mass sphere (multistart).
    Solve,
    /// Minimum energy along the listed masses.
    Scan,
    /// Run one lemma verifier.
    Verify { lemma: String },
    /// Sample the structural assumptions with the configured constants.
    CheckAssumptions,
    /// Energies along a shrinking dilation curve.
    ProbeDilation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Lemma {
    Negativity,
    Subadditivity,
    Comparison,
    Continuity,
    Supercritical,
    CriticalThreshold,
}

impl Lemma {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "negativity" => Lemma::Negativity,
            "subadditivity" => Lemma::Subadditivity,
            "comparison" => Lemma::Comparison,
            "continuity" => Lemma::Continuity,
            "supercritical" => Lemma::Supercritical,
            "critical-threshold" => Lemma::CriticalThreshold,
            _ => return None,
        })
    }

    fn needs(self) -> Needs {
        match self {
            Lemma::Negativity => Needs::Negativity,
            Lemma::Subadditivity => Needs::Subadditivity,
            Lemma::Comparison => Needs::Comparison,
            Lemma::Continuity => Needs::Continuity,
            Lemma::Supercritical => Needs::Dilation,
            Lemma::CriticalThreshold => Needs::Critical,
        }
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iter,energy,kinetic,potential,mass_error,residual,tau\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.iter, r.energy, r.kinetic, r.potential, r.mass_error, r.residual, r.tau
        ));
    }
    out
}

/// Top-level wrapper every command writes.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    command: &'a str,
    config_digest: String,
    #[serde(flatten)]
    body: T,
}

struct Context {
    cfg: RunConfig,
    out_dir: PathBuf,
    digest: String,
}

impl Context {
    fn write<T: Serialize>(&self, name: &str, command: &str, body: T) -> Result<()> {
        let env = Envelope {
            format_version: FORMAT_VERSION,
            command,
            config_digest: self.digest.clone(),
            body,
        };
        write_json(&self.out_dir.join(name), &env)
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FALSE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_CONFIG,
            };
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    let (ctx, needs, lemma) = match prepare(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("ccmin: {e}");
            return EXIT_CONFIG;
        }
    };
    let grid = match ctx.cfg.validate(needs) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("ccmin: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("ccmin: --threads must be positive");
            return EXIT_CONFIG;
        }
        // a second command in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match &cli.command {
        Command::Solve => cmd_solve(&ctx, grid),
        Command::Scan => cmd_scan(&ctx, grid),
        Command::CheckAssumptions => cmd_check_assumptions(&ctx, grid),
        Command::ProbeDilation => cmd_verify(&ctx, grid, Lemma::Supercritical, "probe-dilation"),
        Command::Verify { .. } => cmd_verify(&ctx, grid, lemma.expect("parsed"), "verify"),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ccmin: {e}");
            match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn prepare(cli: &Cli) -> Result<(Context, Needs, Option<Lemma>)> {
    let (needs, lemma) = match &cli.command {
        Command::Solve => (Needs::Solve, None),
        Command::Scan => (Needs::Scan, None),
        Command::CheckAssumptions => (Needs::Assumptions, None),
        Command::ProbeDilation => (Needs::Dilation, None),
        Command::Verify { lemma } => {
            let l = Lemma::parse(lemma).ok_or_else(|| Error::Config(format!("unknown lemma '{lemma}'")))?;
            (l.needs(), Some(l))
        }
    };
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
        other => other,
    })?;
    if let Some(seed) = cli.seed {
        cfg.flow.seed = seed;
        cfg.sampling.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("ccmin-out"));
    let digest = cfg.digest()?;
    Ok((Context { cfg, out_dir, digest }, needs, lemma))
}

fn cmd_solve(ctx: &Context, grid: crate::grid::Grid) -> Result<i32> {
    let cfg = &ctx.cfg;
    let c = cfg.c()?;
    let functional = cfg.functional();
    let out = solve_multistart(&grid, c, &cfg.nonlinearity, &cfg.flow, functional)?;
    let best = &out.best;
    vfld::write(&ctx.out_dir.join("minimizer.vfld"), &best.minimizer)?;
    write_atomic(&ctx.out_dir.join("trace.csv"), trace_csv(&best.trace).as_bytes())?;
    let concentration = match &cfg.radii {
        Some(radii) => Some(concentration_q(&best.minimizer, radii)?),
        None => None,
    };
    ctx.write(
        "report.json",
        "solve",
        json!({
            "c": c,
            "functional": functional,
            "energy": best.energy,
            "kinetic": best.breakdown.kinetic,
            "potential": best.breakdown.potential,
            "multiplier": best.multiplier,
            "residual": best.residual,
            "iterations": best.iterations,
            "converged": best.converged,
            "stop": best.stop,
            "energy_error": best.energy_error,
            "runs": out.runs,
            "possible_local_minima": out.possible_local_minima,
            "concentration": concentration,
        }),
    )?;
    if !best.converged {
        eprintln!("ccmin: no run reached residual_tol (best residual {:.3e})", best.residual);
    }
    Ok(EXIT_PASS)
}

fn cmd_scan(ctx: &Context, grid: crate::grid::Grid) -> Result<i32> {
    let cfg = &ctx.cfg;
    let values = cfg.c_values.clone().unwrap_or_default();
    let points = scan_mass(&grid, &values, &cfg.nonlinearity, &cfg.flow, cfg.functional())?;
    let mut csv = String::from("c,energy,multiplier,residual\n");
    for p in &points {
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", p.c, p.energy, p.multiplier, p.residual));
    }
    write_atomic(&ctx.out_dir.join("scan.csv"), csv.as_bytes())?;
    ctx.write("scan.json", "scan", json!({ "functional": cfg.functional(), "points": points }))?;
    Ok(EXIT_PASS)
}

fn cmd_check_assumptions(ctx: &Context, grid: crate::grid::Grid) -> Result<i32> {
    let cfg = &ctx.cfg;
    let constants = cfg.constants.as_ref().expect("validated");
    let report = check_assumptions(&cfg.nonlinearity, constants, &cfg.sampling, grid.dim())?;
    let all_hold = report.all_hold();
    ctx.write(
        "assumptions.json",
        "check-assumptions",
        json!({ "all_hold": all_hold, "report": report }),
    )?;
    Ok(if all_hold { EXIT_PASS } else { EXIT_FALSE })
}

fn cmd_verify(ctx: &Context, grid: crate::grid::Grid, lemma: Lemma, command: &str) -> Result<i32> {
    let cfg = &ctx.cfg;
    let spec = &cfg.nonlinearity;
    let mut harness = Harness::new(grid.clone(), cfg.flow.clone());
    if let Some(b) = cfg.point_budget {
        harness.point_budget = b;
    }
    let report: VerificationReport = match lemma {
        Lemma::Negativity => harness.verify_negativity(spec, cfg.c()?, None, &cfg.lambdas())?,
        Lemma::Subadditivity => harness.verify_subadditivity(spec, cfg.c()?, &cfg.fractions(), cfg.functional())?,
        Lemma::Comparison => harness.verify_comparison(spec, cfg.c()?)?,
        Lemma::Continuity => {
            let c = cfg.c()?;
            harness.verify_continuity(spec, c, cfg.delta.unwrap_or(0.01 * c))?
        }
        Lemma::Supercritical => {
            harness.probe_supercritical(spec, cfg.c()?, cfg.bound.unwrap_or(1e3), cfg.max_power.unwrap_or(10))?
        }
        Lemma::CriticalThreshold => {
            let a = cfg
                .growth_constant
                .or(cfg.constants.as_ref().map(|k| k.a))
                .expect("validated");
            harness
                .critical_threshold(spec, a, cfg.bound.unwrap_or(1e2))?
                .into_report(spec, &grid)?
        }
    };
    let name = format!("{}.json", report.lemma);
    let code = verdict_code(report.verdict);
    ctx.write(&name, command, &report)?;
    Ok(code)
}
