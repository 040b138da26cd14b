//! `softdeadline` command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or
//! configuration error, 3 unstable system.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::arrivals::{generate_trace, ArrivalTrace, Horizon, ScenarioConfig};
use crate::coupling::{cycle_decisions, verify_coupling, CouplingReport};
use crate::disciplines::{check_ll_order, DisciplineId};
use crate::error::Error;
use crate::majorization::ConvexFn;
use crate::queue::{simulate, simulate_with_log};
use crate::stats::{compare_disciplines, sample_decision_states};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "softdeadline",
    version,
    about = "Soft-deadline single-server queue laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an arrival trace and write it as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Simulate one discipline and write the per-customer schedule as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replay a trace CSV instead of generating one.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        discipline: String,
        #[arg(long, default_value = "schedule.csv")]
        out: PathBuf,
    },
    /// Check the interchange coupling between two disciplines on many traces.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        phi: String,
        #[arg(long)]
        psi: String,
        #[arg(long, default_value_t = 100)]
        traces: usize,
        #[arg(long, default_value = "verify.json")]
        out: PathBuf,
    },
    /// Estimate stationary means of convex functions of the residual
    /// patience for several disciplines on common traces.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated discipline names.
        #[arg(long, default_value = "edf,fifo,lifo,ldf")]
        discipline: String,
        /// Comma-separated function names (lateness, square, abs, hinge:<c>, linear, neglinear).
        #[arg(
            long,
            default_value = "lateness,square,abs,hinge:0,hinge:1,linear,neglinear"
        )]
        g: String,
        #[arg(long, default_value_t = 10_000)]
        cycles: usize,
        /// Output prefix; writes `<out>.csv` and `<out>.json`.
        #[arg(long, default_value = "compare")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Written next to every output as `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<ScenarioConfig>,
    pub input_trace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unstable { .. } => EXIT_UNSTABLE,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let jobs = match &cli.command {
        Command::Trace { common, .. }
        | Command::Simulate { common, .. }
        | Command::Verify { common, .. }
        | Command::Compare { common, .. } => common.jobs,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Trace { common, out } => cmd_trace(&common, &out),
        Command::Simulate {
            common,
            trace,
            discipline,
            out,
        } => cmd_simulate(&common, trace.as_deref(), &discipline, &out),
        Command::Verify {
            common,
            phi,
            psi,
            traces,
            out,
        } => cmd_verify(&common, &phi, &psi, traces, &out),
        Command::Compare {
            common,
            discipline,
            g,
            cycles,
            out,
        } => cmd_compare(&common, &discipline, &g, cycles, &out),
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| usage("--config is required"))?;
    let mut cfg =
        ScenarioConfig::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_discipline(s: &str) -> Result<DisciplineId, Failure> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    write_json(Path::new(&path), manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let file = File::create(path).map_err(Error::from)?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(Error::from)?;
    Ok(())
}

fn manifest(command: &str, config: Option<&ScenarioConfig>, outputs: Vec<PathBuf>) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config: config.cloned(),
        input_trace: None,
        seed: config.map(|c| c.seed),
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn cmd_trace(common: &Common, out: &Path) -> Result<i32, Failure> {
    let cfg = load_config(common)?;
    let trace = generate_trace(&cfg)?;
    trace.write_csv(BufWriter::new(File::create(out).map_err(Error::from)?))?;
    write_manifest(out, &manifest("trace", Some(&cfg), vec![out.to_path_buf()]))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    common: &Common,
    trace_path: Option<&Path>,
    discipline: &str,
    out: &Path,
) -> Result<i32, Failure> {
    let d = parse_discipline(discipline)?;
    let (trace, cfg) = match trace_path {
        Some(p) => {
            let file = File::open(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            (
                ArrivalTrace::read_csv(file).map_err(|e| usage(format!("{}: {e}", p.display())))?,
                None,
            )
        }
        None => {
            let cfg = load_config(common)?;
            (generate_trace(&cfg)?, Some(cfg))
        }
    };
    let schedule = simulate(&trace, d);
    schedule.write_csv(
        &trace,
        BufWriter::new(File::create(out).map_err(Error::from)?),
    )?;
    let mut m = manifest("simulate", cfg.as_ref(), vec![out.to_path_buf()]);
    m.input_trace = trace_path.map(Path::to_path_buf);
    write_manifest(out, &m)?;
    eprintln!(
        "simulated {} customers in {} busy cycles under {d}",
        trace.len(),
        schedule.cycles.len()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TraceCoupling {
    seed: u64,
    #[serde(flatten)]
    report: CouplingReport,
}

#[derive(Serialize, Default)]
struct VerifySummary {
    traces: usize,
    cycles: usize,
    identity_failures: usize,
    majorization_failures: usize,
    decomposition_failures: usize,
    order_changes: usize,
    cycle_splits: usize,
}

#[derive(Serialize)]
struct VerifyOutput {
    phi: DisciplineId,
    psi: DisciplineId,
    summary: VerifySummary,
    traces: Vec<TraceCoupling>,
}

fn cmd_verify(
    common: &Common,
    phi: &str,
    psi: &str,
    n_traces: usize,
    out: &Path,
) -> Result<i32, Failure> {
    let (phi, psi) = (parse_discipline(phi)?, parse_discipline(psi)?);
    if !phi.is_deterministic() || !psi.is_deterministic() {
        return Err(usage("verify needs deterministic disciplines"));
    }
    if n_traces == 0 {
        return Err(usage("--traces must be positive"));
    }
    let cfg = load_config(common)?;
    let first = generate_trace(&cfg)?;
    let logs = vec![
        simulate_with_log(&first, phi, 5_000).1,
        simulate_with_log(&first, psi, 5_000).1,
    ];
    let states = sample_decision_states(&logs, 5_000, cfg.seed);
    let ll = check_ll_order(phi, psi, &states)?;
    if let Some(cx) = &ll.counterexample {
        eprintln!("error: {phi} ≪ {psi} fails on a sampled decision state:");
        eprintln!("{}", serde_json::to_string_pretty(cx).unwrap_or_default());
        return Ok(EXIT_USAGE);
    }

    let reports = (0..n_traces as u64)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t);
            let trace = generate_trace(&cfg.with_seed(seed))?;
            let report = verify_coupling(&trace, phi, psi)?;
            Ok((trace, TraceCoupling { seed, report }))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut summary = VerifySummary {
        traces: reports.len(),
        ..Default::default()
    };
    let mut first_failure = None;
    for (trace, tc) in &reports {
        for c in &tc.report.cycles {
            summary.cycles += 1;
            summary.identity_failures += usize::from(!c.identity_ok);
            summary.majorization_failures += usize::from(!c.majorization_ok);
            summary.decomposition_failures += usize::from(!c.decomposition_ok);
            summary.order_changes += usize::from(!c.order_preserved);
            summary.cycle_splits += usize::from(!c.cycle_preserved);
            if !c.passed() && first_failure.is_none() {
                first_failure = Some((trace, tc.seed, c));
            }
        }
    }
    eprintln!(
        "{phi} vs {psi}: {} traces, {} cycles, {} identity / {} majorization / {} decomposition failures",
        summary.traces,
        summary.cycles,
        summary.identity_failures,
        summary.majorization_failures,
        summary.decomposition_failures
    );
    let code = if let Some((trace, seed, c)) = first_failure {
        #[derive(Serialize)]
        struct Dump<'a> {
            seed: u64,
            cycle: &'a crate::coupling::CycleCoupling,
            phi_decisions: Vec<crate::queue::Decision>,
            psi_decisions: Vec<crate::queue::Decision>,
        }
        let dump = Dump {
            seed,
            cycle: c,
            phi_decisions: cycle_decisions(trace, phi, &c.cycle()),
            psi_decisions: cycle_decisions(trace, psi, &c.cycle()),
        };
        eprintln!(
            "first failing cycle:\n{}",
            serde_json::to_string_pretty(&dump).unwrap_or_default()
        );
        EXIT_VERIFICATION
    } else {
        EXIT_OK
    };

    let output = VerifyOutput {
        phi,
        psi,
        summary,
        traces: reports.into_iter().map(|(_, tc)| tc).collect(),
    };
    write_json(out, &output)?;
    write_manifest(
        out,
        &manifest("verify", Some(&cfg), vec![out.to_path_buf()]),
    )?;
    Ok(code)
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

fn cmd_compare(
    common: &Common,
    disciplines: &str,
    g: &str,
    cycles: usize,
    out: &Path,
) -> Result<i32, Failure> {
    let ds = split_list(disciplines)
        .into_iter()
        .map(parse_discipline)
        .collect::<Result<Vec<_>, _>>()?;
    if ds.is_empty() {
        return Err(usage("empty discipline list"));
    }
    let fns = split_list(g)
        .into_iter()
        .map(|s| s.parse::<ConvexFn>().map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = load_config(common)?;
    let cfg = cfg.with_horizon(Horizon::Cycles(cycles));
    let report = compare_disciplines(&cfg, &ds, &fns, cycles)?;

    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    report.write_csv(BufWriter::new(
        File::create(&csv_path).map_err(Error::from)?,
    ))?;
    write_json(&json_path, &report)?;
    write_manifest(
        out,
        &manifest("compare", Some(&cfg), vec![csv_path, json_path]),
    )?;
    for v in &report.verdicts {
        eprintln!(
            "{} ≪ {} on {}: {}{}",
            v.phi,
            v.psi,
            v.g,
            if v.confirmed {
                "ordered"
            } else {
                "NOT ordered"
            },
            if v.separated {
                ", intervals disjoint"
            } else {
                ""
            }
        );
    }
    Ok(EXIT_OK)
}
