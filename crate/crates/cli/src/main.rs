//! Command-line front end: check, certify, bench, generate.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pnpdr::formula::{parse_predicate, Names};
use pnpdr::io::{self, GoalKind, PropertyFile};
use pnpdr::pdr::{certificate_script, check_certificate, prove, Options, Outcome, Strategy, Verdict};
use pnpdr::smt::{SolverConfig, DEFAULT_QUERY_TIMEOUT, DEFAULT_SOLVER};
use pnpdr::{Marking, Net};

#[derive(Parser)]
#[command(name = "pnpdr", version, about = "Property directed reachability for Petri nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a property is an invariant of a marked net.
    Check(CheckArgs),
    /// Verify an invariance certificate independently of the prover.
    Certify(CertifyArgs),
    /// Run every problem of a fixture directory and compare with expectations.
    Bench(bench::BenchArgs),
    /// Write random bounded problems with known answers as fixtures.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Solver command line; it must speak SMT-LIB 2 on stdin/stdout.
    #[arg(long, env = "PNPDR_SOLVER", default_value = DEFAULT_SOLVER)]
    solver_cmd: String,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_QUERY_TIMEOUT.as_secs_f64())]
    query_timeout: f64,
    /// Append every command sent to the solver to this file.
    #[arg(long)]
    smt_log: Option<PathBuf>,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::parse(&self.solver_cmd)?.with_timeout(secs(self.query_timeout)?);
        c.transcript = self.smt_log.clone();
        Ok(c)
    }
}

#[derive(Args, Clone)]
pub struct ProblemArgs {
    /// Net file: PNML (`.pnml`, `.xml`) or the textual format.
    #[arg(long)]
    net: PathBuf,
    /// Property as a predicate over place names.
    #[arg(long, conflicts_with = "property_file", required_unless_present = "property_file")]
    property: Option<String>,
    /// Property file with optional `goal:`/`expect:` headers.
    #[arg(long)]
    property_file: Option<PathBuf>,
    /// Read `--property` as a set of markings to reach rather than an invariant.
    #[arg(long)]
    reachable: bool,
}

pub struct Problem {
    net: Net,
    m0: Marking,
    property: PropertyFile,
}

impl ProblemArgs {
    fn load(&self) -> Result<Problem> {
        let (net, m0) = io::read_net(&self.net)?;
        let property = match (&self.property, &self.property_file) {
            (Some(text), _) => {
                let goal = if self.reachable { GoalKind::Reachable } else { GoalKind::Invariant };
                PropertyFile { net: None, goal, predicate: parse_predicate(text, &net)?, expect: None }
            }
            (None, Some(path)) => io::read_property(path, &net)?,
            (None, None) => bail!("one of --property or --property-file is required"),
        };
        Ok(Problem { net, m0, property })
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Generalization strategy.
    #[arg(long, default_value = "auto")]
    strategy: Strategy,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Stop after this many clause generalizations.
    #[arg(long)]
    max_generalizations: Option<usize>,
    /// Shrink solver cores further by deletion.
    #[arg(long)]
    minimize_cores: bool,
    /// Check the frame invariants after every generalization.
    #[arg(long)]
    validate_oars: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the certificate (human format) here on INVARIANT.
    #[arg(long)]
    certificate_out: Option<PathBuf>,
    /// Write the certificate as a standalone SMT-LIB script here on INVARIANT.
    #[arg(long)]
    script_out: Option<PathBuf>,
    /// Write the counter-example trace here on REACHABLE.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Certificate file, as written by `check --certificate-out`, or a plain predicate.
    #[arg(long)]
    certificate: PathBuf,
    /// Also write the three checks as a standalone SMT-LIB script.
    #[arg(long)]
    script_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    count: usize,
}

pub fn secs(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid duration `{s}`"))
}

fn options(engine: &EngineArgs, solver: SolverConfig) -> Result<Options> {
    Ok(Options {
        strategy: engine.strategy,
        query_timeout: solver.timeout,
        solver,
        timeout: engine.timeout.map(secs).transpose()?,
        max_generalizations: engine.max_generalizations,
        minimize_cores: engine.minimize_cores,
        validate_oars: engine.validate_oars,
        ..Options::default()
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn verdict_matches(expect: io::Expectation, v: &Verdict) -> bool {
    expect.label() == v.label()
}

fn report(p: &Problem, out: &Outcome, args: &CheckArgs, elapsed: Duration) -> Result<()> {
    let names = Names::of(&p.net);
    println!("net: {} places, {} transitions", p.net.num_places(), p.net.num_transitions());
    let goal = match p.property.goal {
        GoalKind::Invariant => "invariant",
        GoalKind::Reachable => "reachable",
    };
    println!("goal: {goal} {}", names.predicate(&p.property.predicate));
    if let Some(s) = out.stats.strategy {
        println!("strategy: {s}");
    }
    println!("verdict: {}", out.verdict.label());
    match &out.verdict {
        Verdict::Invariant { certificate } => {
            let text = io::write_certificate(&p.net, certificate);
            print!("{text}");
            if let Some(path) = &args.certificate_out {
                write(path, &text)?;
            }
            if let Some(path) = &args.script_out {
                let script = certificate_script(&p.net, &p.m0, &p.property.invariant(), &certificate.to_predicate())?;
                write(path, &script)?;
            }
        }
        Verdict::Reachable { trace, final_marking } => {
            let text = io::write_trace(&p.net, trace, final_marking);
            print!("{text}");
            if let Some(path) = &args.trace_out {
                write(path, &text)?;
            }
        }
        Verdict::Unknown { reason } => println!("reason: {reason}"),
    }
    let s = &out.stats;
    println!(
        "stats: level {} clauses {} ({} quantified) obligations {} generalizations {} queries {}",
        s.level, s.clauses, s.quantified_clauses, s.obligations, s.generalizations, s.queries
    );
    if args.engine.validate_oars {
        println!("oars: {} checks, {} violations", s.oars_checks, s.oars_violations.len());
        for v in &s.oars_violations {
            println!("oars violation: {v}");
        }
    }
    if let Some(e) = p.property.expect {
        let ok = verdict_matches(e, &out.verdict);
        println!("expected: {}{}", e.label(), if ok { "" } else { " (MISMATCH)" });
    }
    println!("time: {:.3}s", elapsed.as_secs_f64());
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode> {
    let p = args.problem.load()?;
    let opts = options(&args.engine, args.solver.config()?)?;
    let start = Instant::now();
    let out = prove(&p.net, &p.m0, &p.property.invariant(), &opts)?;
    report(&p, &out, args, start.elapsed())?;
    Ok(ExitCode::from(if out.verdict.is_unknown() { 2 } else { 0 }))
}

fn cmd_certify(args: &CertifyArgs) -> Result<ExitCode> {
    let p = args.problem.load()?;
    let text =
        fs::read_to_string(&args.certificate).with_context(|| format!("reading {}", args.certificate.display()))?;
    let cert =
        io::parse_certificate(&text, &p.net).with_context(|| format!("parsing {}", args.certificate.display()))?;
    let property = p.property.invariant();
    if let Some(path) = &args.script_out {
        write(path, &certificate_script(&p.net, &p.m0, &property, &cert)?)?;
    }
    let start = Instant::now();
    let r = check_certificate(&p.net, &p.m0, &property, &cert, &args.solver.config()?)?;
    println!("initial: {}", r.initial);
    println!("inductive: {}", r.inductive);
    println!("entails property: {}", r.entails);
    let label = if r.passed() {
        "VALID"
    } else if r.failed() {
        "INVALID"
    } else {
        "INDETERMINATE"
    };
    println!("certificate: {label}");
    println!("time: {:.3}s", start.elapsed().as_secs_f64());
    Ok(ExitCode::from(if r.passed() { 0 } else { 2 }))
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode> {
    use pnpdr::generate::{random_problem, GenConfig};
    use rand::SeedableRng;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.count {
        let g = random_problem(&mut rng, &GenConfig::default());
        let stem = format!("rand{}_{i:03}", args.seed);
        write(&args.out.join(format!("{stem}.net")), &io::print_net_text(&g.net, &g.m0))?;
        let expect = if g.is_invariant() { "invariant" } else { "reachable" };
        let prop = format!("net: {stem}.net\nexpect: {expect}\n{}\n", Names::of(&g.net).predicate(&g.property));
        write(&args.out.join(format!("{stem}.prop")), &prop)?;
    }
    println!("wrote {} problems to {}", args.count, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let run = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Bench(a) => bench::run(a),
        Command::Generate(a) => cmd_generate(a),
    };
    run.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
