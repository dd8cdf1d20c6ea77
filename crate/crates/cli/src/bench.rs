//! Fixture-suite runner.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use pnpdr::io;
use pnpdr::pdr::{prove, Options, PdrError, Strategy};

use crate::{secs, SolverArgs};

#[derive(Args)]
pub struct BenchArgs {
    /// Directory of `.prop` files, each naming its net with a `net:` header.
    dir: PathBuf,
    /// Strategies to run, one column each (repeatable).
    #[arg(long = "strategy", default_values_t = [Strategy::Auto])]
    strategies: Vec<Strategy>,
    /// Wall-clock budget per problem and strategy, in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Check the frame invariants after every generalization.
    #[arg(long)]
    validate_oars: bool,
    /// Write one JSON record per problem to this file.
    #[arg(long)]
    jsonl: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Serialize)]
struct Run {
    verdict: String,
    status: &'static str,
    seconds: f64,
    level: usize,
    clauses: usize,
    generalizations: usize,
    queries: u64,
    oars_checks: usize,
    oars_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Record {
    problem: String,
    expect: Option<&'static str>,
    results: BTreeMap<String, Run>,
}

fn status(expect: Option<io::Expectation>, verdict: &str) -> &'static str {
    match expect {
        _ if verdict == "ERROR" => "error",
        None => "n/a",
        Some(e) if e.label() == verdict => "ok",
        Some(_) if verdict == "UNKNOWN" => "unknown",
        Some(_) => "WRONG",
    }
}

fn run_one(path: &std::path::Path, strategy: Strategy, args: &BenchArgs) -> Result<(Option<io::Expectation>, Run)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let net_name = io::property_net(&text).with_context(|| format!("{}: no `net:` header", path.display()))?;
    let net_path = path.parent().unwrap_or(path).join(net_name);
    let (net, m0) = io::read_net(&net_path)?;
    let prop = io::parse_property(&text, &net).with_context(|| format!("parsing {}", path.display()))?;
    let solver = args.solver.config()?;
    let opts = Options {
        strategy,
        query_timeout: solver.timeout,
        solver,
        timeout: Some(secs(args.timeout)?),
        validate_oars: args.validate_oars,
        ..Options::default()
    };
    let start = Instant::now();
    let out = prove(&net, &m0, &prop.invariant(), &opts)?;
    let verdict = out.verdict.label().to_string();
    let s = out.stats;
    Ok((
        prop.expect,
        Run {
            status: status(prop.expect, &verdict),
            verdict,
            seconds: start.elapsed().as_secs_f64(),
            level: s.level,
            clauses: s.clauses,
            generalizations: s.generalizations,
            queries: s.queries,
            oars_checks: s.oars_checks,
            oars_violations: s.oars_violations.len(),
            error: None,
        },
    ))
}

fn not_applicable(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<PdrError>(), Some(PdrError::NotMonotonic(_)))
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    let mut files: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "prop"))
        .collect();
    files.sort();
    let mut jsonl = match &args.jsonl {
        Some(p) => Some(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => None,
    };

    let width = files.iter().map(|f| f.file_stem().unwrap().len()).max().unwrap_or(7).max(7);
    print!("{:width$}  {:10}", "problem", "expect");
    for s in &args.strategies {
        print!("  {:24}", s.name());
    }
    println!();

    let (mut wrong, mut unknown, mut errors, mut violations) = (0, 0, 0, 0);
    for f in &files {
        let name = f.file_stem().unwrap().to_string_lossy().into_owned();
        let mut rec = Record { problem: name.clone(), expect: None, results: BTreeMap::new() };
        let mut cells = Vec::new();
        for &s in &args.strategies {
            let run = match run_one(f, s, args) {
                Ok((expect, run)) => {
                    rec.expect = expect.map(io::Expectation::label);
                    run
                }
                Err(e) => Run {
                    verdict: if not_applicable(&e) { "N/A" } else { "ERROR" }.into(),
                    status: if not_applicable(&e) { "skipped" } else { "error" },
                    seconds: 0.0,
                    level: 0,
                    clauses: 0,
                    generalizations: 0,
                    queries: 0,
                    oars_checks: 0,
                    oars_violations: 0,
                    error: Some(format!("{e:#}")),
                },
            };
            match run.status {
                "WRONG" => wrong += 1,
                "unknown" => unknown += 1,
                "error" => errors += 1,
                _ => {}
            }
            violations += run.oars_violations;
            let mark = if run.status == "WRONG" { "!" } else { "" };
            cells.push(format!("{}{mark} {:.2}s", run.verdict, run.seconds));
            if let Some(e) = run.error.as_ref().filter(|_| run.status == "error") {
                eprintln!("{name} [{s}]: {e}");
            }
            rec.results.insert(s.name().to_string(), run);
        }
        print!("{name:width$}  {:10}", rec.expect.unwrap_or("-"));
        for c in cells {
            print!("  {c:24}");
        }
        println!();
        if let Some(out) = jsonl.as_mut() {
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    println!(
        "{} problems, {} runs: {wrong} wrong, {unknown} unknown, {errors} errors, {violations} oars violations",
        files.len(),
        files.len() * args.strategies.len()
    );
    Ok(ExitCode::from(if wrong + errors + violations > 0 { 1 } else { 0 }))
}
