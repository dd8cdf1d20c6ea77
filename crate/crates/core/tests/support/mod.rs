#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Stdio};

use pnpdr::smt::SolverConfig;

fn runs(argv: &[&str]) -> bool {
    Command::new(argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

pub fn z3() -> Option<SolverConfig> {
    runs(&["z3", "-version"]).then(|| SolverConfig::parse("z3 -in").unwrap())
}

pub fn cvc5() -> Option<SolverConfig> {
    if runs(&["cvc5", "--version"]) {
        return Some(SolverConfig::parse("cvc5 --incremental --lang smt2").unwrap());
    }
    let shim = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/support/cvc5_shim.py");
    runs(&["python3", "-c", "import cvc5"])
        .then(|| SolverConfig::parse(&format!("python3 {}", shim.display())).unwrap())
}

/// Every solver found on this machine, z3 first.
pub fn solvers() -> Vec<(&'static str, SolverConfig)> {
    let mut out = Vec::new();
    if let Some(c) = z3() {
        out.push(("z3", c));
    }
    if let Some(c) = cvc5() {
        out.push(("cvc5", c));
    }
    if out.is_empty() {
        eprintln!("no SMT solver found; solver-backed checks are skipped");
    }
    out
}

/// The preferred solver, or `None` (test skipped) if none is installed.
pub fn solver() -> Option<SolverConfig> {
    solvers().into_iter().next().map(|(_, c)| c)
}
