//! SMT-LIB v2 sessions with an external solver process.
//!
//! A [`Session`] owns one child process and talks to it over pipes with
//! `:print-success` enabled, so every command gets an answer and a desync is
//! detected at the first unexpected token. A reader thread turns stdout into
//! s-expressions; queries wait on it with a timeout, and a timeout kills the
//! process and poisons the session.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::encoding::VarSpace;
use crate::formula::{Atom, LinearExpr, Predicate, Rel, Var};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("failed to start solver `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver exited unexpectedly")]
    Closed,
    #[error("solver protocol error: expected {expected}, got `{got}`")]
    Protocol { expected: &'static str, got: String },
    #[error("solver reported: {0}")]
    Solver(String),
    #[error("session is unusable after an earlier failure or timeout")]
    Poisoned,
    #[error("solver did not answer within {0:?}")]
    Timeout(Duration),
    #[error("`{0}` called out of order")]
    Order(&'static str),
}

pub type Result<T> = std::result::Result<T, SmtError>;

pub const DEFAULT_SOLVER: &str = "z3 -in";
pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Logic {
    QfLia,
    Lia,
}

impl Logic {
    pub fn as_str(self) -> &'static str {
        match self {
            Logic::QfLia => "QF_LIA",
            Logic::Lia => "LIA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown,
}

/// How to launch a solver: program and arguments, plus the per-query limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub argv: Vec<String>,
    pub timeout: Duration,
    /// Appends every command sent to the solver to this file.
    pub transcript: Option<std::path::PathBuf>,
}

impl SolverConfig {
    /// Splits `cmd` on whitespace. Quoting is not supported.
    pub fn parse(cmd: &str) -> Result<Self> {
        let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
        if argv.is_empty() {
            return Err(SmtError::EmptyCommand);
        }
        Ok(SolverConfig { argv, timeout: DEFAULT_QUERY_TIMEOUT, transcript: None })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn command_line(&self) -> String {
        self.argv.join(" ")
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::parse(DEFAULT_SOLVER).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s) => Some(s),
            SExpr::List(_) => None,
        }
    }

    fn int(&self) -> Option<i128> {
        match self {
            SExpr::Atom(s) => s.parse().ok(),
            SExpr::List(items) => match items.as_slice() {
                [SExpr::Atom(op), x] if op == "-" => x.int().map(|v| -v),
                _ => None,
            },
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(s) => f.write_str(s),
            SExpr::List(items) => {
                f.write_char('(')?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_char(')')
            }
        }
    }
}

/// Reads whole s-expressions from a byte stream; responses may span lines.
pub struct SExprReader<R: Read> {
    bytes: std::iter::Peekable<std::io::Bytes<R>>,
}

impl<R: BufRead> SExprReader<R> {
    pub fn new(r: R) -> Self {
        SExprReader { bytes: r.bytes().peekable() }
    }

    fn peek(&mut self) -> Option<u8> {
        match self.bytes.peek() {
            Some(Ok(b)) => Some(*b),
            _ => None,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        self.bytes.next().and_then(|r| r.ok())
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.bump();
            } else if b == b';' {
                while let Some(b) = self.bump() {
                    if b == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// `None` at end of stream or on a truncated expression.
    pub fn next_expr(&mut self) -> Option<SExpr> {
        self.skip_ws();
        match self.peek()? {
            b'(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.peek()? == b')' {
                        self.bump();
                        return Some(SExpr::List(items));
                    }
                    items.push(self.next_expr()?);
                }
            }
            b')' => {
                self.bump();
                Some(SExpr::Atom(")".into()))
            }
            q @ (b'"' | b'|') => {
                let mut s = vec![self.bump()?];
                loop {
                    let b = self.bump()?;
                    s.push(b);
                    if b == q {
                        // SMT-LIB escapes a quote inside a string by doubling it
                        if q == b'"' && self.peek() == Some(b'"') {
                            s.push(self.bump()?);
                            continue;
                        }
                        break;
                    }
                }
                Some(SExpr::Atom(String::from_utf8_lossy(&s).into_owned()))
            }
            _ => {
                let mut s = Vec::new();
                while let Some(b) = self.peek() {
                    if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                        break;
                    }
                    s.push(self.bump()?);
                }
                Some(SExpr::Atom(String::from_utf8_lossy(&s).into_owned()))
            }
        }
    }
}

/// Parses every expression in `text`.
pub fn parse_sexprs(text: &str) -> Vec<SExpr> {
    let mut r = SExprReader::new(text.as_bytes());
    std::iter::from_fn(|| r.next_expr()).collect()
}

fn int_lit(v: i128) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn expr_term(e: &LinearExpr, space: &VarSpace) -> String {
    let mut parts: Vec<String> = e
        .coeffs()
        .iter()
        .map(|(&v, &c)| {
            let sym = space.symbol(v);
            match c {
                1 => sym,
                -1 => format!("(- {sym})"),
                _ => format!("(* {} {sym})", int_lit(c)),
            }
        })
        .collect();
    if e.constant_term() != 0 || parts.is_empty() {
        parts.push(int_lit(e.constant_term()));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

pub fn atom_term(a: &Atom, space: &VarSpace) -> String {
    let op = match a.rel() {
        Rel::Eq => "=",
        Rel::Le => "<=",
        Rel::Ge => ">=",
    };
    format!("({op} {} {})", expr_term(a.expr(), space), int_lit(a.bound()))
}

fn nary(op: &str, parts: &[Predicate], space: &VarSpace, unit: &str) -> String {
    match parts {
        [] => unit.into(),
        [p] => pred_term(p, space),
        _ => {
            let inner: Vec<String> = parts.iter().map(|p| pred_term(p, space)).collect();
            format!("({op} {})", inner.join(" "))
        }
    }
}

/// Serializes `p` as an SMT-LIB term. Quantifiers bind `k` over the naturals.
pub fn pred_term(p: &Predicate, space: &VarSpace) -> String {
    let k = space.symbol(Var::Param);
    match p {
        Predicate::True => "true".into(),
        Predicate::False => "false".into(),
        Predicate::Atom(a) => atom_term(a, space),
        Predicate::And(ps) => nary("and", ps, space, "true"),
        Predicate::Or(ps) => nary("or", ps, space, "false"),
        Predicate::Not(q) => format!("(not {})", pred_term(q, space)),
        Predicate::Exists(b) => {
            format!("(exists (({k} Int)) (and (>= {k} 0) {}))", pred_term(b, space))
        }
        Predicate::Forall(b) => {
            format!("(forall (({k} Int)) (=> (>= {k} 0) {}))", pred_term(b, space))
        }
    }
}

/// Marking and skolem variables occurring in `p` (the bound parameter excluded).
pub fn free_vars(p: &Predicate) -> BTreeSet<Var> {
    p.atoms().into_iter().flat_map(|a| a.expr().coeffs().keys().copied()).filter(|v| *v != Var::Param).collect()
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<SExpr>,
    transcript: Option<std::fs::File>,
}

impl Process {
    fn spawn(config: &SolverConfig) -> Result<Process> {
        let mut child = Command::new(&config.argv[0])
            .args(&config.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SmtError::Spawn { cmd: config.command_line(), source })?;
        let stdin = child.stdin.take().ok_or(SmtError::Closed)?;
        let stdout = child.stdout.take().ok_or(SmtError::Closed)?;
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("smt-reader".into())
            .spawn(move || {
                let mut r = SExprReader::new(BufReader::new(stdout));
                while let Some(e) = r.next_expr() {
                    if tx.send(e).is_err() {
                        break;
                    }
                }
            })
            .map_err(SmtError::Io)?;
        let transcript = match &config.transcript {
            Some(path) => Some(std::fs::OpenOptions::new().create(true).append(true).open(path)?),
            None => None,
        };
        Ok(Process { child, stdin, rx, transcript })
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.stdin.flush();
        self.kill();
    }
}

#[derive(Default)]
struct Scope {
    commands: Vec<String>,
    declared: HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Last {
    None,
    Sat,
    Unsat,
    Other,
}

/// One solver process with a scoped assertion stack.
///
/// Every declaration and assertion is also logged per scope, so the session
/// can restart its process under a different logic and replay the stack.
/// Asserting a quantified predicate upgrades a `QF_LIA` session to `LIA`.
pub struct Session {
    config: SolverConfig,
    proc: Option<Process>,
    logic: Logic,
    scopes: Vec<Scope>,
    names: u64,
    last: Last,
    queries: u64,
}

impl Session {
    pub fn open(config: &SolverConfig, logic: Logic) -> Result<Session> {
        let mut s = Session {
            config: config.clone(),
            proc: None,
            logic,
            scopes: vec![Scope::default()],
            names: 0,
            last: Last::None,
            queries: 0,
        };
        s.start()?;
        Ok(s)
    }

    fn start(&mut self) -> Result<()> {
        self.proc = Some(Process::spawn(&self.config)?);
        self.raw("(set-option :print-success true)")?;
        self.raw("(set-option :produce-models true)")?;
        self.raw("(set-option :produce-unsat-cores true)")?;
        self.raw(&format!("(set-logic {})", self.logic.as_str()))?;
        Ok(())
    }

    pub fn logic(&self) -> Logic {
        self.logic
    }

    pub fn depth(&self) -> usize {
        self.scopes.len() - 1
    }

    pub fn is_poisoned(&self) -> bool {
        self.proc.is_none()
    }

    /// Number of `check-sat` calls issued so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.config.timeout = timeout;
    }

    pub fn timeout(&self) -> Duration {
        self.config.timeout
    }

    fn poison(&mut self) {
        if let Some(mut p) = self.proc.take() {
            p.kill();
        }
    }

    fn send(&mut self, cmd: &str) -> Result<SExpr> {
        let timeout = self.config.timeout;
        let proc = self.proc.as_mut().ok_or(SmtError::Poisoned)?;
        log::trace!("smt> {cmd}");
        if let Some(f) = proc.transcript.as_mut() {
            let _ = writeln!(f, "{cmd}");
        }
        let written = writeln!(proc.stdin, "{cmd}").and_then(|_| proc.stdin.flush());
        if let Err(e) = written {
            self.poison();
            return Err(SmtError::Io(e));
        }
        match proc.rx.recv_timeout(timeout) {
            Ok(resp) => {
                log::trace!("smt< {resp}");
                if let SExpr::List(items) = &resp {
                    if items.first().and_then(SExpr::atom) == Some("error") {
                        let msg = items.get(1).map(|m| m.to_string()).unwrap_or_default();
                        self.poison();
                        return Err(SmtError::Solver(msg));
                    }
                }
                Ok(resp)
            }
            Err(RecvTimeoutError::Timeout) => {
                self.poison();
                Err(SmtError::Timeout(timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.poison();
                Err(SmtError::Closed)
            }
        }
    }

    fn raw(&mut self, cmd: &str) -> Result<()> {
        let resp = self.send(cmd)?;
        if resp.atom() == Some("success") {
            Ok(())
        } else {
            self.poison();
            Err(SmtError::Protocol { expected: "success", got: resp.to_string() })
        }
    }

    fn logged(&mut self, cmd: String) -> Result<()> {
        self.raw(&cmd)?;
        self.scopes.last_mut().unwrap().commands.push(cmd);
        self.last = Last::Other;
        Ok(())
    }

    fn is_declared(&self, sym: &str) -> bool {
        self.scopes.iter().any(|s| s.declared.contains(sym))
    }

    fn declare(&mut self, sym: &str, sort: &str, nonneg: bool) -> Result<()> {
        if self.is_declared(sym) {
            return Ok(());
        }
        self.logged(format!("(declare-const {sym} {sort})"))?;
        if nonneg {
            self.logged(format!("(assert (>= {sym} 0))"))?;
        }
        self.scopes.last_mut().unwrap().declared.insert(sym.to_string());
        Ok(())
    }

    /// Declares a natural-valued integer symbol (no-op if already visible).
    pub fn declare_nat(&mut self, sym: &str) -> Result<()> {
        self.declare(sym, "Int", true)
    }

    pub fn declare_bool(&mut self, sym: &str) -> Result<()> {
        self.declare(sym, "Bool", false)
    }

    /// Declares every current-marking symbol of `space`.
    pub fn declare_places(&mut self, space: &VarSpace) -> Result<()> {
        for sym in space.current_symbols() {
            self.declare_nat(&sym)?;
        }
        Ok(())
    }

    fn prepare(&mut self, p: &Predicate, space: &VarSpace) -> Result<String> {
        if p.is_quantified() {
            self.require(Logic::Lia)?;
        }
        for v in free_vars(p) {
            self.declare_nat(&space.symbol(v))?;
        }
        Ok(pred_term(p, space))
    }

    /// Asserts `p`, optionally under `name` for unsat cores. Returns the name
    /// actually used; names are made unique by a session-wide counter.
    pub fn assert_pred(&mut self, p: &Predicate, space: &VarSpace, name: Option<&str>) -> Result<Option<String>> {
        let term = self.prepare(p, space)?;
        match name {
            None => {
                self.logged(format!("(assert {term})"))?;
                Ok(None)
            }
            Some(base) => {
                self.names += 1;
                let n = format!("{base}!{}", self.names);
                self.logged(format!("(assert (! {term} :named {n}))"))?;
                Ok(Some(n))
            }
        }
    }

    /// Asserts `guard => p` for a Boolean activation symbol `guard`.
    pub fn assert_guarded(&mut self, guard: &str, p: &Predicate, space: &VarSpace) -> Result<()> {
        self.declare_bool(guard)?;
        let term = self.prepare(p, space)?;
        self.logged(format!("(assert (=> {guard} {term}))"))
    }

    /// Asserts `a => b` between Boolean symbols, declaring both if needed.
    pub fn assert_implies(&mut self, a: &str, b: &str) -> Result<()> {
        self.declare_bool(a)?;
        self.declare_bool(b)?;
        self.logged(format!("(assert (=> {a} {b}))"))
    }

    /// Asserts a Boolean symbol, declaring it if needed.
    pub fn assert_symbol(&mut self, sym: &str) -> Result<()> {
        self.declare_bool(sym)?;
        self.logged(format!("(assert {sym})"))
    }

    /// Switches to `logic` unless the session already covers it, restarting
    /// the process and replaying the assertion stack.
    pub fn require(&mut self, logic: Logic) -> Result<()> {
        if self.logic == Logic::Lia || self.logic == logic {
            return Ok(());
        }
        log::debug!("upgrading solver session to {}", logic.as_str());
        self.poison();
        self.logic = logic;
        self.start()?;
        let replay: Vec<Vec<String>> = self.scopes.iter().map(|s| s.commands.clone()).collect();
        for (i, cmds) in replay.iter().enumerate() {
            if i > 0 {
                self.raw("(push 1)")?;
            }
            for c in cmds {
                self.raw(c)?;
            }
        }
        self.last = Last::Other;
        Ok(())
    }

    pub fn push(&mut self) -> Result<()> {
        self.raw("(push 1)")?;
        self.scopes.push(Scope::default());
        self.last = Last::Other;
        Ok(())
    }

    pub fn pop(&mut self) -> Result<()> {
        if self.scopes.len() == 1 {
            return Err(SmtError::Order("pop"));
        }
        self.raw("(pop 1)")?;
        self.scopes.pop();
        self.last = Last::Other;
        Ok(())
    }

    /// Clears all assertions and declarations, keeping the logic.
    pub fn reset(&mut self) -> Result<()> {
        self.raw("(reset)")?;
        self.scopes = vec![Scope::default()];
        self.raw("(set-option :print-success true)")?;
        self.raw("(set-option :produce-models true)")?;
        self.raw("(set-option :produce-unsat-cores true)")?;
        self.raw(&format!("(set-logic {})", self.logic.as_str()))?;
        self.last = Last::Other;
        Ok(())
    }

    /// Runs `check-sat`. A timeout yields `Unknown` and poisons the session.
    pub fn check(&mut self) -> Result<SatResult> {
        self.queries += 1;
        let resp = match self.send("(check-sat)") {
            Ok(r) => r,
            Err(SmtError::Timeout(_)) => {
                self.last = Last::Other;
                return Ok(SatResult::Unknown);
            }
            Err(e) => return Err(e),
        };
        let r = match resp.atom() {
            Some("sat") => SatResult::Sat,
            Some("unsat") => SatResult::Unsat,
            Some("unknown") => SatResult::Unknown,
            _ => {
                self.poison();
                return Err(SmtError::Protocol { expected: "sat, unsat or unknown", got: resp.to_string() });
            }
        };
        self.last = match r {
            SatResult::Sat => Last::Sat,
            SatResult::Unsat => Last::Unsat,
            SatResult::Unknown => Last::Other,
        };
        Ok(r)
    }

    /// Values of `symbols` in the last model. Symbols never declared are
    /// unconstrained naturals and read as 0.
    pub fn get_model(&mut self, symbols: &[String]) -> Result<HashMap<String, i128>> {
        if self.last != Last::Sat {
            return Err(SmtError::Order("get_model"));
        }
        let mut out = HashMap::new();
        let asked: Vec<&String> = symbols.iter().filter(|s| self.is_declared(s)).collect();
        for s in symbols {
            out.insert(s.clone(), 0);
        }
        if asked.is_empty() {
            return Ok(out);
        }
        let joined: Vec<&str> = asked.iter().map(|s| s.as_str()).collect();
        let resp = self.send(&format!("(get-value ({}))", joined.join(" ")))?;
        let bad = |resp: &SExpr| SmtError::Protocol { expected: "a value list", got: resp.to_string() };
        let SExpr::List(pairs) = &resp else { return Err(bad(&resp)) };
        for pair in pairs {
            match pair {
                SExpr::List(kv) if kv.len() == 2 => {
                    let key = kv[0].atom().ok_or_else(|| bad(&resp))?;
                    let val = kv[1].int().ok_or_else(|| bad(&resp))?;
                    out.insert(key.to_string(), val);
                }
                _ => return Err(bad(&resp)),
            }
        }
        Ok(out)
    }

    /// Names in the unsat core of the last check.
    pub fn get_core(&mut self) -> Result<Vec<String>> {
        if self.last != Last::Unsat {
            return Err(SmtError::Order("get_core"));
        }
        let resp = self.send("(get-unsat-core)")?;
        match resp {
            SExpr::List(items) => items
                .iter()
                .map(|x| x.atom().map(String::from))
                .collect::<Option<Vec<_>>>()
                .ok_or(SmtError::Protocol { expected: "a list of names", got: String::new() }),
            other => Err(SmtError::Protocol { expected: "a list of names", got: other.to_string() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_predicate;
    use crate::petri::tests::parity;

    #[test]
    fn reader_handles_multiline_and_quotes() {
        let es = parse_sexprs("success\n(\na2\na3\n)\n(error \"line 1: \"\"x\"\" bad\")\n((y (- 5)))");
        assert_eq!(es.len(), 4);
        assert_eq!(es[0], SExpr::Atom("success".into()));
        assert_eq!(es[1].to_string(), "(a2 a3)");
        assert_eq!(es[2].to_string(), "(error \"line 1: \"\"x\"\" bad\")");
        let SExpr::List(pairs) = &es[3] else { panic!() };
        let SExpr::List(kv) = &pairs[0] else { panic!() };
        assert_eq!(kv[1].int(), Some(-5));
    }

    #[test]
    fn serialization_is_stable() {
        let net = parity();
        let space = VarSpace::for_net(&net);
        let p = parse_predicate("p >= 1 and forall (k) (p < 2 * k + 2 or p - 2 * (k + 1) >= 1)", &net).unwrap();
        let golden =
            "(and (>= p0 1) (forall ((k Int)) (=> (>= k 0) (or (<= (+ p0 (* (- 2) k)) 1) (>= (+ p0 (* (- 2) k)) 3)))))";
        assert_eq!(pred_term(&p, &space), golden);
        assert_eq!(pred_term(&p.clone(), &space), pred_term(&p, &space));
        let q = parse_predicate("p - 3 = -2", &net).unwrap();
        assert_eq!(pred_term(&q, &space), "(= p0 1)");
        let neg = parse_predicate("0 - p >= -4", &net).unwrap();
        assert_eq!(pred_term(&neg, &space), "(<= p0 4)");
        assert_eq!(pred_term(&Predicate::and([]), &space), "true");
        assert_eq!(pred_term(&Predicate::or([]), &space), "false");
        assert_eq!(pred_term(&parse_predicate("p = 1", &net).unwrap().primed(), &space), "(= p0.next 1)");
    }

    #[test]
    fn config_parsing() {
        let c = SolverConfig::parse("  z3   -in ").unwrap();
        assert_eq!(c.argv, vec!["z3", "-in"]);
        assert!(matches!(SolverConfig::parse("  "), Err(SmtError::EmptyCommand)));
    }

    #[test]
    fn spawn_failure_is_reported() {
        let c = SolverConfig::parse("/nonexistent/solver-binary").unwrap();
        assert!(matches!(Session::open(&c, Logic::QfLia), Err(SmtError::Spawn { .. })));
    }
}
