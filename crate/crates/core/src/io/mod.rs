//! Reading nets and properties, writing traces and certificates.
//!
//! Textual net format, one declaration per line:
//!
//! ```text
//! file  := line*
//! line  := (place | trans)? ("#" comment)?
//! place := "pl" NAME INT?                 -- initial tokens, default 0
//! trans := "tr" NAME arc* "->" arc*       -- inputs, then outputs
//! arc   := NAME ("*" INT)?                -- weight, default 1
//! ```
//!
//! Names are runs of non-blank characters other than `*` and `#`. Places
//! may be used before they are declared; their indices follow declaration
//! order.

mod pnml;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::formula::{negate, parse_predicate, Cube, FormulaError, Names, Predicate};
use crate::pdr::Certificate;
use crate::petri::{FiringSequence, Marking, Net, PetriError};

pub use pnml::parse_pnml;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown place `{name}`")]
    UnknownPlace { line: usize, name: String },
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("PNML: {0}")]
    Pnml(String),
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn syntax<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(IoError::Syntax { line, msg: msg.into() })
}

fn parse_arc(tok: &str, line: usize) -> Result<(&str, u64)> {
    let (name, w) = match tok.split_once('*') {
        Some((n, w)) => match w.parse::<u64>() {
            Ok(w) => (n, w),
            Err(_) => return syntax(line, format!("bad arc weight in `{tok}`")),
        },
        None => (tok, 1),
    };
    if name.is_empty() {
        return syntax(line, format!("missing place name in `{tok}`"));
    }
    Ok((name, w))
}

/// Parses the textual net format.
pub fn parse_net_text(text: &str) -> Result<(Net, Marking)> {
    struct Tr<'a> {
        line: usize,
        name: &'a str,
        ins: Vec<(&'a str, u64)>,
        outs: Vec<(&'a str, u64)>,
    }
    let mut places: Vec<String> = Vec::new();
    let mut tokens = Vec::new();
    let mut trs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut words = body.split_whitespace();
        match words.next() {
            None => {}
            Some("pl") => {
                let Some(name) = words.next() else { return syntax(line, "place without a name") };
                let m = match words.next() {
                    None => 0,
                    Some(w) => match w.parse::<u64>() {
                        Ok(v) => v,
                        Err(_) => return syntax(line, format!("bad token count `{w}`")),
                    },
                };
                if let Some(extra) = words.next() {
                    return syntax(line, format!("unexpected `{extra}`"));
                }
                if name.contains('*') {
                    return syntax(line, format!("`*` in place name `{name}`"));
                }
                places.push(name.to_string());
                tokens.push(m);
            }
            Some("tr") => {
                let Some(name) = words.next().filter(|n| *n != "->") else {
                    return syntax(line, "transition without a name");
                };
                let mut ins = Vec::new();
                let mut outs = Vec::new();
                let mut arrow = false;
                for w in words {
                    if w == "->" {
                        if arrow {
                            return syntax(line, "second `->`");
                        }
                        arrow = true;
                    } else if arrow {
                        outs.push(parse_arc(w, line)?);
                    } else {
                        ins.push(parse_arc(w, line)?);
                    }
                }
                if !arrow {
                    return syntax(line, "transition without `->`");
                }
                trs.push(Tr { line, name, ins, outs });
            }
            Some(other) => return syntax(line, format!("expected `pl` or `tr`, found `{other}`")),
        }
    }
    let np = places.len();
    let mut names = Vec::new();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for tr in &trs {
        let vec_of = |arcs: &[(&str, u64)]| -> Result<Vec<u64>> {
            let mut v = vec![0u64; np];
            for &(p, w) in arcs {
                let Some(i) = places.iter().position(|q| q == p) else {
                    return Err(IoError::UnknownPlace { line: tr.line, name: p.to_string() });
                };
                v[i] = v[i].checked_add(w).ok_or(PetriError::Overflow("arc weight"))?;
            }
            Ok(v)
        };
        pre.push(vec_of(&tr.ins)?);
        post.push(vec_of(&tr.outs)?);
        names.push(tr.name.to_string());
    }
    let net = Net::new(places, names, pre, post)?;
    Ok((net, Marking(tokens)))
}

fn arcs(net: &Net, weights: &[u64]) -> String {
    let mut out = String::new();
    for (p, &w) in net.places().iter().zip(weights) {
        match w {
            0 => {}
            1 => write!(out, " {p}").unwrap(),
            _ => write!(out, " {p}*{w}").unwrap(),
        }
    }
    out
}

/// Prints a net in the textual format. Names containing blanks, `*` or
/// `#` do not survive a round trip.
pub fn print_net_text(net: &Net, m0: &Marking) -> String {
    let mut out = String::new();
    for (p, m) in net.places().iter().zip(&m0.0) {
        writeln!(out, "pl {p} {m}").unwrap();
    }
    for t in net.transition_ids() {
        writeln!(out, "tr {}{} ->{}", net.transition_name(t), arcs(net, net.pre(t)), arcs(net, net.post(t))).unwrap();
    }
    out
}

/// Reads a net from disk: PNML for `.pnml`/`.xml` files, text otherwise.
pub fn read_net(path: &Path) -> Result<(Net, Marking)> {
    let data = std::fs::read(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pnml" | "xml") => parse_pnml(&data),
        _ => parse_net_text(&String::from_utf8_lossy(&data)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalKind {
    Invariant,
    Reachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Invariant,
    Reachable,
    Unknown,
}

impl Expectation {
    pub fn label(self) -> &'static str {
        match self {
            Expectation::Invariant => "INVARIANT",
            Expectation::Reachable => "REACHABLE",
            Expectation::Unknown => "UNKNOWN",
        }
    }
}

/// A property file: optional `net:`, `goal:` and `expect:` headers, then
/// one predicate (possibly over several lines). `#` starts a comment. The
/// `net:` header names the net file relative to the property file.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyFile {
    pub net: Option<String>,
    pub goal: GoalKind,
    pub predicate: Predicate,
    pub expect: Option<Expectation>,
}

impl PropertyFile {
    /// The property to prove invariant: the predicate itself, or its
    /// negation for a reachability goal.
    pub fn invariant(&self) -> Predicate {
        match self.goal {
            GoalKind::Invariant => self.predicate.clone(),
            GoalKind::Reachable => negate(&self.predicate),
        }
    }
}

/// The `net:` header of a property file, if any.
pub fn property_net(text: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.split('#').next().unwrap_or("").trim().strip_prefix("net:").map(|v| v.trim().to_string()))
}

pub fn parse_property(text: &str, net: &Net) -> Result<PropertyFile> {
    let mut goal = GoalKind::Invariant;
    let mut expect = None;
    let mut body = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with("net:") {
            continue;
        }
        if let Some(v) = line.strip_prefix("goal:") {
            goal = match v.trim() {
                "invariant" => GoalKind::Invariant,
                "reachable" => GoalKind::Reachable,
                other => return syntax(idx + 1, format!("unknown goal `{other}`")),
            };
        } else if let Some(v) = line.strip_prefix("expect:") {
            expect = Some(match v.trim().to_ascii_lowercase().as_str() {
                "invariant" => Expectation::Invariant,
                "reachable" => Expectation::Reachable,
                "unknown" => Expectation::Unknown,
                other => return syntax(idx + 1, format!("unknown expectation `{other}`")),
            });
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    if body.trim().is_empty() {
        return syntax(text.lines().count().max(1), "missing predicate");
    }
    Ok(PropertyFile { net: property_net(text), goal, predicate: parse_predicate(&body, net)?, expect })
}

pub fn read_property(path: &Path, net: &Net) -> Result<PropertyFile> {
    let text =
        std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    parse_property(&text, net)
}

pub const TRACE_HEADER: &str = "[PDR] Counter-example trace";
pub const CERTIFICATE_HEADER: &str = "[PDR] Certificate of invariance";

fn marking_text(net: &Net, m: &Marking) -> String {
    let parts: Vec<String> = net.places().iter().zip(&m.0).map(|(p, v)| format!("{p}={v}")).collect();
    parts.join(" ")
}

/// A firing sequence from the initial marking, then the marking it reaches.
pub fn write_trace(net: &Net, trace: &FiringSequence, final_marking: &Marking) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    if trace.is_empty() {
        out.push_str("trace: (empty, the initial marking violates the property)\n");
    } else {
        let names: Vec<&str> = trace.names(net).collect();
        writeln!(out, "trace: {}", names.join(" ")).unwrap();
    }
    writeln!(out, "final: {}", marking_text(net, final_marking)).unwrap();
    out
}

/// Reads back the transition names of a trace written by [`write_trace`].
pub fn parse_trace(text: &str, net: &Net) -> Result<FiringSequence> {
    for (idx, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("trace:") {
            if rest.trim_start().starts_with('(') {
                return Ok(FiringSequence(Vec::new()));
            }
            let names: Vec<&str> = rest.split_whitespace().collect();
            return net.sequence(&names).map_err(|e| IoError::Syntax { line: idx + 1, msg: e.to_string() });
        }
    }
    syntax(1, "no `trace:` line")
}

fn blocked_text(names: &Names, cube: &Cube, quantified: bool) -> String {
    let matrix = Predicate::and(cube.atoms().iter().cloned().map(Predicate::Atom));
    let body = format!("(not {})", names.predicate(&matrix));
    if quantified {
        format!("(forall (k) {body})")
    } else {
        body
    }
}

/// The certificate as a header and one `# (...)` line per clause; each
/// line is a predicate in the input grammar.
pub fn write_certificate(net: &Net, cert: &Certificate) -> String {
    let names = Names::of(net);
    let mut out = format!("{CERTIFICATE_HEADER}\n");
    for c in &cert.clauses {
        writeln!(out, "# {}", blocked_text(&names, c.blocked(), c.is_quantified())).unwrap();
    }
    if cert.clauses.is_empty() {
        out.push_str("# true\n");
    }
    out
}

/// Parses a certificate written by [`write_certificate`], or a plain
/// predicate file.
pub fn parse_certificate(text: &str, net: &Net) -> Result<Predicate> {
    if !text.lines().any(|l| l.trim() == CERTIFICATE_HEADER) {
        let body: String = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect::<Vec<_>>().join("\n");
        if body.trim().is_empty() {
            return syntax(1, "empty certificate");
        }
        return Ok(parse_predicate(&body, net)?);
    }
    let mut parts = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == CERTIFICATE_HEADER {
            continue;
        }
        let Some(p) = line.strip_prefix('#') else {
            return syntax(idx + 1, "certificate lines start with `#`");
        };
        parts.push(parse_predicate(p, net).map_err(|e| IoError::Syntax { line: idx + 1, msg: e.to_string() })?);
    }
    Ok(Predicate::and(parts))
}

#[cfg(test)]
mod tests;
