//! Property directed reachability over a marked net.
//!
//! The engine keeps an over-approximated reachability sequence `F_0..F_k`.
//! `F_0` is the initial marking; every other frame is a set of clauses, and
//! clause sets shrink as the index grows. Each clause is stored once with the
//! highest frame it belongs to, so `F_i` is every clause whose level is at
//! least `i` and the property clauses sit at [`TOP`].
//!
//! Counter-examples to induction are generalized with one of three witness
//! generalizations (upward closure, hurdles, saturated hurdles) before they
//! are blocked. Obligations carry the firing suffix that leads from their
//! cube to the bad region so any model can be turned into a concrete trace.

mod certificate;

pub use certificate::{certificate_script, check_certificate, CertificateReport, CheckOutcome};

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encoding::{gen_hurdle, gen_saturated, gen_state, trans_rel, VarSpace};
use crate::formula::{
    negate, to_dnf, Atom, Clause, Cube, FormulaError, LinearExpr, Predicate, Rel, Var, DEFAULT_CUBE_BUDGET,
};
use crate::petri::{FiringSequence, Marking, Net, PetriError, TransitionId};
use crate::smt::{Logic, SatResult, Session, SmtError, SolverConfig, DEFAULT_QUERY_TIMEOUT};

/// Level of clauses that belong to every frame but `F_0`.
pub const TOP: usize = usize::MAX;

#[derive(Debug, Error)]
pub enum PdrError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("strategy `{0}` needs a monotonic bad region (a coverability property)")]
    NotMonotonic(Strategy),
    #[error("initial marking has {got} entries, net has {expected} places")]
    InitialArity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Upward closure of the witness marking.
    State,
    /// Hurdle of the witness suffix.
    Hurdle,
    /// Saturated hurdle of the primitive root of the witness suffix.
    Saturation,
    /// Upward closure for coverability, saturation on periodic suffixes,
    /// hurdles otherwise.
    Auto,
    /// Several strategies in parallel; the first verdict wins.
    Portfolio,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::State, Strategy::Hurdle, Strategy::Saturation, Strategy::Auto, Strategy::Portfolio];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::State => "state",
            Strategy::Hurdle => "hurdle",
            Strategy::Saturation => "saturation",
            Strategy::Auto => "auto",
            Strategy::Portfolio => "portfolio",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected state, hurdle, saturation, auto or portfolio)"))
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub strategy: Strategy,
    pub solver: SolverConfig,
    /// Wall-clock budget for the whole run.
    pub timeout: Option<Duration>,
    pub query_timeout: Duration,
    pub max_level: usize,
    /// Obligations handled by one minor iteration before giving up.
    pub max_obligations: usize,
    /// Cap on witness generalizations (minor iterations) for the whole run.
    pub max_generalizations: Option<usize>,
    /// Shrink unsat cores by deletion, one extra query per literal.
    pub minimize_cores: bool,
    /// Check the frame invariants after every minor iteration.
    pub validate_oars: bool,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            strategy: Strategy::Auto,
            solver: SolverConfig::default(),
            timeout: None,
            query_timeout: DEFAULT_QUERY_TIMEOUT,
            max_level: 1000,
            max_obligations: 10_000,
            max_generalizations: None,
            minimize_cores: false,
            validate_oars: false,
            cancel: None,
        }
    }
}

/// An inductive invariant that entails the property, as a clause set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub clauses: Vec<Clause>,
}

impl Certificate {
    pub fn to_predicate(&self) -> Predicate {
        Predicate::and(self.clauses.iter().map(Clause::to_predicate))
    }

    pub fn is_quantified(&self) -> bool {
        self.clauses.iter().any(Clause::is_quantified)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Invariant { certificate: Certificate },
    Reachable { trace: FiringSequence, final_marking: Marking },
    Unknown { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Invariant { .. } => "INVARIANT",
            Verdict::Reachable { .. } => "REACHABLE",
            Verdict::Unknown { .. } => "UNKNOWN",
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub strategy: Option<Strategy>,
    pub level: usize,
    pub clauses: usize,
    pub quantified_clauses: usize,
    pub obligations: u64,
    pub generalizations: usize,
    pub queries: u64,
    pub elapsed: Duration,
    /// Frame invariant violations seen by the validator.
    pub oars_violations: Vec<String>,
    /// Number of validator runs.
    pub oars_checks: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub stats: Stats,
}

/// Runs the configured strategy (or portfolio) on `m0` and `property`.
pub fn prove(net: &Net, m0: &Marking, property: &Predicate, options: &Options) -> Result<Outcome, PdrError> {
    if options.strategy == Strategy::Portfolio {
        return prove_portfolio(net, m0, property, options);
    }
    Engine::new(net, m0, property, options.clone())?.run()
}

/// Runs the concrete strategies in parallel and returns the first verdict.
/// When every strategy gives up, the last `Unknown` is returned.
pub fn prove_portfolio(net: &Net, m0: &Marking, property: &Predicate, options: &Options) -> Result<Outcome, PdrError> {
    let probe = Engine::new(net, m0, property, Options { strategy: Strategy::Hurdle, ..options.clone() })?;
    let mut strategies = vec![Strategy::Hurdle, Strategy::Saturation];
    if probe.is_monotonic() {
        strategies.insert(0, Strategy::State);
    }
    let cancel = options.cancel.clone().unwrap_or_default();
    let (tx, rx) = mpsc::channel();
    for s in &strategies {
        let opts = Options { strategy: *s, cancel: Some(cancel.clone()), ..options.clone() };
        let mut engine = Engine::new(net, m0, property, opts)?;
        let tx = tx.clone();
        // detached: a losing engine may sit in a solver call until its timeout
        std::thread::spawn(move || {
            let _ = tx.send(engine.run());
        });
    }
    drop(tx);
    let mut last = None;
    for r in rx {
        match r {
            Ok(o) if !o.verdict.is_unknown() => {
                cancel.store(true, Ordering::Relaxed);
                return Ok(o);
            }
            other => last = Some(other),
        }
    }
    last.expect("at least one strategy ran")
}

#[derive(Debug, Clone)]
enum Suffix {
    /// Every model fires this sequence into the root cube.
    Fixed(FiringSequence),
    /// A model at parameter `j` fires `period^(j+1)`, then `tail`, into the
    /// root cube.
    Saturated { period: FiringSequence, tail: FiringSequence },
}

#[derive(Debug, Clone)]
struct Obligation {
    cube: Cube,
    suffix: Suffix,
    /// Index of the bad cube the suffix ends in.
    root: usize,
}

#[derive(Debug)]
struct FrameClause {
    clause: Clause,
    level: usize,
}

enum Stop {
    Counterexample(FiringSequence),
    Unknown(String),
}

impl From<SmtError> for Stop {
    fn from(e: SmtError) -> Self {
        Stop::Unknown(format!("solver: {e}"))
    }
}

impl From<PetriError> for Stop {
    fn from(e: PetriError) -> Self {
        Stop::Unknown(e.to_string())
    }
}

type Flow<T> = Result<T, Stop>;

enum Raw {
    Sat(HashMap<String, i128>),
    Unsat(Vec<usize>),
}

fn read_result(s: &mut Session, space: &VarSpace, names: &[Option<String>], named: bool) -> Flow<Raw> {
    match s.check()? {
        SatResult::Unknown => Err(Stop::Unknown("solver answered unknown".into())),
        SatResult::Sat => {
            let mut syms = space.current_symbols();
            syms.extend(space.next_symbols());
            Ok(Raw::Sat(s.get_model(&syms)?))
        }
        SatResult::Unsat => {
            let core = if named {
                let core = s.get_core()?;
                names
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| n.as_ref().is_some_and(|n| core.contains(n)))
                    .map(|(i, _)| i)
                    .collect()
            } else {
                Vec::new()
            };
            Ok(Raw::Unsat(core))
        }
    }
}

enum Answer {
    Sat {
        m: Marking,
        next: Marking,
    },
    /// Indices (into the target cube) of the literals in the core.
    Unsat {
        core: Vec<usize>,
    },
}

fn top_symbol() -> &'static str {
    "act.top"
}

fn level_symbol(level: usize) -> String {
    format!("act{level}")
}

/// One run of the engine with a fixed generalization strategy.
pub struct Engine {
    net: Net,
    m0: Marking,
    bad: Vec<Cube>,
    monotonic: bool,
    opts: Options,
    space: VarSpace,
    session: Option<Session>,
    /// Reset before every query; holds only flat quantified problems.
    quantified: Option<Session>,
    clauses: Vec<FrameClause>,
    index: HashMap<Cube, usize>,
    k: usize,
    levels: usize,
    skolems: u32,
    started: Instant,
    stats: Stats,
}

impl Engine {
    pub fn new(net: &Net, m0: &Marking, property: &Predicate, opts: Options) -> Result<Engine, PdrError> {
        if m0.0.len() != net.num_places() {
            return Err(PdrError::InitialArity { expected: net.num_places(), got: m0.0.len() });
        }
        if property.is_quantified() {
            return Err(FormulaError::Quantified.into());
        }
        let bad = to_dnf(&negate(property), DEFAULT_CUBE_BUDGET)?;
        let monotonic = bad.iter().all(Cube::is_monotonic);
        if opts.strategy == Strategy::State && !monotonic {
            return Err(PdrError::NotMonotonic(Strategy::State));
        }
        Ok(Engine {
            net: net.clone(),
            m0: m0.clone(),
            bad,
            monotonic,
            space: VarSpace::for_net(net),
            session: None,
            quantified: None,
            clauses: Vec::new(),
            index: HashMap::new(),
            k: 0,
            levels: 0,
            skolems: 0,
            started: Instant::now(),
            stats: Stats { strategy: Some(opts.strategy), ..Stats::default() },
            opts,
        })
    }

    /// Whether the bad region is upward closed (syntactically).
    pub fn is_monotonic(&self) -> bool {
        self.monotonic
    }

    /// The bad region as cubes.
    pub fn bad_cubes(&self) -> &[Cube] {
        &self.bad
    }

    /// Current number of frames beyond `F_0`.
    pub fn level(&self) -> usize {
        self.k
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    /// `F_i` as a predicate over the current places.
    pub fn frame(&self, i: usize) -> Predicate {
        if i == 0 {
            return self.init_pred();
        }
        Predicate::and(self.frame_clauses(i).into_iter().map(|c| c.to_predicate()))
    }

    /// The clauses of `F_i` for `i >= 1`.
    pub fn frame_clauses(&self, i: usize) -> Vec<&Clause> {
        self.clauses.iter().filter(|c| c.level >= i).map(|c| &c.clause).collect()
    }

    fn init_pred(&self) -> Predicate {
        Predicate::and(
            self.m0
                .0
                .iter()
                .enumerate()
                .map(|(i, &v)| Atom::compare(LinearExpr::var(Var::Place(i)), Rel::Eq, LinearExpr::constant(v as i128))),
        )
    }

    /// Runs to a verdict. Only a solver that cannot be started is an error;
    /// every later failure becomes an `Unknown` verdict.
    pub fn run(&mut self) -> Result<Outcome, PdrError> {
        self.started = Instant::now();
        if self.session.is_none() {
            self.open()?;
        }
        let verdict = match self.prove() {
            Ok(v) => v,
            Err(Stop::Counterexample(trace)) => self.reachable(trace),
            Err(Stop::Unknown(reason)) => Verdict::Unknown { reason },
        };
        self.stats.level = self.k;
        self.stats.clauses = self.clauses.iter().filter(|c| c.level != TOP).count();
        self.stats.quantified_clauses = self.clauses.iter().filter(|c| c.clause.is_quantified()).count();
        self.stats.queries =
            [&self.session, &self.quantified].iter().filter_map(|s| s.as_ref()).map(Session::queries).sum();
        self.stats.elapsed = self.started.elapsed();
        Ok(Outcome { verdict, stats: self.stats.clone() })
    }

    fn reachable(&self, trace: FiringSequence) -> Verdict {
        match self.net.fire(&self.m0, &trace) {
            Ok(Some(end)) if self.bad.iter().any(|c| c.eval(&end)) => Verdict::Reachable { trace, final_marking: end },
            _ => Verdict::Unknown { reason: "internal: counter-example trace does not replay".into() },
        }
    }

    fn prove(&mut self) -> Flow<Verdict> {
        // depth 0 and 1 by direct evaluation
        if self.bad.iter().any(|c| c.eval(&self.m0)) {
            return Err(Stop::Counterexample(FiringSequence::default()));
        }
        for t in self.net.transition_ids() {
            if let Some(next) = self.net.fire_one(&self.m0, t)? {
                if self.bad.iter().any(|c| c.eval(&next)) {
                    return Err(Stop::Counterexample(FiringSequence(vec![t])));
                }
            }
        }
        if self.bad.is_empty() {
            return Ok(Verdict::Invariant { certificate: Certificate { clauses: Vec::new() } });
        }
        for c in self.bad.clone() {
            self.add_clause(c.negate(), TOP)?;
        }
        self.k = 1;
        loop {
            if self.k > self.opts.max_level {
                return Err(Stop::Unknown(format!("level budget {} exhausted", self.opts.max_level)));
            }
            log::debug!("level {} ({} clauses)", self.k, self.clauses.len());
            self.strengthen()?;
            self.propagate()?;
            if let Some(i) = (1..=self.k).find(|&i| !self.clauses.iter().any(|c| c.level == i)) {
                let clauses = self.frame_clauses(i).into_iter().cloned().collect();
                return Ok(Verdict::Invariant { certificate: Certificate { clauses } });
            }
            self.k += 1;
        }
    }

    fn open(&mut self) -> Result<(), PdrError> {
        let mut s = Session::open(&self.opts.solver, Logic::QfLia)?;
        s.declare_places(&self.space)?;
        for sym in self.space.next_symbols() {
            s.declare_nat(&sym)?;
        }
        s.assert_pred(&trans_rel(&self.net)?, &self.space, None)?;
        s.declare_bool(top_symbol())?;
        self.session = Some(s);
        Ok(())
    }

    fn session(&mut self) -> &mut Session {
        self.session.as_mut().expect("session opened before use")
    }

    fn ensure_level(&mut self, level: usize) -> Flow<()> {
        while self.levels < level {
            self.levels += 1;
            let l = self.levels;
            let sym = level_symbol(l);
            let s = self.session();
            s.assert_implies(&sym, top_symbol())?;
            if l > 1 {
                s.assert_implies(&level_symbol(l - 1), &sym)?;
            }
        }
        Ok(())
    }

    fn guard(&mut self, level: usize) -> Flow<String> {
        if level == TOP {
            return Ok(top_symbol().to_string());
        }
        self.ensure_level(level)?;
        Ok(level_symbol(level))
    }

    /// Adds `clause` to `F_1..F_level`, or raises the level of a copy
    /// already present.
    fn add_clause(&mut self, clause: Clause, level: usize) -> Flow<()> {
        if let Some(&i) = self.index.get(clause.blocked()) {
            if self.clauses[i].level >= level {
                return Ok(());
            }
            self.clauses[i].level = level;
        } else {
            log::trace!("block {} up to level {level}", clause.blocked());
            self.index.insert(clause.blocked().clone(), self.clauses.len());
            self.clauses.push(FrameClause { clause: clause.clone(), level });
        }
        if clause.is_quantified() {
            // only ever asserted in flat problems
            return Ok(());
        }
        let g = self.guard(level)?;
        let space = self.space.clone();
        self.session().assert_guarded(&g, &clause.to_predicate(), &space)?;
        Ok(())
    }

    fn budget(&mut self) -> Flow<Duration> {
        if self.opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Stop::Unknown("cancelled".into()));
        }
        let mut limit = self.opts.query_timeout;
        if let Some(total) = self.opts.timeout {
            let left = total.saturating_sub(self.started.elapsed());
            if left.is_zero() {
                return Err(Stop::Unknown(format!("time budget {total:?} exhausted")));
            }
            limit = limit.min(left);
        }
        Ok(limit)
    }

    /// Whether a query on `F_level` must go to the quantified session.
    fn frame_quantified(&self, level: usize) -> bool {
        level > 0 && self.clauses.iter().any(|c| c.level >= level && c.clause.is_quantified())
    }

    /// `F_level(p) /\ T(p, p') [/\ not avoid(p)] /\ target(p')`, with
    /// `F_0` the initial marking. With `named`, an unsat answer carries the
    /// core over the target literals.
    ///
    /// Queries that involve quantifiers never use solver cores: z3 gives up
    /// on quantified problems once named assertions or scopes are in play,
    /// so there the core is found by deleting literals one query at a time.
    fn query(&mut self, level: usize, avoid: Option<&Cube>, target: &Cube, named: bool) -> Flow<Answer> {
        let quantified =
            target.is_quantified() || avoid.is_some_and(Cube::is_quantified) || self.frame_quantified(level);
        if !named || !quantified {
            return self.query_raw(level, avoid, target, named);
        }
        let answer = self.query_raw(level, avoid, target, false)?;
        if let Answer::Sat { .. } = answer {
            return Ok(answer);
        }
        let mut keep: Vec<usize> = (0..target.len()).collect();
        let mut i = 0;
        while i < keep.len() && keep.len() > 1 {
            let trial: Vec<usize> = keep.iter().copied().filter(|&j| j != keep[i]).collect();
            match self.query_raw(level, avoid, &target.restrict(&trial), false)? {
                Answer::Unsat { .. } => keep = trial,
                Answer::Sat { .. } => i += 1,
            }
        }
        Ok(Answer::Unsat { core: keep })
    }

    fn query_raw(&mut self, level: usize, avoid: Option<&Cube>, target: &Cube, named: bool) -> Flow<Answer> {
        self.skolems += 1;
        let sk = self.skolems;
        let plain: Vec<Predicate> = avoid.map(|a| a.negate().to_predicate()).into_iter().collect();
        let lits: Vec<Predicate> =
            target.atoms().iter().map(|a| Cube::new(vec![a.clone()]).skolemize(sk).primed().to_predicate()).collect();
        let quantified = target.is_quantified() || avoid.is_some_and(Cube::is_quantified);
        match self.solve(level, &plain, &lits, named, quantified)? {
            Raw::Unsat(core) => Ok(Answer::Unsat { core }),
            Raw::Sat(vals) => {
                let read = |names: Vec<String>| -> Option<Marking> {
                    names.iter().map(|n| u64::try_from(vals[n]).ok()).collect::<Option<Vec<_>>>().map(Marking)
                };
                match (read(self.space.current_symbols()), read(self.space.next_symbols())) {
                    (Some(m), Some(next)) => Ok(Answer::Sat { m, next }),
                    _ => Err(Stop::Unknown("solver model has a negative place value".into())),
                }
            }
        }
    }

    /// Whether `F_level /\ cube` is satisfiable, on current places.
    fn meets(&mut self, level: usize, cube: &Cube) -> Flow<bool> {
        self.skolems += 1;
        let body = cube.skolemize(self.skolems).to_predicate();
        Ok(matches!(self.solve(level, &[body], &[], false, cube.is_quantified())?, Raw::Sat(_)))
    }

    /// Checks `F_level /\ T /\ plain /\ lits`. Quantifier-free problems use
    /// the incremental session inside a scope; anything quantified is sent
    /// as a fresh flat problem to the quantified session.
    fn solve(
        &mut self,
        level: usize,
        plain: &[Predicate],
        lits: &[Predicate],
        named: bool,
        quantified: bool,
    ) -> Flow<Raw> {
        let limit = self.budget()?;
        let space = self.space.clone();
        let init = self.init_pred();
        let flat = quantified || self.frame_quantified(level);
        if flat {
            let frame: Vec<Predicate> = if level == 0 {
                vec![init]
            } else {
                self.frame_clauses(level).into_iter().map(Clause::to_predicate).collect()
            };
            let trans = trans_rel(&self.net)?;
            if self.quantified.is_none() {
                self.quantified = Some(Session::open(&self.opts.solver, Logic::Lia)?);
            }
            let s = self.quantified.as_mut().unwrap();
            s.set_timeout(limit);
            s.reset()?;
            s.declare_places(&space)?;
            s.assert_pred(&trans, &space, None)?;
            for p in frame.iter().chain(plain).chain(lits) {
                s.assert_pred(p, &space, None)?;
            }
            return read_result(s, &space, &[], false);
        }
        let guard = if level == 0 { None } else { Some(self.guard(level)?) };
        let s = self.session.as_mut().expect("session opened before use");
        s.set_timeout(limit);
        s.push()?;
        match guard {
            None => {
                s.assert_pred(&init, &space, None)?;
            }
            Some(g) => s.assert_symbol(&g)?,
        }
        for p in plain {
            s.assert_pred(p, &space, None)?;
        }
        let mut names = Vec::new();
        for p in lits {
            names.push(s.assert_pred(p, &space, named.then_some("l"))?);
        }
        let r = read_result(s, &space, &names, named)?;
        s.pop()?;
        Ok(r)
    }

    /// The transition fired between `m` and `next`; `None` for a stutter.
    fn recover(&self, m: &Marking, next: &Marking) -> Flow<Option<TransitionId>> {
        for t in self.net.transition_ids() {
            if self.net.fire_one(m, t)?.as_ref() == Some(next) {
                return Ok(Some(t));
            }
        }
        if m == next {
            Ok(None)
        } else {
            Err(Stop::Unknown("internal: solver model is not a step of the net".into()))
        }
    }

    fn concretize(&self, ob: &Obligation, m: &Marking) -> Flow<FiringSequence> {
        match &ob.suffix {
            Suffix::Fixed(seq) => Ok(seq.clone()),
            Suffix::Saturated { period, tail } => match ob.cube.param_witness(m) {
                Some(j) => Ok(period.repeat(j as usize + 1).concat(tail)),
                None => Err(Stop::Unknown("internal: marking outside its saturated obligation".into())),
            },
        }
    }

    /// Witness generalization of `m`, which fires `t` and then the suffix
    /// of `parent` (from `next`) into bad cube `root`.
    fn generalize(
        &mut self,
        m: &Marking,
        t: TransitionId,
        parent: Option<(&Obligation, &Marking)>,
        root: usize,
    ) -> Flow<Obligation> {
        if let Some(cap) = self.opts.max_generalizations {
            if self.stats.generalizations >= cap {
                return Err(Stop::Unknown(format!("minor iteration cap {cap} reached")));
            }
        }
        self.stats.generalizations += 1;
        let step = FiringSequence(vec![t]);
        let seq = match parent {
            Some((ob, next)) => step.concat(&self.concretize(ob, next)?),
            None => step.clone(),
        };
        let bad = &self.bad[root];
        let hurdle = |seq: FiringSequence| -> Flow<Obligation> {
            let cube = gen_hurdle(&self.net, &seq, bad)?
                .and_then(|c| c.simplify())
                .ok_or_else(|| Stop::Unknown("internal: empty hurdle generalization".into()))?;
            Ok(Obligation { cube, suffix: Suffix::Fixed(seq), root })
        };
        // every model of `target` fires `tail` into the root cube
        let saturate = |period: FiringSequence, target: &Cube, tail: FiringSequence| -> Flow<Obligation> {
            let cube = gen_saturated(&self.net, &period, target)?
                .and_then(|c| c.simplify())
                .ok_or_else(|| Stop::Unknown("internal: empty saturated generalization".into()))?;
            if !cube.is_quantified() {
                return Ok(Obligation { cube, suffix: Suffix::Fixed(period.concat(&tail)), root });
            }
            Ok(Obligation { cube, suffix: Suffix::Saturated { period, tail }, root })
        };
        let empty = FiringSequence::default();
        let ob = match self.opts.strategy {
            Strategy::State => Obligation { cube: gen_state(m), suffix: Suffix::Fixed(seq), root },
            Strategy::Hurdle => hurdle(seq)?,
            Strategy::Saturation => {
                let (rho, _) = seq.primitive_root();
                if self.net.displacement(&rho)?.is_zero() {
                    hurdle(seq)?
                } else {
                    saturate(rho, bad, empty)?
                }
            }
            Strategy::Auto | Strategy::Portfolio if self.monotonic => {
                Obligation { cube: gen_state(m), suffix: Suffix::Fixed(seq), root }
            }
            Strategy::Auto | Strategy::Portfolio => {
                let (rho, j) = seq.primitive_root();
                let shifting = !self.net.transition_displacement(t)?.is_zero();
                match parent {
                    // the chain keeps prepending the same transition
                    Some((ob, _)) if shifting && !ob.cube.is_quantified() => match &ob.suffix {
                        Suffix::Fixed(tail) if tail.0.first() == Some(&t) => saturate(step, &ob.cube, tail.clone())?,
                        _ => hurdle(seq)?,
                    },
                    _ if j >= 2 && !self.net.displacement(&rho)?.is_zero() => saturate(rho, bad, empty)?,
                    _ => hurdle(seq)?,
                }
            }
        };
        if !ob.cube.eval(m) {
            return Err(Stop::Unknown("internal: generalization lost its witness".into()));
        }
        Ok(ob)
    }

    fn strengthen(&mut self) -> Flow<()> {
        let k = self.k;
        for root in 0..self.bad.len() {
            loop {
                let target = self.bad[root].clone();
                let (m, next) = match self.query(k, None, &target, false)? {
                    Answer::Unsat { .. } => break,
                    Answer::Sat { m, next } => (m, next),
                };
                let Some(t) = self.recover(&m, &next)? else {
                    return Err(Stop::Unknown("internal: frame meets the bad region".into()));
                };
                let ob = self.generalize(&m, t, None, root)?;
                let n = self.inductively_generalize(&ob, k as isize - 2)?;
                self.push_generalization(ob, n + 1)?;
                if self.opts.validate_oars {
                    self.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Blocks `ob.cube` as high as possible and returns the level `i` such
    /// that its clause was added to `F_1..F_{i+1}`.
    fn inductively_generalize(&mut self, ob: &Obligation, min: isize) -> Flow<usize> {
        if ob.cube.eval(&self.m0) {
            let trace = self.concretize(ob, &self.m0.clone())?;
            return Err(Stop::Counterexample(trace));
        }
        if min < 0 {
            if let Answer::Sat { m, next } = self.query(0, None, &ob.cube, false)? {
                return Err(self.counterexample(ob, &m, &next));
            }
        }
        let start = (min + 1).max(1) as usize;
        let mut known: Option<Vec<usize>> = None;
        for i in start..=self.k {
            match self.query(i, Some(&ob.cube), &ob.cube, true)? {
                Answer::Sat { .. } => return self.generate_clause(ob, i - 1, known),
                Answer::Unsat { core } => known = Some(core),
            }
        }
        self.generate_clause(ob, self.k, known)
    }

    fn counterexample(&self, ob: &Obligation, m0: &Marking, next: &Marking) -> Stop {
        let step = match self.recover(m0, next) {
            Ok(s) => s,
            Err(e) => return e,
        };
        match self.concretize(ob, next) {
            Ok(rest) => Stop::Counterexample(FiringSequence(step.into_iter().collect()).concat(&rest)),
            Err(e) => e,
        }
    }

    /// Learns a clause blocking `ob.cube` relative to `F_level`. If the
    /// relative induction query is satisfiable there, lower levels are tried;
    /// satisfiable at `F_0` is a counter-example.
    fn generate_clause(&mut self, ob: &Obligation, mut level: usize, known: Option<Vec<usize>>) -> Flow<usize> {
        let mut known = known;
        loop {
            let core = match known.take() {
                Some(core) => core,
                None => match self.query(level, Some(&ob.cube), &ob.cube, true)? {
                    Answer::Unsat { core } => core,
                    Answer::Sat { m, next } => {
                        if level == 0 {
                            return Err(self.counterexample(ob, &m, &next));
                        }
                        level -= 1;
                        continue;
                    }
                },
            };
            let blocked = self.shrink(ob, level, core)?;
            self.add_clause(blocked.negate(), level + 1)?;
            return Ok(level);
        }
    }

    /// The sub-cube of `ob.cube` named by `core`, optionally minimized, and
    /// grown back until it excludes the initial marking.
    fn shrink(&mut self, ob: &Obligation, level: usize, core: Vec<usize>) -> Flow<Cube> {
        let s = &ob.cube;
        let mut keep: BTreeSet<usize> = core.into_iter().collect();
        if self.opts.minimize_cores {
            for i in keep.clone() {
                if keep.len() == 1 {
                    break;
                }
                let trial: Vec<usize> = keep.iter().copied().filter(|&j| j != i).collect();
                if let Answer::Unsat { .. } = self.query(level, Some(s), &s.restrict(&trial), false)? {
                    keep.remove(&i);
                }
            }
        }
        let restrict = |keep: &BTreeSet<usize>| s.restrict(&keep.iter().copied().collect::<Vec<_>>());
        let mut cube = restrict(&keep);
        if cube.eval(&self.m0) {
            // prefer a single literal that is false initially
            let single = (0..s.len()).find(|&i| !Cube::new(vec![s.atoms()[i].clone()]).eval(&self.m0));
            if let Some(i) = single {
                keep.insert(i);
                cube = restrict(&keep);
            }
            for i in 0..s.len() {
                if !cube.eval(&self.m0) {
                    break;
                }
                keep.insert(i);
                cube = restrict(&keep);
            }
        }
        Ok(cube)
    }

    fn push_generalization(&mut self, first: Obligation, level: usize) -> Flow<()> {
        let mut pool = vec![first];
        let mut queue = BinaryHeap::new();
        queue.push(Reverse((level, 0usize)));
        let mut handled = 0usize;
        while let Some(Reverse((n, id))) = queue.pop() {
            if n > self.k {
                return Ok(());
            }
            handled += 1;
            self.stats.obligations += 1;
            if handled > self.opts.max_obligations {
                return Err(Stop::Unknown(format!("obligation budget {} exhausted", self.opts.max_obligations)));
            }
            let ob = pool[id].clone();
            match self.query(n, None, &ob.cube, false)? {
                Answer::Sat { m, next } => {
                    let Some(t) = self.recover(&m, &next)? else {
                        return Err(Stop::Unknown("internal: obligation meets its own frame".into()));
                    };
                    let pred = self.generalize(&m, t, Some((&ob, &next)), ob.root)?;
                    let l = self.inductively_generalize(&pred, n as isize - 2)?;
                    pool.push(pred);
                    queue.push(Reverse((l + 1, pool.len() - 1)));
                    queue.push(Reverse((n, id)));
                }
                Answer::Unsat { .. } => {
                    let l = self.inductively_generalize(&ob, n as isize)?;
                    queue.push(Reverse((l + 1, id)));
                }
            }
        }
        Ok(())
    }

    fn propagate(&mut self) -> Flow<()> {
        for i in 1..=self.k {
            let at: Vec<usize> = (0..self.clauses.len()).filter(|&j| self.clauses[j].level == i).collect();
            for j in at {
                let blocked = self.clauses[j].clause.blocked().clone();
                if let Answer::Unsat { .. } = self.query(i, None, &blocked, false)? {
                    let clause = self.clauses[j].clause.clone();
                    self.add_clause(clause, i + 1)?;
                }
            }
        }
        Ok(())
    }

    /// Checks the frame invariants and records every violation.
    fn validate(&mut self) -> Flow<()> {
        self.stats.oars_checks += 1;
        let k = self.k;
        let mut violations = Vec::new();
        for i in 1..k {
            let lower: BTreeSet<&Clause> = self.frame_clauses(i).into_iter().collect();
            if self.frame_clauses(i + 1).iter().any(|c| !lower.contains(c)) {
                violations.push(format!("containment fails between F{i} and F{}", i + 1));
            }
        }
        for c in &self.clauses {
            if c.clause.blocked().eval(&self.m0) {
                violations.push(format!("initial marking violates a clause of level {}", c.level));
            }
        }
        for i in 1..=k {
            for b in self.bad.clone() {
                if self.meets(i, &b)? {
                    violations.push(format!("F{i} meets the bad region"));
                }
            }
        }
        for i in 0..k {
            let next: Vec<Cube> = self.frame_clauses(i + 1).into_iter().map(|c| c.blocked().clone()).collect();
            for b in next {
                if let Answer::Sat { .. } = self.query(i, None, &b, false)? {
                    violations.push(format!("consecution fails from F{i} for clause not({b})"));
                }
            }
        }
        for v in &violations {
            log::warn!("frame invariant violated: {v}");
        }
        self.stats.oars_violations.extend(violations);
        Ok(())
    }
}
