//! Linear constraints over place variables.
//!
//! Every variable ranges over the naturals: places, their primed copies, the
//! iteration parameter `k` of saturated generalizations and the Skolem
//! constants that replace it inside solver queries. Atoms are kept in a
//! canonical form `sum(a_i * x_i) rel b` with gcd-reduced coefficients whose
//! first (smallest variable) coefficient is positive, so that syntactic
//! equality of atoms coincides with equality of the constraint.

mod parse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::petri::{Delta, Marking, Net};

pub use parse::{parse_predicate, parse_predicate_with};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("non-linear term at offset {0}")]
    NonLinear(usize),
    #[error("nested quantifiers are not supported")]
    NestedQuantifier,
    #[error("operation requires a quantifier-free predicate")]
    Quantified,
    #[error("disjunctive normal form exceeds the budget of {0} cubes")]
    CubeBudget(usize),
}

pub type Result<T> = std::result::Result<T, FormulaError>;

/// Default cap on the number of cubes produced by [`to_dnf`].
pub const DEFAULT_CUBE_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Marking of a place before a step.
    Place(usize),
    /// Marking of a place after a step.
    Next(usize),
    /// The bound iteration parameter of a quantified subtree.
    Param,
    /// A solver constant standing for an instantiated parameter.
    Skolem(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LinearExpr {
    coeffs: BTreeMap<Var, i128>,
    constant: i128,
}

impl LinearExpr {
    pub fn constant(c: i128) -> Self {
        LinearExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self::term(1, v)
    }

    pub fn term(a: i128, v: Var) -> Self {
        let mut e = LinearExpr::default();
        e.add_term(a, v);
        e
    }

    pub fn add_term(&mut self, a: i128, v: Var) {
        if a == 0 {
            return;
        }
        let c = self.coeffs.entry(v).or_insert(0);
        *c += a;
        if *c == 0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn add_constant(&mut self, c: i128) {
        self.constant += c;
    }

    pub fn plus(mut self, other: &LinearExpr) -> Self {
        for (&v, &a) in &other.coeffs {
            self.add_term(a, v);
        }
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, k: i128) -> Self {
        if k == 0 {
            return LinearExpr::default();
        }
        for a in self.coeffs.values_mut() {
            *a *= k;
        }
        self.constant *= k;
        self
    }

    pub fn minus(self, other: &LinearExpr) -> Self {
        self.plus(&other.clone().scaled(-1))
    }

    pub fn coeffs(&self) -> &BTreeMap<Var, i128> {
        &self.coeffs
    }

    pub fn constant_term(&self) -> i128 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Replaces variables according to `f`; unmapped variables are kept.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<LinearExpr>) -> LinearExpr {
        let mut out = LinearExpr::constant(self.constant);
        for (&v, &a) in &self.coeffs {
            match f(v) {
                Some(e) => out = out.plus(&e.scaled(a)),
                None => out.add_term(a, v),
            }
        }
        out
    }

    pub fn eval(&self, env: &dyn Fn(Var) -> Option<i128>) -> Option<i128> {
        let mut acc = self.constant;
        for (&v, &a) in &self.coeffs {
            acc += a * env(v)?;
        }
        Some(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Le,
    Ge,
}

/// `expr rel bound`, canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    expr: LinearExpr,
    rel: Rel,
    bound: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Atom {
    /// Builds `lhs rel rhs`, normalized. Constant comparisons fold to
    /// `True`/`False`.
    pub fn compare(lhs: LinearExpr, rel: Rel, rhs: LinearExpr) -> Predicate {
        let diff = lhs.minus(&rhs);
        let bound = -diff.constant;
        let mut expr = diff;
        expr.constant = 0;
        Self::normalize(expr, rel, bound)
    }

    fn normalize(mut expr: LinearExpr, mut rel: Rel, mut bound: i128) -> Predicate {
        if expr.coeffs.is_empty() {
            let holds = match rel {
                Rel::Eq => 0 == bound,
                Rel::Le => 0 <= bound,
                Rel::Ge => 0 >= bound,
            };
            return Predicate::constant(holds);
        }
        let g = expr.coeffs.values().fold(0, |g, &a| gcd(g, a));
        if g > 1 {
            for a in expr.coeffs.values_mut() {
                *a /= g;
            }
            bound = match rel {
                Rel::Eq if bound % g != 0 => return Predicate::False,
                Rel::Eq => bound / g,
                Rel::Le => bound.div_euclid(g),
                Rel::Ge => -((-bound).div_euclid(g)),
            };
        }
        if expr.coeffs.values().next().is_some_and(|&a| a < 0) {
            for a in expr.coeffs.values_mut() {
                *a = -*a;
            }
            bound = -bound;
            rel = match rel {
                Rel::Eq => Rel::Eq,
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
            };
        }
        Predicate::Atom(Atom { expr, rel, bound })
    }

    pub fn expr(&self) -> &LinearExpr {
        &self.expr
    }

    pub fn rel(&self) -> Rel {
        self.rel
    }

    pub fn bound(&self) -> i128 {
        self.bound
    }

    /// Integer negation: `!(e <= b)` is `e >= b + 1`, and an equality splits
    /// into two strict sides.
    pub fn negate(&self) -> Vec<Atom> {
        let with = |rel, bound| Atom { expr: self.expr.clone(), rel, bound };
        match self.rel {
            Rel::Le => vec![with(Rel::Ge, self.bound + 1)],
            Rel::Ge => vec![with(Rel::Le, self.bound - 1)],
            Rel::Eq => vec![with(Rel::Le, self.bound - 1), with(Rel::Ge, self.bound + 1)],
        }
    }

    pub fn eval(&self, env: &dyn Fn(Var) -> Option<i128>) -> Option<bool> {
        let v = self.expr.eval(env)?;
        Some(match self.rel {
            Rel::Eq => v == self.bound,
            Rel::Le => v <= self.bound,
            Rel::Ge => v >= self.bound,
        })
    }

    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<LinearExpr>) -> Predicate {
        Atom::compare(self.expr.substitute(f), self.rel, LinearExpr::constant(self.bound))
    }

    pub fn has_var(&self, pred: impl Fn(Var) -> bool) -> bool {
        self.expr.coeffs.keys().any(|&v| pred(v))
    }

    /// Upward closed: a `>=` atom with nonnegative coefficients.
    pub fn is_monotonic(&self) -> bool {
        self.rel == Rel::Ge && self.expr.coeffs.values().all(|&a| a >= 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    True,
    False,
    Atom(Atom),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
    /// `exists k >= 0`, binding [`Var::Param`].
    Exists(Box<Predicate>),
    /// `forall k >= 0`, binding [`Var::Param`].
    Forall(Box<Predicate>),
}

impl Predicate {
    pub fn constant(b: bool) -> Self {
        if b {
            Predicate::True
        } else {
            Predicate::False
        }
    }

    /// Flattening conjunction with constant folding.
    pub fn and(parts: impl IntoIterator<Item = Predicate>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Predicate::True => {}
                Predicate::False => return Predicate::False,
                Predicate::And(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Predicate::True,
            1 => out.pop().unwrap(),
            _ => Predicate::And(out),
        }
    }

    /// Flattening disjunction with constant folding.
    pub fn or(parts: impl IntoIterator<Item = Predicate>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Predicate::False => {}
                Predicate::True => return Predicate::True,
                Predicate::Or(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Predicate::False,
            1 => out.pop().unwrap(),
            _ => Predicate::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Predicate) -> Self {
        match p {
            Predicate::True => Predicate::False,
            Predicate::False => Predicate::True,
            Predicate::Not(inner) => *inner,
            p => Predicate::Not(Box::new(p)),
        }
    }

    pub fn is_quantified(&self) -> bool {
        match self {
            Predicate::Exists(_) | Predicate::Forall(_) => true,
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().any(Predicate::is_quantified),
            Predicate::Not(p) => p.is_quantified(),
            _ => false,
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Predicate::Atom(a) => out.push(a),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.collect_atoms(out)),
            Predicate::Not(p) | Predicate::Exists(p) | Predicate::Forall(p) => p.collect_atoms(out),
            _ => {}
        }
    }

    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<LinearExpr>) -> Predicate {
        match self {
            Predicate::True | Predicate::False => self.clone(),
            Predicate::Atom(a) => a.substitute(f),
            Predicate::And(ps) => Predicate::and(ps.iter().map(|p| p.substitute(f))),
            Predicate::Or(ps) => Predicate::or(ps.iter().map(|p| p.substitute(f))),
            Predicate::Not(p) => Predicate::not(p.substitute(f)),
            Predicate::Exists(p) => Predicate::Exists(Box::new(p.substitute(f))),
            Predicate::Forall(p) => Predicate::Forall(Box::new(p.substitute(f))),
        }
    }

    /// Renames every place variable to its primed copy.
    pub fn primed(&self) -> Predicate {
        self.substitute(&|v| match v {
            Var::Place(i) => Some(LinearExpr::var(Var::Next(i))),
            _ => None,
        })
    }

    /// Truth value under `env`. Quantified subtrees are decided by scanning
    /// `k` in `0..=k_bound`, which is exact only when the witness (or the
    /// counter-example) lies below the bound.
    pub fn eval_with(&self, env: &dyn Fn(Var) -> Option<i128>, k_bound: u64) -> Option<bool> {
        Some(match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Atom(a) => a.eval(env)?,
            Predicate::And(ps) => {
                for p in ps {
                    if !p.eval_with(env, k_bound)? {
                        return Some(false);
                    }
                }
                true
            }
            Predicate::Or(ps) => {
                for p in ps {
                    if p.eval_with(env, k_bound)? {
                        return Some(true);
                    }
                }
                false
            }
            Predicate::Not(p) => !p.eval_with(env, k_bound)?,
            Predicate::Exists(p) | Predicate::Forall(p) => {
                let universal = matches!(self, Predicate::Forall(_));
                for k in 0..=k_bound {
                    let inner = |v: Var| if v == Var::Param { Some(k as i128) } else { env(v) };
                    let holds = p.eval_with(&inner, k_bound)?;
                    if holds != universal {
                        return Some(!universal);
                    }
                }
                universal
            }
        })
    }
}

/// Default search bound for quantified subtrees in [`eval`].
pub const DEFAULT_K_BOUND: u64 = 256;

pub fn marking_env(m: &Marking) -> impl Fn(Var) -> Option<i128> + '_ {
    move |v| match v {
        Var::Place(i) => m.0.get(i).map(|&x| x as i128),
        _ => None,
    }
}

/// Truth of `pred` at marking `m`.
pub fn eval(pred: &Predicate, m: &Marking) -> bool {
    pred.eval_with(&marking_env(m), DEFAULT_K_BOUND).unwrap_or(false)
}

/// Negation-normal form of `!pred` (or of `pred` when `negated` is false).
fn nnf(pred: &Predicate, negated: bool) -> Predicate {
    match (pred, negated) {
        (Predicate::True, false) | (Predicate::False, true) => Predicate::True,
        (Predicate::True, true) | (Predicate::False, false) => Predicate::False,
        (Predicate::Atom(a), false) => Predicate::Atom(a.clone()),
        (Predicate::Atom(a), true) => Predicate::or(a.negate().into_iter().map(Predicate::Atom)),
        (Predicate::And(ps), false) | (Predicate::Or(ps), true) => Predicate::and(ps.iter().map(|p| nnf(p, negated))),
        (Predicate::Or(ps), false) | (Predicate::And(ps), true) => Predicate::or(ps.iter().map(|p| nnf(p, negated))),
        (Predicate::Not(p), _) => nnf(p, !negated),
        (Predicate::Exists(p), false) | (Predicate::Forall(p), true) => Predicate::Exists(Box::new(nnf(p, negated))),
        (Predicate::Forall(p), false) | (Predicate::Exists(p), true) => Predicate::Forall(Box::new(nnf(p, negated))),
    }
}

/// Negation pushed down to the atoms.
pub fn negate(pred: &Predicate) -> Predicate {
    nnf(pred, true)
}

pub fn to_nnf(pred: &Predicate) -> Predicate {
    nnf(pred, false)
}

/// Disjunctive normal form of a quantifier-free predicate, as simplified
/// cubes. Unsatisfiable cubes are dropped, so `false` yields no cube and a
/// valid predicate yields one empty cube.
pub fn to_dnf(pred: &Predicate, budget: usize) -> Result<Vec<Cube>> {
    if pred.is_quantified() {
        return Err(FormulaError::Quantified);
    }
    let raw = dnf_rec(&to_nnf(pred), budget)?;
    let mut out: Vec<Cube> = Vec::new();
    for atoms in raw {
        if let Some(c) = Cube::new(atoms).simplify() {
            if c.is_empty() {
                return Ok(vec![c]);
            }
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn dnf_rec(pred: &Predicate, budget: usize) -> Result<Vec<Vec<Atom>>> {
    Ok(match pred {
        Predicate::True => vec![vec![]],
        Predicate::False => vec![],
        Predicate::Atom(a) => vec![vec![a.clone()]],
        Predicate::Or(ps) => {
            let mut out = Vec::new();
            for p in ps {
                out.extend(dnf_rec(p, budget)?);
                if out.len() > budget {
                    return Err(FormulaError::CubeBudget(budget));
                }
            }
            out
        }
        Predicate::And(ps) => {
            let mut acc: Vec<Vec<Atom>> = vec![vec![]];
            for p in ps {
                let part = dnf_rec(p, budget)?;
                if acc.len().saturating_mul(part.len()) > budget {
                    return Err(FormulaError::CubeBudget(budget));
                }
                acc = acc
                    .iter()
                    .flat_map(|l| {
                        part.iter().map(move |r| {
                            let mut c = l.clone();
                            c.extend(r.iter().cloned());
                            c
                        })
                    })
                    .collect();
            }
            acc
        }
        Predicate::Not(_) | Predicate::Exists(_) | Predicate::Forall(_) => return Err(FormulaError::Quantified),
    })
}

/// Syntactic upward closure: after moving negations inward, a positive
/// combination of `>=` atoms with nonnegative coefficients.
pub fn is_monotonic(pred: &Predicate) -> bool {
    fn check(p: &Predicate) -> bool {
        match p {
            Predicate::True | Predicate::False => true,
            Predicate::Atom(a) => a.is_monotonic(),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().all(check),
            _ => false,
        }
    }
    !pred.is_quantified() && check(&to_nnf(pred))
}

/// A conjunction of atoms, existentially quantified over `k >= 0` when
/// `quantified` is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    atoms: Vec<Atom>,
    quantified: bool,
}

impl Cube {
    pub fn new(mut atoms: Vec<Atom>) -> Self {
        atoms.sort();
        atoms.dedup();
        let quantified = atoms.iter().any(|a| a.has_var(|v| v == Var::Param));
        Cube { atoms, quantified }
    }

    pub fn top() -> Self {
        Cube { atoms: Vec::new(), quantified: false }
    }

    /// Conjunction of the atoms of `pred`, which must be a conjunction of
    /// atoms; `None` when it is `false`.
    pub fn from_predicate(pred: &Predicate) -> Option<Cube> {
        match pred {
            Predicate::True => Some(Cube::top()),
            Predicate::False => None,
            Predicate::Atom(a) => Some(Cube::new(vec![a.clone()])),
            Predicate::And(ps) => {
                let mut atoms = Vec::new();
                for p in ps {
                    match p {
                        Predicate::Atom(a) => atoms.push(a.clone()),
                        Predicate::True => {}
                        _ => return None,
                    }
                }
                Some(Cube::new(atoms))
            }
            _ => None,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_quantified(&self) -> bool {
        self.quantified
    }

    pub fn is_monotonic(&self) -> bool {
        !self.quantified && self.atoms.iter().all(Atom::is_monotonic)
    }

    /// Keeps only the atoms at `keep` positions.
    pub fn restrict(&self, keep: &[usize]) -> Cube {
        Cube::new(keep.iter().map(|&i| self.atoms[i].clone()).collect())
    }

    pub fn to_predicate(&self) -> Predicate {
        let body = Predicate::and(self.atoms.iter().cloned().map(Predicate::Atom));
        if self.quantified {
            Predicate::Exists(Box::new(body))
        } else {
            body
        }
    }

    pub fn negate(&self) -> Clause {
        Clause { blocked: self.clone() }
    }

    pub fn primed(&self) -> Cube {
        self.map_atoms(&|v| match v {
            Var::Place(i) => Some(LinearExpr::var(Var::Next(i))),
            _ => None,
        })
        .expect("renaming keeps atoms satisfiable")
    }

    /// Replaces the parameter by a named solver constant.
    pub fn skolemize(&self, id: u32) -> Cube {
        let mut c = self
            .map_atoms(&|v| (v == Var::Param).then(|| LinearExpr::var(Var::Skolem(id))))
            .expect("renaming keeps atoms satisfiable");
        c.quantified = false;
        c
    }

    /// Instantiates the parameter with a constant; `None` when some atom
    /// becomes false.
    pub fn instantiate(&self, k: u64) -> Option<Cube> {
        let c = self.map_atoms(&|v| (v == Var::Param).then(|| LinearExpr::constant(k as i128)))?;
        Some(Cube { quantified: false, ..c })
    }

    /// Applies a substitution atom-wise, dropping atoms that become valid;
    /// `None` when one becomes unsatisfiable.
    pub fn map_atoms(&self, f: &dyn Fn(Var) -> Option<LinearExpr>) -> Option<Cube> {
        let mut atoms = Vec::new();
        for a in &self.atoms {
            match a.substitute(f) {
                Predicate::True => {}
                Predicate::False => return None,
                Predicate::Atom(a) => atoms.push(a),
                _ => unreachable!("substituting into an atom yields an atom"),
            }
        }
        Some(Cube::new(atoms))
    }

    pub fn and(&self, other: &Cube) -> Cube {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Cube::new(atoms)
    }

    /// Whether `m` models the cube. Exact for quantified cubes.
    pub fn eval(&self, m: &Marking) -> bool {
        self.param_witness(m).is_some()
    }

    /// The least `k >= 0` such that `m` models the body at `k` (`0` for a
    /// cube without parameter), or `None` if there is none. With the places
    /// fixed every atom constrains `k` alone, so this is interval arithmetic.
    pub fn param_witness(&self, m: &Marking) -> Option<u64> {
        let env = marking_env(m);
        let (mut lo, mut hi, mut fixed) = (0i128, i128::MAX, None::<i128>);
        for a in &self.atoms {
            let mut coeff = a.expr.coeffs.get(&Var::Param).copied().unwrap_or(0);
            let base = a.expr.eval(&|v| if v == Var::Param { Some(0) } else { env(v) })?;
            let mut rhs = a.bound - base;
            let mut rel = a.rel;
            if coeff == 0 {
                let ok = match rel {
                    Rel::Eq => rhs == 0,
                    Rel::Le => rhs >= 0,
                    Rel::Ge => rhs <= 0,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            if coeff < 0 {
                coeff = -coeff;
                rhs = -rhs;
                rel = match rel {
                    Rel::Le => Rel::Ge,
                    Rel::Ge => Rel::Le,
                    Rel::Eq => Rel::Eq,
                };
            }
            match rel {
                Rel::Ge => lo = lo.max(-(-rhs).div_euclid(coeff)),
                Rel::Le => hi = hi.min(rhs.div_euclid(coeff)),
                Rel::Eq => {
                    if rhs.rem_euclid(coeff) != 0 || fixed.is_some_and(|f| f != rhs / coeff) {
                        return None;
                    }
                    fixed = Some(rhs / coeff);
                }
            }
        }
        let k = match fixed {
            Some(f) if f >= lo && f <= hi => f,
            Some(_) => return None,
            None if lo <= hi => lo,
            None => return None,
        };
        u64::try_from(k).ok()
    }

    /// Simplifies the cube using the fact that every variable is a natural
    /// number, merging all bounds on the same linear form. Returns `None`
    /// when the cube is unsatisfiable for a syntactic reason.
    pub fn simplify(&self) -> Option<Cube> {
        // bounds[form] = (lower, upper)
        let mut bounds: BTreeMap<LinearExpr, (Option<i128>, Option<i128>)> = BTreeMap::new();
        let mut expanded = Vec::new();
        for a in &self.atoms {
            let positive = a.expr.coeffs.values().all(|&c| c > 0);
            if positive && a.rel != Rel::Ge && a.bound == 0 {
                // a sum of naturals bounded by zero pins every variable
                for &v in a.expr.coeffs.keys() {
                    expanded.push(Atom { expr: LinearExpr::var(v), rel: Rel::Eq, bound: 0 });
                }
            } else {
                expanded.push(a.clone());
            }
        }
        for a in expanded {
            let entry = bounds.entry(a.expr.clone()).or_insert((None, None));
            if matches!(a.rel, Rel::Ge | Rel::Eq) {
                entry.0 = Some(entry.0.map_or(a.bound, |lo| lo.max(a.bound)));
            }
            if matches!(a.rel, Rel::Le | Rel::Eq) {
                entry.1 = Some(entry.1.map_or(a.bound, |hi| hi.min(a.bound)));
            }
        }
        let mut atoms = Vec::new();
        for (expr, (lo, hi)) in bounds {
            let natural_floor = expr.coeffs.values().all(|&c| c > 0).then_some(0);
            let lo = match (lo, natural_floor) {
                (Some(l), Some(f)) => Some(l.max(f)),
                (l, f) => l.or(f),
            };
            if let (Some(l), Some(h)) = (lo, hi) {
                if l > h {
                    return None;
                }
                if l == h {
                    atoms.push(Atom { expr, rel: Rel::Eq, bound: l });
                    continue;
                }
            }
            if let Some(l) = lo {
                if natural_floor.is_none_or(|f| l > f) {
                    atoms.push(Atom { expr: expr.clone(), rel: Rel::Ge, bound: l });
                }
            }
            if let Some(h) = hi {
                atoms.push(Atom { expr, rel: Rel::Le, bound: h });
            }
        }
        let mut c = Cube::new(atoms);
        c.quantified = self.quantified && c.atoms.iter().any(|a| a.has_var(|v| v == Var::Param));
        Some(c)
    }
}

/// A disjunction of literals, stored as the cube it blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    blocked: Cube,
}

impl Clause {
    pub fn blocked(&self) -> &Cube {
        &self.blocked
    }

    pub fn negate(&self) -> Cube {
        self.blocked.clone()
    }

    pub fn is_quantified(&self) -> bool {
        self.blocked.quantified
    }

    /// The literals of the disjunction.
    pub fn literals(&self) -> Vec<Atom> {
        self.blocked.atoms.iter().flat_map(Atom::negate).collect()
    }

    pub fn to_predicate(&self) -> Predicate {
        let body = Predicate::or(self.literals().into_iter().map(Predicate::Atom));
        if self.blocked.quantified {
            Predicate::Forall(Box::new(body))
        } else {
            body
        }
    }
}

/// Shifts every place `p` to `p + d(p)`.
pub fn substitute_shift(c: &Cube, d: &Delta) -> Option<Cube> {
    c.map_atoms(&|v| match v {
        Var::Place(i) => {
            let mut e = LinearExpr::var(v);
            e.add_constant(d.0[i] as i128);
            Some(e)
        }
        _ => None,
    })
}

/// Shifts every place `p` to `p + (k + 1) * d(p)` where `k` is the parameter.
pub fn substitute_shift_saturated(c: &Cube, d: &Delta) -> Option<Cube> {
    c.map_atoms(&|v| match v {
        Var::Place(i) => {
            let mut e = LinearExpr::var(v);
            e.add_term(d.0[i] as i128, Var::Param);
            e.add_constant(d.0[i] as i128);
            Some(e)
        }
        _ => None,
    })
}

const KEYWORDS: [&str; 7] = ["and", "or", "not", "forall", "exists", "true", "false"];

/// `name` as written in the predicate grammar, quoted when it is not a
/// plain identifier.
pub fn quote_ident(name: &str) -> String {
    let mut chars = name.chars();
    let plain = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !KEYWORDS.contains(&name);
    if plain {
        name.to_string()
    } else {
        format!("\"{name}\"")
    }
}

/// Renders formulas with the place names of a net.
#[derive(Clone, Copy)]
pub struct Names<'a> {
    net: Option<&'a Net>,
    param: &'a str,
}

impl<'a> Names<'a> {
    pub fn of(net: &'a Net) -> Self {
        Names { net: Some(net), param: "k" }
    }

    pub fn anonymous() -> Self {
        Names { net: None, param: "k" }
    }

    pub fn with_param(self, param: &'a str) -> Self {
        Names { param, ..self }
    }

    pub fn var(&self, v: Var) -> String {
        let place = |i: usize| match self.net {
            Some(n) => quote_ident(&n.places()[i]),
            None => format!("x{i}"),
        };
        match v {
            Var::Place(i) => place(i),
            Var::Next(i) => format!("{}'", place(i)),
            Var::Param => self.param.to_string(),
            Var::Skolem(n) => format!("sk{n}"),
        }
    }

    pub fn expr(&self, e: &LinearExpr) -> String {
        let mut out = String::new();
        for (&v, &a) in &e.coeffs {
            let name = self.var(v);
            let mag = a.abs();
            if out.is_empty() {
                if a < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if a < 0 { " - " } else { " + " });
            }
            if mag == 1 {
                out.push_str(&name);
            } else {
                out.push_str(&format!("{mag} * {name}"));
            }
        }
        if out.is_empty() {
            return e.constant.to_string();
        }
        if e.constant != 0 {
            out.push_str(&format!(" {} {}", if e.constant < 0 { "-" } else { "+" }, e.constant.abs()));
        }
        out
    }

    pub fn atom(&self, a: &Atom) -> String {
        let rel = match a.rel {
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Ge => ">=",
        };
        format!("{} {} {}", self.expr(&a.expr), rel, a.bound)
    }

    /// Infix rendering accepted back by [`parse_predicate`].
    pub fn predicate(&self, p: &Predicate) -> String {
        match p {
            Predicate::True => "true".into(),
            Predicate::False => "false".into(),
            Predicate::Atom(a) => format!("({})", self.atom(a)),
            Predicate::And(ps) => self.join(ps, " and "),
            Predicate::Or(ps) => self.join(ps, " or "),
            Predicate::Not(q) => format!("(not {})", self.predicate(q)),
            Predicate::Exists(q) => format!("(exists ({}) {})", self.param, self.predicate(q)),
            Predicate::Forall(q) => format!("(forall ({}) {})", self.param, self.predicate(q)),
        }
    }

    fn join(&self, ps: &[Predicate], sep: &str) -> String {
        let parts: Vec<String> = ps.iter().map(|p| self.predicate(p)).collect();
        format!("({})", parts.join(sep))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Names::anonymous().predicate(self))
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Names::anonymous().predicate(&self.to_predicate()))
    }
}

#[cfg(test)]
mod tests;
