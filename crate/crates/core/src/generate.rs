//! Random bounded problems with known answers, for differential testing.
//!
//! Nets are small and their reachable sets are enumerated completely, so
//! every generated problem carries an exact verdict from the explicit-state
//! oracle.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::formula::{is_monotonic, negate, Atom, LinearExpr, Predicate, Rel, Var};
use crate::oracle::{bfs_reach, reachable_set, ExploreBounds, Reach};
use crate::petri::{FiringSequence, Marking, Net, TransitionId};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_places: usize,
    pub max_transitions: usize,
    pub max_weight: u64,
    pub max_initial: u64,
    pub max_states: usize,
    pub max_atoms: usize,
    /// Share of problems whose bad region is upward closed.
    pub coverability: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_places: 4,
            max_transitions: 4,
            max_weight: 3,
            max_initial: 3,
            max_states: 10_000,
            max_atoms: 3,
            coverability: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub net: Net,
    pub m0: Marking,
    pub property: Predicate,
    /// Shortest trace to a violation, `None` when the property is invariant.
    pub violation: Option<FiringSequence>,
    pub reachable_states: usize,
}

impl Problem {
    pub fn is_invariant(&self) -> bool {
        self.violation.is_none()
    }

    /// Whether the bad region is syntactically upward closed.
    pub fn is_coverability(&self) -> bool {
        is_monotonic(&negate(&self.property))
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn weights<R: Rng>(rng: &mut R, n: usize, max: u64) -> Vec<u64> {
    (0..n).map(|_| if rng.gen_bool(0.4) { rng.gen_range(1..=max) } else { 0 }).collect()
}

/// A random net with a random initial marking (may be unbounded).
pub fn random_net<R: Rng>(rng: &mut R, cfg: &GenConfig) -> (Net, Marking) {
    let np = rng.gen_range(1..=cfg.max_places);
    let nt = rng.gen_range(1..=cfg.max_transitions);
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for _ in 0..nt {
        let mut p = weights(rng, np, cfg.max_weight);
        if p.iter().all(|&w| w == 0) {
            p[rng.gen_range(0..np)] = rng.gen_range(1..=cfg.max_weight);
        }
        pre.push(p);
        post.push(weights(rng, np, cfg.max_weight));
    }
    let net = Net::new(names("p", np), names("t", nt), pre, post).expect("generated names are distinct");
    let m0 = Marking((0..np).map(|_| rng.gen_range(0..=cfg.max_initial)).collect());
    (net, m0)
}

/// A random firing sequence of length `1..=max_len` (not necessarily
/// fireable from any particular marking).
pub fn random_sequence<R: Rng>(rng: &mut R, net: &Net, max_len: usize) -> FiringSequence {
    let len = rng.gen_range(1..=max_len);
    FiringSequence((0..len).map(|_| TransitionId(rng.gen_range(0..net.num_transitions()))).collect())
}

fn random_form<R: Rng>(rng: &mut R, np: usize, positive: bool) -> LinearExpr {
    let mut places: Vec<usize> = (0..np).collect();
    places.shuffle(rng);
    let mut e = LinearExpr::constant(0);
    for &p in places.iter().take(rng.gen_range(1..=np.min(2))) {
        let c = if positive { *[1, 1, 2].choose(rng).unwrap() } else { *[1, 1, 1, 2, -1].choose(rng).unwrap() };
        e.add_term(c, Var::Place(p));
    }
    e
}

fn value_at(e: &LinearExpr, m: &Marking) -> i128 {
    e.eval(&|v| match v {
        Var::Place(i) => Some(m.0[i] as i128),
        _ => None,
    })
    .expect("only place variables")
}

fn random_atom<R: Rng>(rng: &mut R, np: usize, states: &[Marking]) -> Predicate {
    let e = random_form(rng, np, false);
    let anchor = &states[rng.gen_range(0..states.len())];
    let c = value_at(&e, anchor) + rng.gen_range(-1..=1);
    let rhs = LinearExpr::constant(c);
    let one = LinearExpr::constant(1);
    match rng.gen_range(0..6) {
        0 => Atom::compare(e, Rel::Le, rhs),
        1 => Atom::compare(e, Rel::Ge, rhs),
        2 => Atom::compare(e, Rel::Eq, rhs),
        3 => Atom::compare(e, Rel::Le, rhs.minus(&one)),
        4 => Atom::compare(e, Rel::Ge, rhs.plus(&one)),
        _ => Predicate::not(Atom::compare(e, Rel::Eq, rhs)),
    }
}

fn combine<R: Rng>(rng: &mut R, mut parts: Vec<Predicate>) -> Predicate {
    while parts.len() > 1 {
        let a = parts.pop().unwrap();
        let b = parts.pop().unwrap();
        let joined = if rng.gen_bool(0.5) { Predicate::and([a, b]) } else { Predicate::or([a, b]) };
        parts.push(if rng.gen_bool(0.15) { Predicate::not(joined) } else { joined });
    }
    parts.pop().unwrap()
}

/// A property over `net`. Coverability-shaped properties are the negation
/// of a positive combination of lower bounds.
pub fn random_property<R: Rng>(
    rng: &mut R,
    net: &Net,
    states: &[Marking],
    coverability: bool,
    max_atoms: usize,
) -> Predicate {
    let np = net.num_places();
    let n = rng.gen_range(1..=max_atoms);
    if coverability {
        let atoms: Vec<Predicate> = (0..n)
            .map(|_| {
                let e = random_form(rng, np, true);
                let top = states.iter().map(|m| value_at(&e, m)).max().unwrap_or(0);
                let c = rng.gen_range(1..=top + 2);
                Atom::compare(e, Rel::Ge, LinearExpr::constant(c))
            })
            .collect();
        let bad = if rng.gen_bool(0.5) { Predicate::and(atoms) } else { Predicate::or(atoms) };
        return Predicate::not(bad);
    }
    let atoms = (0..n).map(|_| random_atom(rng, np, states)).collect();
    combine(rng, atoms)
}

/// Draws nets until one has a finite reachable set within the state bound,
/// then a property, and solves it with the oracle. Constant properties are
/// redrawn.
pub fn random_problem<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Problem {
    let bounds = ExploreBounds { max_states: cfg.max_states, max_depth: usize::MAX, max_tokens: 1_000 };
    loop {
        let (net, m0) = random_net(rng, cfg);
        let Ok(Some(states)) = reachable_set(&net, &m0, bounds) else { continue };
        let coverability = rng.gen_bool(cfg.coverability);
        let property = random_property(rng, &net, &states, coverability, cfg.max_atoms);
        if matches!(property, Predicate::True | Predicate::False) {
            continue;
        }
        let violation = match bfs_reach(&net, &m0, &negate(&property), bounds) {
            Ok(Reach::Reachable(trace)) => Some(trace),
            Ok(Reach::Unreachable) => None,
            _ => continue,
        };
        return Problem { net, m0, property, violation, reachable_states: states.len() };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::eval;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn problems_respect_the_bounds_and_carry_exact_answers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = GenConfig::default();
        let (mut inv, mut reach, mut cov) = (0, 0, 0);
        for _ in 0..60 {
            let p = random_problem(&mut rng, &cfg);
            assert!(p.net.num_places() <= 4 && p.net.num_transitions() <= 4);
            assert!(p.reachable_states <= 10_000);
            assert!(p.property.atoms().len() <= 3);
            match &p.violation {
                Some(trace) => {
                    reach += 1;
                    let end = p.net.fire(&p.m0, trace).unwrap().unwrap();
                    assert!(!eval(&p.property, &end));
                }
                None => inv += 1,
            }
            cov += p.is_coverability() as usize;
        }
        assert!(inv > 5 && reach > 5, "{inv} invariant / {reach} reachable");
        assert!(cov > 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_problem(&mut ChaCha8Rng::seed_from_u64(3), &GenConfig::default());
        let b = random_problem(&mut ChaCha8Rng::seed_from_u64(3), &GenConfig::default());
        assert_eq!((a.net, a.m0, a.property), (b.net, b.m0, b.property));
    }
}
