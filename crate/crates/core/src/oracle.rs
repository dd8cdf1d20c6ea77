//! Explicit-state ground truth for small instances.

use std::collections::{HashMap, VecDeque};

use crate::formula::{eval, Predicate};
use crate::petri::{FiringSequence, Marking, Net, PetriError, Result, TransitionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreBounds {
    pub max_states: usize,
    pub max_depth: usize,
    /// Markings with more tokens than this in some place are not explored.
    pub max_tokens: u64,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds { max_states: 10_000, max_depth: usize::MAX, max_tokens: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reach {
    /// A shortest trace from the initial marking to a model of the target.
    Reachable(FiringSequence),
    /// The whole reachable set was enumerated without meeting the target.
    Unreachable,
    /// A bound cut the exploration short.
    Inconclusive,
}

struct Explorer<'a> {
    net: &'a Net,
    bounds: ExploreBounds,
    parent: HashMap<Marking, Option<(Marking, TransitionId)>>,
    order: Vec<Marking>,
    clipped: bool,
}

impl<'a> Explorer<'a> {
    fn new(net: &'a Net, bounds: ExploreBounds) -> Self {
        Explorer { net, bounds, parent: HashMap::new(), order: Vec::new(), clipped: false }
    }

    fn trace_to(&self, m: &Marking) -> FiringSequence {
        let mut out = Vec::new();
        let mut cur = m;
        while let Some(Some((prev, t))) = self.parent.get(cur) {
            out.push(*t);
            cur = prev;
        }
        out.reverse();
        FiringSequence(out)
    }

    /// Breadth-first search; stops at the first marking accepted by `stop`.
    fn run(&mut self, m0: &Marking, stop: &dyn Fn(&Marking) -> bool) -> Result<Option<Marking>> {
        self.parent.insert(m0.clone(), None);
        self.order.push(m0.clone());
        if stop(m0) {
            return Ok(Some(m0.clone()));
        }
        let mut queue = VecDeque::from([(m0.clone(), 0usize)]);
        while let Some((m, depth)) = queue.pop_front() {
            if depth >= self.bounds.max_depth {
                self.clipped = true;
                continue;
            }
            let mut succ = Vec::new();
            for t in self.net.transition_ids() {
                match self.net.fire_one(&m, t) {
                    Ok(Some(n)) => succ.push((n, t)),
                    Ok(None) => {}
                    Err(PetriError::Overflow(_)) => self.clipped = true,
                    Err(e) => return Err(e),
                }
            }
            succ.sort();
            for (n, t) in succ {
                if self.parent.contains_key(&n) {
                    continue;
                }
                if n.0.iter().any(|&v| v > self.bounds.max_tokens) {
                    self.clipped = true;
                    continue;
                }
                if self.parent.len() >= self.bounds.max_states {
                    self.clipped = true;
                    return Ok(None);
                }
                self.parent.insert(n.clone(), Some((m.clone(), t)));
                self.order.push(n.clone());
                if stop(&n) {
                    return Ok(Some(n));
                }
                queue.push_back((n, depth + 1));
            }
        }
        Ok(None)
    }
}

/// Searches for a marking reachable from `m0` that models `target`.
pub fn bfs_reach(net: &Net, m0: &Marking, target: &Predicate, bounds: ExploreBounds) -> Result<Reach> {
    let mut ex = Explorer::new(net, bounds);
    Ok(match ex.run(m0, &|m| eval(target, m))? {
        Some(m) => Reach::Reachable(ex.trace_to(&m)),
        None if ex.clipped => Reach::Inconclusive,
        None => Reach::Unreachable,
    })
}

/// The full reachable set in discovery order, or `None` if a bound tripped.
pub fn reachable_set(net: &Net, m0: &Marking, bounds: ExploreBounds) -> Result<Option<Vec<Marking>>> {
    let mut ex = Explorer::new(net, bounds);
    ex.run(m0, &|_| false)?;
    Ok((!ex.clipped).then_some(ex.order))
}

/// Some marking with at most `max_tokens` tokens per place that models
/// `pred`, searched in lexicographic order.
pub fn find_model(pred: &Predicate, places: usize, max_tokens: u64) -> Option<Marking> {
    let mut m = Marking(vec![0; places]);
    loop {
        if eval(pred, &m) {
            return Some(m);
        }
        // odometer increment, last place fastest
        let mut i = places;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if m.0[i] < max_tokens {
                m.0[i] += 1;
                break;
            }
            m.0[i] = 0;
        }
    }
}

/// Least marking that can fire `seq`, by per-place minimization from the
/// total consumption of the sequence.
pub fn min_firing_marking(net: &Net, seq: &FiringSequence) -> Result<Marking> {
    if seq.0.is_empty() {
        return Err(PetriError::EmptySequence);
    }
    let mut m = net.zero_marking();
    for &t in &seq.0 {
        for (i, &w) in net.pre(t).iter().enumerate() {
            m.0[i] = m.0[i].checked_add(w).ok_or(PetriError::Overflow("consumption"))?;
        }
    }
    for i in 0..m.0.len() {
        while m.0[i] > 0 {
            let mut lower = m.clone();
            lower.0[i] -= 1;
            if net.fire(&lower, seq)?.is_none() {
                break;
            }
            m = lower;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_predicate;
    use crate::petri::tests::parity;

    #[test]
    fn parity_from_one_is_inconclusive() {
        let net = parity();
        let target = parse_predicate("p = 0", &net).unwrap();
        let bounds = ExploreBounds { max_tokens: 100, ..ExploreBounds::default() };
        assert_eq!(bfs_reach(&net, &Marking(vec![1]), &target, bounds).unwrap(), Reach::Inconclusive);
    }

    #[test]
    fn parity_from_two_reaches_zero() {
        let net = parity();
        let target = parse_predicate("p = 0", &net).unwrap();
        let r = bfs_reach(&net, &Marking(vec![2]), &target, ExploreBounds::default()).unwrap();
        assert_eq!(r, Reach::Reachable(net.sequence(&["t_dec"]).unwrap()));
    }

    #[test]
    fn false_target_is_unreachable_on_finite_nets() {
        let net = Net::new(
            vec!["a".into(), "b".into()],
            vec!["ab".into(), "ba".into()],
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        let r = bfs_reach(&net, &Marking(vec![2, 0]), &Predicate::False, ExploreBounds::default()).unwrap();
        assert_eq!(r, Reach::Unreachable);
        let all = reachable_set(&net, &Marking(vec![2, 0]), ExploreBounds::default()).unwrap().unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn traces_replay() {
        let net = Net::new(
            vec!["a".into(), "b".into()],
            vec!["ab".into(), "ba".into(), "grow".into()],
            vec![vec![1, 0], vec![0, 2], vec![1, 1]],
            vec![vec![0, 1], vec![1, 0], vec![2, 2]],
        )
        .unwrap();
        let target = parse_predicate("a = 0 and b >= 4", &net).unwrap();
        let Reach::Reachable(trace) = bfs_reach(&net, &Marking(vec![2, 0]), &target, ExploreBounds::default()).unwrap()
        else {
            panic!("target should be reachable")
        };
        let end = net.fire(&Marking(vec![2, 0]), &trace).unwrap().unwrap();
        assert!(eval(&target, &end));
        let again = bfs_reach(&net, &Marking(vec![2, 0]), &target, ExploreBounds::default()).unwrap();
        assert_eq!(again, Reach::Reachable(trace));
    }

    #[test]
    fn model_search() {
        let net = Net::new(vec!["a".into(), "b".into()], vec![], vec![], vec![]).unwrap();
        let p = parse_predicate("a + 2 * b = 5 and a >= 2", &net).unwrap();
        assert_eq!(find_model(&p, 2, 5), Some(Marking(vec![3, 1])));
        assert_eq!(find_model(&p, 2, 2), None);
        assert_eq!(find_model(&Predicate::True, 0, 0), Some(Marking(vec![])));
    }

    #[test]
    fn single_transition_needs_its_preset() {
        let net = Net::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["t".into()],
            vec![vec![2, 0, 1]],
            vec![vec![0, 3, 1]],
        )
        .unwrap();
        let t = net.sequence(&["t"]).unwrap();
        assert_eq!(min_firing_marking(&net, &t).unwrap(), Marking(vec![2, 0, 1]));
    }

    #[test]
    fn min_firing_marking_examples() {
        let net = parity();
        let dec = net.sequence(&["t_dec"]).unwrap();
        assert_eq!(min_firing_marking(&net, &dec).unwrap(), Marking(vec![2]));
        let inc = net.sequence(&["t_inc"]).unwrap();
        assert_eq!(min_firing_marking(&net, &inc).unwrap(), Marking(vec![0]));
        let mixed = net.sequence(&["t_dec", "t_inc", "t_dec", "t_dec"]).unwrap();
        assert_eq!(min_firing_marking(&net, &mixed).unwrap(), net.hurdle(&mixed).unwrap());
    }
}
