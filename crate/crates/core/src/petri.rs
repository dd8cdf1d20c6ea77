//! Place/transition nets, markings and the firing-sequence algebra.
//!
//! Besides plain firing, this module computes displacements and hurdles of
//! firing sequences:
//!
//! ```text
//! H(t)       = pre(t)
//! H(s1 . s2) = max(H(s1), H(s2) - D(s1))
//! H(s^(k+1)) = H(s) + k * (-D(s))^+
//! ```
//!
//! A sequence `s` is fireable from `m` iff `m >= H(s)`, and then it reaches
//! `m + D(s)`. Generalization of witnesses in the PDR engine relies on both.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PetriError {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("flow vector of transition `{0}` has {1} entries, expected {2}")]
    BadArity(String, usize, usize),
    #[error("marking has {0} entries, expected {1}")]
    MarkingArity(usize, usize),
    #[error("hurdle of the empty firing sequence is undefined")]
    EmptySequence,
    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, PetriError>;

/// Index of a transition inside its [`Net`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub usize);

/// Token counts, one entry per place in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Marking(pub Vec<u64>);

/// Signed per-place token change.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Delta(pub Vec<i64>);

/// A finite word over the transitions of a net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct FiringSequence(pub Vec<TransitionId>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    places: Vec<String>,
    transitions: Vec<String>,
    pre: Vec<Vec<u64>>,
    post: Vec<Vec<u64>>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
}

impl Net {
    pub fn new(places: Vec<String>, transitions: Vec<String>, pre: Vec<Vec<u64>>, post: Vec<Vec<u64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in places.iter().chain(transitions.iter()) {
            if !seen.insert(name.as_str()) {
                return Err(PetriError::DuplicateName(name.clone()));
            }
        }
        if pre.len() != transitions.len() || post.len() != transitions.len() {
            return Err(PetriError::BadArity("<net>".into(), pre.len().min(post.len()), transitions.len()));
        }
        for (i, t) in transitions.iter().enumerate() {
            for v in [&pre[i], &post[i]] {
                if v.len() != places.len() {
                    return Err(PetriError::BadArity(t.clone(), v.len(), places.len()));
                }
            }
        }
        let place_index = places.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let transition_index = transitions.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Net { places, transitions, pre, post, place_index, transition_index })
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[String] {
        &self.transitions
    }

    pub fn num_places(&self) -> usize {
        self.places.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_id(&self, name: &str) -> Option<usize> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Result<TransitionId> {
        self.transition_index
            .get(name)
            .map(|&i| TransitionId(i))
            .ok_or_else(|| PetriError::UnknownTransition(name.to_string()))
    }

    pub fn transition_name(&self, t: TransitionId) -> &str {
        &self.transitions[t.0]
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn pre(&self, t: TransitionId) -> &[u64] {
        &self.pre[t.0]
    }

    pub fn post(&self, t: TransitionId) -> &[u64] {
        &self.post[t.0]
    }

    /// Resolves a list of transition names.
    pub fn sequence<S: AsRef<str>>(&self, names: &[S]) -> Result<FiringSequence> {
        names.iter().map(|n| self.transition_id(n.as_ref())).collect::<Result<Vec<_>>>().map(FiringSequence)
    }

    pub fn marking(&self, tokens: Vec<u64>) -> Result<Marking> {
        if tokens.len() != self.places.len() {
            return Err(PetriError::MarkingArity(tokens.len(), self.places.len()));
        }
        Ok(Marking(tokens))
    }

    pub fn zero_marking(&self) -> Marking {
        Marking(vec![0; self.places.len()])
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        m.0.iter().zip(&self.pre[t.0]).all(|(have, need)| have >= need)
    }

    pub fn enabled(&self, m: &Marking, t: &str) -> Result<bool> {
        Ok(self.is_enabled(m, self.transition_id(t)?))
    }

    /// Fires a single transition, `None` when it is not enabled.
    pub fn fire_one(&self, m: &Marking, t: TransitionId) -> Result<Option<Marking>> {
        if !self.is_enabled(m, t) {
            return Ok(None);
        }
        let next =
            m.0.iter()
                .zip(&self.pre[t.0])
                .zip(&self.post[t.0])
                .map(|((&v, &pre), &post)| (v - pre).checked_add(post))
                .collect::<Option<Vec<_>>>()
                .ok_or(PetriError::Overflow("firing"))?;
        Ok(Some(Marking(next)))
    }

    /// Fires `seq` step by step from `m`.
    pub fn fire(&self, m: &Marking, seq: &FiringSequence) -> Result<Option<Marking>> {
        let mut cur = m.clone();
        for &t in &seq.0 {
            match self.fire_one(&cur, t)? {
                Some(next) => cur = next,
                None => return Ok(None),
            }
        }
        Ok(Some(cur))
    }

    pub fn transition_displacement(&self, t: TransitionId) -> Result<Delta> {
        self.pre[t.0]
            .iter()
            .zip(&self.post[t.0])
            .map(|(&pre, &post)| {
                let pre = i64::try_from(pre).ok()?;
                let post = i64::try_from(post).ok()?;
                post.checked_sub(pre)
            })
            .collect::<Option<Vec<_>>>()
            .map(Delta)
            .ok_or(PetriError::Overflow("displacement"))
    }

    pub fn displacement(&self, seq: &FiringSequence) -> Result<Delta> {
        let mut acc = Delta(vec![0; self.places.len()]);
        for &t in &seq.0 {
            acc = acc.checked_add(&self.transition_displacement(t)?)?;
        }
        Ok(acc)
    }

    /// Least marking from which `seq` is fireable, folding the hurdle
    /// recurrence left to right.
    pub fn hurdle(&self, seq: &FiringSequence) -> Result<Marking> {
        let (&first, rest) = seq.0.split_first().ok_or(PetriError::EmptySequence)?;
        let mut hurdle: Vec<i64> = to_signed(self.pre(first))?;
        let mut delta = self.transition_displacement(first)?;
        for &t in rest {
            let pre_t = to_signed(self.pre(t))?;
            for i in 0..hurdle.len() {
                let need = pre_t[i].checked_sub(delta.0[i]).ok_or(PetriError::Overflow("hurdle"))?;
                hurdle[i] = hurdle[i].max(need);
            }
            delta = delta.checked_add(&self.transition_displacement(t)?)?;
        }
        Ok(Marking(hurdle.into_iter().map(|v| v as u64).collect()))
    }

    /// `H(seq^(k+1))` in closed form: `H(seq) + k * (-D(seq))^+`.
    pub fn saturated_hurdle(&self, seq: &FiringSequence, k: u64) -> Result<Marking> {
        let base = self.hurdle(seq)?;
        let budget = self.displacement(seq)?.neg_positive_part();
        base.0
            .iter()
            .zip(&budget.0)
            .map(|(&a, &b)| b.checked_mul(k).and_then(|kb| a.checked_add(kb)))
            .collect::<Option<Vec<_>>>()
            .map(Marking)
            .ok_or(PetriError::Overflow("saturated hurdle"))
    }
}

fn to_signed(v: &[u64]) -> Result<Vec<i64>> {
    v.iter().map(|&x| i64::try_from(x).map_err(|_| PetriError::Overflow("weight"))).collect()
}

impl Marking {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Component-wise `self >= other`.
    pub fn covers(&self, other: &Marking) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    pub fn checked_add(&self, other: &Marking) -> Option<Marking> {
        self.0.iter().zip(&other.0).map(|(a, b)| a.checked_add(*b)).collect::<Option<Vec<_>>>().map(Marking)
    }

    /// `self + d` when the result stays nonnegative.
    pub fn shifted(&self, d: &Delta) -> Option<Marking> {
        self.0
            .iter()
            .zip(&d.0)
            .map(|(&a, &b)| {
                let v = i64::try_from(a).ok()?.checked_add(b)?;
                u64::try_from(v).ok()
            })
            .collect::<Option<Vec<_>>>()
            .map(Marking)
    }

    pub fn as_delta(&self) -> Delta {
        Delta(self.0.iter().map(|&v| v as i64).collect())
    }
}

impl Delta {
    pub fn zero(n: usize) -> Self {
        Delta(vec![0; n])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn checked_add(&self, other: &Delta) -> Result<Delta> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_add(*b))
            .collect::<Option<Vec<_>>>()
            .map(Delta)
            .ok_or(PetriError::Overflow("displacement"))
    }

    pub fn checked_scale(&self, k: i64) -> Result<Delta> {
        self.0
            .iter()
            .map(|a| a.checked_mul(k))
            .collect::<Option<Vec<_>>>()
            .map(Delta)
            .ok_or(PetriError::Overflow("displacement"))
    }

    /// `(-self)^+`: tokens consumed per iteration, zero where the place gains.
    pub fn neg_positive_part(&self) -> Marking {
        Marking(self.0.iter().map(|&v| if v < 0 { v.unsigned_abs() } else { 0 }).collect())
    }
}

impl FiringSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &FiringSequence) -> FiringSequence {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        FiringSequence(v)
    }

    pub fn repeat(&self, times: usize) -> FiringSequence {
        FiringSequence(self.0.repeat(times))
    }

    /// Shortest `root` with `self = root^j`, together with `j`.
    pub fn primitive_root(&self) -> (FiringSequence, usize) {
        let n = self.0.len();
        for period in 1..=n {
            if n.is_multiple_of(period) && self.0.chunks(period).all(|c| c == &self.0[..period]) {
                return (FiringSequence(self.0[..period].to_vec()), n / period);
            }
        }
        (self.clone(), 1)
    }

    pub fn names<'a>(&'a self, net: &'a Net) -> impl Iterator<Item = &'a str> + 'a {
        self.0.iter().map(move |&t| net.transition_name(t))
    }
}

/// Pairs a marking with its net for `place=tokens` rendering.
pub struct MarkingDisplay<'a>(pub &'a Net, pub &'a Marking);

impl fmt::Display for MarkingDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, v) in self.0.places().iter().zip(&self.1 .0) {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{name}={v}")?;
        }
        Ok(())
    }
}
