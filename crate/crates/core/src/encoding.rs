//! Linear encodings of the net semantics and of witness generalizations.
//!
//! Formulas here range over two copies of the place variables:
//! [`Var::Place`] for the marking before a step and [`Var::Next`] for the
//! marking after it. [`VarSpace`] fixes how both are spelled in solver input.

use crate::formula::{substitute_shift, substitute_shift_saturated, Atom, Cube, LinearExpr, Predicate, Rel, Var};
use crate::petri::{FiringSequence, Marking, Net, Result, TransitionId};

/// Solver symbols for place variables. Current and next copies live in
/// disjoint namespaces (`p3` vs `p3.next`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSpace {
    places: usize,
}

impl VarSpace {
    pub fn new(places: usize) -> Self {
        VarSpace { places }
    }

    pub fn for_net(net: &Net) -> Self {
        Self::new(net.num_places())
    }

    pub fn num_places(&self) -> usize {
        self.places
    }

    pub fn current(&self, i: usize) -> String {
        format!("p{i}")
    }

    pub fn next(&self, i: usize) -> String {
        format!("p{i}.next")
    }

    pub fn skolem(&self, id: u32) -> String {
        format!("k!{id}")
    }

    pub fn symbol(&self, v: Var) -> String {
        match v {
            Var::Place(i) => self.current(i),
            Var::Next(i) => self.next(i),
            Var::Param => "k".into(),
            Var::Skolem(id) => self.skolem(id),
        }
    }

    pub fn current_symbols(&self) -> Vec<String> {
        (0..self.places).map(|i| self.current(i)).collect()
    }

    pub fn next_symbols(&self) -> Vec<String> {
        (0..self.places).map(|i| self.next(i)).collect()
    }
}

fn var_atom(v: Var, rel: Rel, c: i128) -> Predicate {
    Atom::compare(LinearExpr::var(v), rel, LinearExpr::constant(c))
}

/// `p_i >= m(p_i)` for every place, vacuous bounds included.
pub fn geq_marking(m: &Marking) -> Predicate {
    Predicate::and(m.0.iter().enumerate().map(|(i, &v)| var_atom(Var::Place(i), Rel::Ge, v as i128)))
}

/// The state generalization: the upward closure of `m` as a cube, without
/// vacuous `p >= 0` literals.
pub fn gen_state(m: &Marking) -> Cube {
    Cube::new(
        m.0.iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .filter_map(|(i, &v)| match var_atom(Var::Place(i), Rel::Ge, v as i128) {
                Predicate::Atom(a) => Some(a),
                _ => None,
            })
            .collect(),
    )
}

pub fn enbl(net: &Net, t: TransitionId) -> Predicate {
    gen_state(&Marking(net.pre(t).to_vec())).to_predicate()
}

pub fn delta_rel(net: &Net, t: TransitionId) -> Result<Predicate> {
    let d = net.transition_displacement(t)?;
    Ok(Predicate::and((0..net.num_places()).map(|i| {
        let mut rhs = LinearExpr::var(Var::Place(i));
        rhs.add_constant(d.0[i] as i128);
        Atom::compare(LinearExpr::var(Var::Next(i)), Rel::Eq, rhs)
    })))
}

pub fn eq_rel(net: &Net) -> Predicate {
    Predicate::and(
        (0..net.num_places())
            .map(|i| Atom::compare(LinearExpr::var(Var::Next(i)), Rel::Eq, LinearExpr::var(Var::Place(i)))),
    )
}

pub fn fire_rel(net: &Net, t: TransitionId) -> Result<Predicate> {
    Ok(Predicate::or([eq_rel(net), Predicate::and([enbl(net, t), delta_rel(net, t)?])]))
}

/// Firing at most one transition.
pub fn trans_rel(net: &Net) -> Result<Predicate> {
    let mut parts = vec![eq_rel(net)];
    for t in net.transition_ids() {
        parts.push(Predicate::and([enbl(net, t), delta_rel(net, t)?]));
    }
    Ok(Predicate::or(parts))
}

/// `GEQ_H(seq) /\ s(p + D(seq))`: every model fires `seq` into `s`.
/// `None` when the shifted cube is unsatisfiable.
pub fn gen_hurdle(net: &Net, seq: &FiringSequence, s: &Cube) -> Result<Option<Cube>> {
    let hurdle = net.hurdle(seq)?;
    let delta = net.displacement(seq)?;
    Ok(substitute_shift(s, &delta).map(|shifted| gen_state(&hurdle).and(&shifted)))
}

/// `exists k. /\ p_i >= a(i) + k * b(i) /\ s(p + (k + 1) * D(seq))` with
/// `a = H(seq)` and `b = (-D(seq))^+`: every model fires some power
/// `seq^(k+1)` into `s`.
pub fn gen_saturated(net: &Net, seq: &FiringSequence, s: &Cube) -> Result<Option<Cube>> {
    let a = net.hurdle(seq)?;
    let delta = net.displacement(seq)?;
    let b = delta.neg_positive_part();
    let Some(shifted) = substitute_shift_saturated(s, &delta) else {
        return Ok(None);
    };
    let mut atoms = Vec::new();
    for i in 0..net.num_places() {
        if a.0[i] == 0 && b.0[i] == 0 {
            continue;
        }
        let mut rhs = LinearExpr::constant(a.0[i] as i128);
        rhs.add_term(b.0[i] as i128, Var::Param);
        match Atom::compare(LinearExpr::var(Var::Place(i)), Rel::Ge, rhs) {
            Predicate::Atom(at) => atoms.push(at),
            Predicate::True => {}
            _ => return Ok(None),
        }
    }
    atoms.extend(shifted.atoms().iter().cloned());
    Ok(Some(Cube::new(atoms)))
}

/// Environment binding current places to `m` and next places to `next`.
pub fn step_env<'a>(m: &'a Marking, next: &'a Marking) -> impl Fn(Var) -> Option<i128> + 'a {
    move |v| match v {
        Var::Place(i) => m.0.get(i).map(|&x| x as i128),
        Var::Next(i) => next.0.get(i).map(|&x| x as i128),
        _ => None,
    }
}
