//! Independent check of an invariance certificate in a fresh solver session.

use std::collections::BTreeSet;
use std::fmt;

use crate::encoding::{trans_rel, VarSpace};
use crate::formula::{Atom, LinearExpr, Predicate, Rel, Var};
use crate::petri::{Marking, Net};
use crate::smt::{free_vars, pred_term, Logic, SatResult, Session, SolverConfig};

use super::PdrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass,
    Fail,
    /// The solver could not decide the query.
    Unknown,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckOutcome::Pass => "pass",
            CheckOutcome::Fail => "FAIL",
            CheckOutcome::Unknown => "unknown",
        })
    }
}

/// Results of the three conditions making `R` an invariant certificate
/// for `P`: `R` holds initially, `R` is inductive, `R` entails `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CertificateReport {
    pub initial: CheckOutcome,
    pub inductive: CheckOutcome,
    pub entails: CheckOutcome,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        [self.initial, self.inductive, self.entails].iter().all(|c| *c == CheckOutcome::Pass)
    }

    pub fn failed(&self) -> bool {
        [self.initial, self.inductive, self.entails].contains(&CheckOutcome::Fail)
    }
}

// Each condition is a fresh flat problem: solvers are weaker on quantified
// input inside push/pop scopes.
fn unsat_check(s: &mut Session, space: &VarSpace, parts: &[Predicate]) -> Result<CheckOutcome, PdrError> {
    s.reset()?;
    s.declare_places(space)?;
    for p in parts {
        s.assert_pred(p, space, None)?;
    }
    let r = s.check()?;
    Ok(match r {
        SatResult::Unsat => CheckOutcome::Pass,
        SatResult::Sat => CheckOutcome::Fail,
        SatResult::Unknown => CheckOutcome::Unknown,
    })
}

fn conditions(
    net: &Net,
    m0: &Marking,
    property: &Predicate,
    cert: &Predicate,
) -> Result<[Vec<Predicate>; 3], PdrError> {
    let init = Predicate::and(
        m0.0.iter()
            .enumerate()
            .map(|(i, &v)| Atom::compare(LinearExpr::var(Var::Place(i)), Rel::Eq, LinearExpr::constant(v as i128))),
    );
    let not = |p: &Predicate| Predicate::not(p.clone());
    Ok([
        vec![init, not(cert)],
        vec![cert.clone(), trans_rel(net)?, not(&cert.primed())],
        vec![cert.clone(), not(property)],
    ])
}

/// Checks `cert` against `property` with three unsatisfiability queries.
pub fn check_certificate(
    net: &Net,
    m0: &Marking,
    property: &Predicate,
    cert: &Predicate,
    solver: &SolverConfig,
) -> Result<CertificateReport, PdrError> {
    let space = VarSpace::for_net(net);
    let logic = if cert.is_quantified() || property.is_quantified() { Logic::Lia } else { Logic::QfLia };
    let mut s = Session::open(solver, logic)?;
    let [a, b, c] = conditions(net, m0, property, cert)?;
    let initial = unsat_check(&mut s, &space, &a)?;
    let inductive = unsat_check(&mut s, &space, &b)?;
    let entails = unsat_check(&mut s, &space, &c)?;
    Ok(CertificateReport { initial, inductive, entails })
}

const TITLES: [&str; 3] = [
    "the initial marking satisfies the certificate",
    "the certificate is closed under one transition",
    "the certificate entails the property",
];

/// A standalone SMT-LIB script with the three checks. A solver run on it
/// prints `unsat` three times iff the certificate is valid.
pub fn certificate_script(net: &Net, m0: &Marking, property: &Predicate, cert: &Predicate) -> Result<String, PdrError> {
    let space = VarSpace::for_net(net);
    let logic = if cert.is_quantified() || property.is_quantified() { Logic::Lia } else { Logic::QfLia };
    let mut out = String::from("; invariance certificate check: expect unsat, unsat, unsat\n");
    for (i, name) in net.places().iter().enumerate() {
        out.push_str(&format!(
            "; {} = place {name:?}, {} = its value after one step\n",
            space.current(i),
            space.next(i)
        ));
    }
    for (title, parts) in TITLES.iter().zip(conditions(net, m0, property, cert)?) {
        out.push_str(&format!("\n; {title}\n(set-logic {})\n", logic.as_str()));
        let mut vars: BTreeSet<Var> = (0..net.num_places()).map(Var::Place).collect();
        for p in &parts {
            vars.extend(free_vars(p));
        }
        for v in vars {
            let sym = space.symbol(v);
            out.push_str(&format!("(declare-const {sym} Int)\n(assert (>= {sym} 0))\n"));
        }
        for p in &parts {
            out.push_str(&format!("(assert {})\n", pred_term(p, &space)));
        }
        out.push_str("(check-sat)\n(reset)\n");
    }
    Ok(out)
}
