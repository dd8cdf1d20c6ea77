use proptest::prelude::*;

use super::*;
use crate::petri::tests::parity;

fn two_places() -> Net {
    Net::new(vec!["p1".into(), "p2".into()], vec![], vec![], vec![]).unwrap()
}

fn three_places() -> Net {
    Net::new(vec!["p0".into(), "p1".into(), "p2".into()], vec![], vec![], vec![]).unwrap()
}

fn atom(text: &str, net: &Net) -> Atom {
    match parse_predicate(text, net).unwrap() {
        Predicate::Atom(a) => a,
        other => panic!("not an atom: {other:?}"),
    }
}

fn markings(places: usize, bound: u64) -> Vec<Marking> {
    let mut out = vec![Marking(vec![])];
    for _ in 0..places {
        out = out
            .into_iter()
            .flat_map(|m| {
                (0..=bound).map(move |v| {
                    let mut m = m.clone();
                    m.0.push(v);
                    m
                })
            })
            .collect();
    }
    out
}

#[test]
fn parses_single_atoms() {
    let net = parity();
    let a = atom("p >= 1", &net);
    assert_eq!((a.rel(), a.bound()), (Rel::Ge, 1));
    assert_eq!(a.expr(), &LinearExpr::var(Var::Place(0)));

    let net = two_places();
    let a = atom("p1 <= p2", &net);
    let mut e = LinearExpr::var(Var::Place(0));
    e.add_term(-1, Var::Place(1));
    assert_eq!((a.expr(), a.rel(), a.bound()), (&e, Rel::Le, 0));
}

#[test]
fn parses_conjunction_from_introduction() {
    let net = three_places();
    let p = parse_predicate("(p0 + p1 = p2 + 2) and (p1 <= p2)", &net).unwrap();
    match &p {
        Predicate::And(parts) => {
            assert_eq!(parts.len(), 2);
            assert!(parts.iter().all(|q| matches!(q, Predicate::Atom(_))));
        }
        other => panic!("expected conjunction, got {other:?}"),
    }
    assert!(!eval(&p, &Marking(vec![1, 1, 0])));
    assert!(eval(&p, &Marking(vec![3, 0, 1])));
}

#[test]
fn parse_errors_are_positioned() {
    let net = parity();
    assert_eq!(parse_predicate("q >= 1", &net), Err(FormulaError::UnknownPlace("q".into())));
    match parse_predicate("p >= ", &net) {
        Err(FormulaError::Syntax { pos, .. }) => assert_eq!(pos, 5),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_predicate("p * p >= 1", &net), Err(FormulaError::NonLinear(_))));
    assert!(matches!(parse_predicate("p >= 1 )", &net), Err(FormulaError::Syntax { .. })));
    assert!(matches!(parse_predicate("forall (k) exists (j) (p = k + j)", &net), Err(FormulaError::NestedQuantifier)));
}

#[test]
fn strict_relations_are_rewritten() {
    let net = parity();
    assert_eq!(parse_predicate("p < 3", &net).unwrap(), parse_predicate("p <= 2", &net).unwrap());
    assert_eq!(parse_predicate("p > 3", &net).unwrap(), parse_predicate("p >= 4", &net).unwrap());
    let ne = parse_predicate("p != 3", &net).unwrap();
    for v in 0..8 {
        assert_eq!(eval(&ne, &Marking(vec![v])), v != 3);
    }
}

#[test]
fn atoms_are_gcd_reduced_and_sign_canonical() {
    let net = two_places();
    assert_eq!(atom("2 * p1 + 4 * p2 <= 7", &net), atom("p1 + 2 * p2 <= 3", &net));
    assert_eq!(atom("2 * p1 >= 3", &net), atom("p1 >= 2", &net));
    assert_eq!(atom("0 - p1 >= 0 - p2", &net), atom("p1 <= p2", &net));
    assert_eq!(parse_predicate("2 * p1 = 3", &net).unwrap(), Predicate::False);
    assert_eq!(parse_predicate("1 <= 2", &net).unwrap(), Predicate::True);
}

#[test]
fn negation_of_coverability_bound() {
    let net = parity();
    let p = parse_predicate("p >= 1", &net).unwrap();
    let f = negate(&p);
    assert_eq!(f, parse_predicate("p <= 0", &net).unwrap());
    let cubes = to_dnf(&f, DEFAULT_CUBE_BUDGET).unwrap();
    assert_eq!(cubes, vec![Cube::new(vec![atom("p = 0", &net)])]);
}

#[test]
fn dnf_distributes() {
    let net = three_places();
    let a = atom("p0 >= 1", &net);
    let b = atom("p1 >= 1", &net);
    let c = atom("p2 >= 1", &net);
    let p = Predicate::and([
        Predicate::or([Predicate::Atom(a.clone()), Predicate::Atom(b.clone())]),
        Predicate::Atom(c.clone()),
    ]);
    let cubes = to_dnf(&p, DEFAULT_CUBE_BUDGET).unwrap();
    assert_eq!(cubes, vec![Cube::new(vec![a, c.clone()]), Cube::new(vec![b, c])]);
}

#[test]
fn dnf_budget_is_enforced() {
    let net = three_places();
    let clause = parse_predicate("p0 = 1 or p1 = 1 or p2 = 1", &net).unwrap();
    let big = Predicate::and(std::iter::repeat_n(clause, 9));
    assert_eq!(to_dnf(&big, 100), Err(FormulaError::CubeBudget(100)));
}

#[test]
fn dnf_edge_cases() {
    assert!(to_dnf(&Predicate::False, 10).unwrap().is_empty());
    assert_eq!(to_dnf(&Predicate::True, 10).unwrap(), vec![Cube::top()]);
    let q = Predicate::Exists(Box::new(Predicate::True));
    assert_eq!(to_dnf(&q, 10), Err(FormulaError::Quantified));
}

#[test]
fn eval_examples() {
    let net = parity();
    assert!(eval(&parse_predicate("p >= 1", &net).unwrap(), &Marking(vec![1])));
    assert!(!eval(&parse_predicate("p = 0", &net).unwrap(), &Marking(vec![2])));
    let q = parse_predicate("exists (k) (p - 2 * (k + 1) = 0)", &net).unwrap();
    assert!(eval(&q, &Marking(vec![6])));
    assert!(!eval(&q, &Marking(vec![5])));
    assert!(!eval(&q, &Marking(vec![0])));
}

#[test]
fn shift_examples() {
    let net = parity();
    let c = Cube::new(vec![atom("p = 0", &net)]);
    assert_eq!(substitute_shift(&c, &Delta(vec![-2])).unwrap(), Cube::new(vec![atom("p = 2", &net)]));
    assert_eq!(substitute_shift(&c, &Delta(vec![0])).unwrap(), c);

    let net = two_places();
    let c = Cube::new(vec![atom("p1 <= p2", &net)]);
    let shifted = substitute_shift(&c, &Delta(vec![1, -1])).unwrap();
    assert_eq!(shifted, Cube::new(vec![atom("p1 - p2 <= -2", &net)]));
    for m in markings(2, 6) {
        let moved = Marking(vec![m.0[0] + 1, m.0[1].wrapping_sub(1)]);
        if m.0[1] >= 1 {
            assert_eq!(shifted.eval(&m), c.eval(&moved));
        }
    }
}

#[test]
fn monotonicity_classifier() {
    let net = two_places();
    assert!(is_monotonic(&parse_predicate("p1 + p2 >= 3", &net).unwrap()));
    assert!(is_monotonic(&parse_predicate("p1 >= 1 or (p2 >= 2 and p1 + p2 >= 5)", &net).unwrap()));
    assert!(!is_monotonic(&parse_predicate("p1 = 0", &net).unwrap()));
    assert!(!is_monotonic(&parse_predicate("p1 >= p2", &net).unwrap()));
    assert!(is_monotonic(&parse_predicate("not (p1 <= 2)", &net).unwrap()));
    assert!(!is_monotonic(&parse_predicate("not (p1 >= 2)", &net).unwrap()));
}

#[test]
fn simplify_merges_bounds() {
    let net = parity();
    let c = Cube::new(vec![atom("p >= 2", &net), atom("p = 2", &net)]);
    assert_eq!(c.simplify().unwrap(), Cube::new(vec![atom("p = 2", &net)]));
    let c = Cube::new(vec![atom("p >= 3", &net), atom("p <= 2", &net)]);
    assert_eq!(c.simplify(), None);
    let c = Cube::new(vec![atom("p >= 0", &net)]);
    assert_eq!(c.simplify().unwrap(), Cube::top());
}

#[test]
fn clause_is_negated_cube() {
    let net = parity();
    let c = Cube::new(vec![atom("p = 2", &net)]);
    let cl = c.negate();
    assert_eq!(cl.negate(), c);
    for v in 0..10 {
        let m = Marking(vec![v]);
        assert_eq!(eval(&cl.to_predicate(), &m), v != 2);
    }
}

#[test]
fn rendering_round_trips_through_the_parser() {
    let net = parity();
    let text = "(forall (k1) ((p < (2 + (k1 * 2))) or (p + (-2 * (k1 + 1))) >= 1))";
    let p = parse_predicate(text, &net).unwrap();
    let printed = Names::of(&net).with_param("k1").predicate(&p);
    assert_eq!(parse_predicate(&printed, &net).unwrap(), p);
    for v in 0..12 {
        assert_eq!(eval(&p, &Marking(vec![v])), v % 2 == 1 || v == 0);
    }
}

fn arb_atom() -> impl Strategy<Value = Predicate> {
    (-2i128..=2, -2i128..=2, 0usize..3, -3i128..=6).prop_map(|(a, b, r, c)| {
        let mut e = LinearExpr::term(a, Var::Place(0));
        e.add_term(b, Var::Place(1));
        let rel = [Rel::Eq, Rel::Le, Rel::Ge][r];
        Atom::compare(e, rel, LinearExpr::constant(c))
    })
}

fn arb_pred() -> impl Strategy<Value = Predicate> {
    arb_atom().prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(Predicate::and),
            prop::collection::vec(inner.clone(), 1..3).prop_map(Predicate::or),
            inner.prop_map(Predicate::not),
        ]
    })
}

proptest! {
    #[test]
    fn dnf_preserves_models(p in arb_pred()) {
        let cubes = to_dnf(&p, DEFAULT_CUBE_BUDGET).unwrap();
        for m in markings(2, 5) {
            let via_dnf = cubes.iter().any(|c| c.eval(&m));
            prop_assert_eq!(via_dnf, eval(&p, &m));
        }
    }

    #[test]
    fn negation_is_an_involution(p in arb_pred()) {
        let back = negate(&negate(&p));
        for m in markings(2, 10) {
            prop_assert_eq!(eval(&back, &m), eval(&p, &m));
            prop_assert_eq!(eval(&negate(&p), &m), !eval(&p, &m));
        }
    }

    #[test]
    fn shift_matches_translated_evaluation(p in arb_pred(), d0 in -3i64..=3, d1 in -3i64..=3) {
        let d = Delta(vec![d0, d1]);
        for c in to_dnf(&p, DEFAULT_CUBE_BUDGET).unwrap() {
            let shifted = substitute_shift(&c, &d);
            for m in markings(2, 5) {
                let Some(moved) = m.shifted(&d) else { continue };
                let lhs = shifted.as_ref().is_some_and(|s| s.eval(&m));
                prop_assert_eq!(lhs, c.eval(&moved));
            }
        }
    }

    #[test]
    fn monotonic_predicates_are_upward_closed(
        p in arb_pred(), extra0 in 0u64..4, extra1 in 0u64..4
    ) {
        if is_monotonic(&p) {
            for m in markings(2, 5) {
                if eval(&p, &m) {
                    let bigger = Marking(vec![m.0[0] + extra0, m.0[1] + extra1]);
                    prop_assert!(eval(&p, &bigger));
                }
            }
        }
    }

    #[test]
    fn simplify_preserves_models(p in arb_pred()) {
        for c in to_dnf(&p, DEFAULT_CUBE_BUDGET).unwrap() {
            let raw = Cube::new(c.atoms().to_vec());
            let simple = raw.simplify();
            for m in markings(2, 5) {
                prop_assert_eq!(simple.as_ref().is_some_and(|s| s.eval(&m)), raw.eval(&m));
            }
        }
    }
}

fn arb_param_cube() -> impl Strategy<Value = Cube> {
    let atom = (-2i128..=2, -2i128..=2, -3i128..=3, 0usize..3, -4i128..=8).prop_map(|(a, b, k, r, c)| {
        let mut e = LinearExpr::term(a, Var::Place(0));
        e.add_term(b, Var::Place(1));
        e.add_term(k, Var::Param);
        Atom::compare(e, [Rel::Eq, Rel::Le, Rel::Ge][r], LinearExpr::constant(c))
    });
    prop::collection::vec(atom, 1..4).prop_filter_map("unsatisfiable", |ps| Cube::from_predicate(&Predicate::and(ps)))
}

fn least_k_by_scan(c: &Cube, m: &Marking) -> Option<u64> {
    (0..64).find(|&j| c.instantiate(j).is_some_and(|i| i.eval(m)))
}

proptest! {
    #[test]
    fn param_witness_is_least_instance(c in arb_param_cube()) {
        for m in markings(2, 5) {
            prop_assert_eq!(c.param_witness(&m), least_k_by_scan(&c, &m), "{} at {:?}", c, m);
        }
    }

    #[test]
    fn simplify_preserves_quantified_models(c in arb_param_cube()) {
        let simple = c.simplify();
        for m in markings(2, 5) {
            prop_assert_eq!(simple.as_ref().is_some_and(|s| s.eval(&m)), c.eval(&m));
        }
    }
}
