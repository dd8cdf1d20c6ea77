use proptest::prelude::*;

use super::*;
use crate::formula::{eval, Atom, LinearExpr, Rel, Var};
use crate::petri::tests::parity;

const PARITY_NET: &str = include_str!("../../../../fixtures/parity.net");
const PARITY_PNML: &str = include_str!("../../../../fixtures/parity.pnml");

#[test]
fn parity_text_fixture() {
    let (net, m0) = parse_net_text(PARITY_NET).unwrap();
    assert_eq!(net, parity());
    assert_eq!(m0, Marking(vec![1]));
}

#[test]
fn parity_pnml_matches_text() {
    assert_eq!(parse_pnml(PARITY_PNML.as_bytes()).unwrap(), parse_net_text(PARITY_NET).unwrap());
}

#[test]
fn inline_parity() {
    let (net, m0) = parse_net_text("pl p 1\ntr t_inc -> p*2\ntr t_dec p*2 ->\n").unwrap();
    assert_eq!((net, m0), (parity(), Marking(vec![1])));
}

#[test]
fn empty_text_is_empty_net() {
    let (net, m0) = parse_net_text("").unwrap();
    assert_eq!(net.num_places(), 0);
    assert_eq!(net.num_transitions(), 0);
    assert!(m0.0.is_empty());
}

#[test]
fn text_errors_carry_line_numbers() {
    assert!(matches!(parse_net_text("pl p\npl p\n"), Err(IoError::Petri(PetriError::DuplicateName(_)))));
    assert!(matches!(parse_net_text("pl p\n\ntr t q -> p\n"), Err(IoError::UnknownPlace { line: 3, .. })));
    assert!(matches!(parse_net_text("pl p x\n"), Err(IoError::Syntax { line: 1, .. })));
    assert!(matches!(parse_net_text("pl p\ntr t p\n"), Err(IoError::Syntax { line: 2, .. })));
    assert!(matches!(parse_net_text("place p\n"), Err(IoError::Syntax { line: 1, .. })));
    assert!(matches!(parse_net_text("pl p\ntr t p*x ->\n"), Err(IoError::Syntax { line: 2, .. })));
}

#[test]
fn repeated_arcs_add_up() {
    let (net, _) = parse_net_text("tr t p p*2 -> q\npl p\npl q # late declarations\n").unwrap();
    let t = net.transition_id("t").unwrap();
    assert_eq!(net.pre(t), &[3, 0]);
    assert_eq!(net.post(t), &[0, 1]);
}

fn pnml(body: &str) -> String {
    format!(
        r#"<pnml><net id="n" type="http://www.pnml.org/version-2009/grammar/ptnet"><page id="g">{body}</page></net></pnml>"#
    )
}

#[test]
fn pnml_defaults_and_errors() {
    let (net, m0) =
        parse_pnml(pnml(r#"<place id="a"/><transition id="t"/><arc id="x" source="a" target="t"/>"#).as_bytes())
            .unwrap();
    assert_eq!(net.pre(net.transition_id("t").unwrap()), &[1]);
    assert_eq!(m0, Marking(vec![0]));

    let (net, _) = parse_pnml(pnml(r#"<place id="a"/><place id="b"/><transition id="t"/>"#).as_bytes()).unwrap();
    assert!(net.transition_ids().all(|t| net.pre(t) == [0, 0] && net.post(t) == [0, 0]));

    let bad = [
        r#"<place id="a"/><place id="b"/><arc id="x" source="a" target="b"/>"#,
        r#"<place id="a"/><transition id="t"/><arc id="x" source="a" target="u"/>"#,
        r#"<place id="a"/><transition id="t"/><arc id="x" source="a" target="t"><inscription><text>-1</text></inscription></arc>"#,
        r#"<place id="a"><initialMarking><text>-2</text></initialMarking></place>"#,
    ];
    for b in bad {
        assert!(matches!(parse_pnml(pnml(b).as_bytes()), Err(IoError::Pnml(_))), "{b}");
    }
    assert!(matches!(parse_pnml(b"<pnml><net"), Err(IoError::Xml(_))));
    let colored = r#"<pnml><net id="n" type="http://www.pnml.org/version-2009/grammar/symmetricnet"/></pnml>"#;
    assert!(matches!(parse_pnml(colored.as_bytes()), Err(IoError::Pnml(m)) if m.contains("P/T")));
}

#[test]
fn property_headers() {
    let net = parity();
    let f = parse_property("net: parity.net\n# comment\ngoal: reachable\nexpect: reachable\np =\n 0\n", &net).unwrap();
    assert_eq!(f.net.as_deref(), Some("parity.net"));
    assert_eq!(f.goal, GoalKind::Reachable);
    assert_eq!(f.expect, Some(Expectation::Reachable));
    assert!(!eval(&f.invariant(), &Marking(vec![0])));
    assert!(eval(&f.invariant(), &Marking(vec![1])));
    assert!(parse_property("goal: sometimes\np >= 0", &net).is_err());
    assert!(parse_property("goal: invariant\n", &net).is_err());
}

#[test]
fn trace_round_trip() {
    let net = parity();
    let seq = net.sequence(&["t_inc", "t_dec", "t_dec"]).unwrap();
    let text = write_trace(&net, &seq, &Marking(vec![0]));
    assert!(text.starts_with(TRACE_HEADER));
    assert!(text.contains("trace: t_inc t_dec t_dec\n"));
    assert!(text.contains("final: p=0\n"));
    assert_eq!(parse_trace(&text, &net).unwrap(), seq);
    let empty = write_trace(&net, &FiringSequence(vec![]), &Marking(vec![0]));
    assert!(empty.contains("initial marking violates"));
    assert!(parse_trace(&empty, &net).unwrap().is_empty());
}

fn cube(lhs: LinearExpr, rel: Rel, rhs: i128) -> Cube {
    Cube::from_predicate(&Atom::compare(lhs, rel, LinearExpr::constant(rhs))).unwrap()
}

fn parity_certificate() -> Certificate {
    let p = LinearExpr::var(Var::Place(0));
    let lt1 = cube(p.clone(), Rel::Le, 0);
    let even = cube(p.plus(&LinearExpr::term(-2, Var::Param)), Rel::Eq, 2);
    Certificate { clauses: vec![lt1.negate(), even.negate()] }
}

#[test]
fn certificate_lines_have_the_expected_shape_and_parse_back() {
    let net = parity();
    let cert = parity_certificate();
    let text = write_certificate(&net, &cert);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CERTIFICATE_HEADER);
    assert_eq!(lines[1], "# (not (p <= 0))");
    assert_eq!(lines[2], "# (forall (k) (not (p - 2 * k = 2)))");
    let back = parse_certificate(&text, &net).unwrap();
    for v in 0..40 {
        assert_eq!(eval(&back, &Marking(vec![v])), v % 2 == 1, "p = {v}");
        assert_eq!(eval(&back, &Marking(vec![v])), eval(&cert.to_predicate(), &Marking(vec![v])));
    }
    assert!(parse_certificate("[PDR] Certificate of invariance\n# (p >=\n", &net).is_err());
    assert!(parse_certificate("", &net).is_err());
    assert!(eval(&parse_certificate("p >= 3 # plain predicate\n", &net).unwrap(), &Marking(vec![3])));
}

#[test]
fn quoted_place_names_survive_certificates() {
    let (net, _) = parse_net_text("pl p-1 1\npl and 0\ntr t p-1 -> and\n").unwrap();
    let c = cube(LinearExpr::var(Var::Place(0)).plus(&LinearExpr::var(Var::Place(1))), Rel::Ge, 2);
    let cert = Certificate { clauses: vec![c.negate()] };
    let back = parse_certificate(&write_certificate(&net, &cert), &net).unwrap();
    assert!(eval(&back, &Marking(vec![1, 0])));
    assert!(!eval(&back, &Marking(vec![1, 1])));
}

fn arb_net() -> impl Strategy<Value = (Net, Marking)> {
    (1usize..5, 0usize..5).prop_flat_map(|(np, nt)| {
        (
            prop::collection::vec(prop::collection::vec(0u64..4, np), nt),
            prop::collection::vec(prop::collection::vec(0u64..4, np), nt),
            prop::collection::vec(0u64..10, np),
        )
            .prop_map(move |(pre, post, m0)| {
                let places = (0..np).map(|i| format!("p{i}")).collect();
                let trs = (0..nt).map(|i| format!("t{i}")).collect();
                (Net::new(places, trs, pre, post).unwrap(), Marking(m0))
            })
    })
}

proptest! {
    #[test]
    fn text_round_trip((net, m0) in arb_net()) {
        let text = print_net_text(&net, &m0);
        prop_assert_eq!(parse_net_text(&text).unwrap(), (net, m0));
    }
}
