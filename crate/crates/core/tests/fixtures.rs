mod support;

use std::path::PathBuf;
use std::time::Duration;

use pnpdr::io::{self, Expectation};
use pnpdr::pdr::{prove, Options, Strategy};

fn suite() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "prop"))
        .collect();
    files.sort();
    files
}

fn run(strategy: Strategy) {
    let Some(solver) = support::solver() else { return };
    for f in suite() {
        let text = std::fs::read_to_string(&f).unwrap();
        let net_path = f.parent().unwrap().join(io::property_net(&text).unwrap());
        let (net, m0) = io::read_net(&net_path).unwrap();
        let prop = io::parse_property(&text, &net).unwrap();
        let opts =
            Options { strategy, solver: solver.clone(), timeout: Some(Duration::from_secs(30)), ..Options::default() };
        let out = prove(&net, &m0, &prop.invariant(), &opts).unwrap();
        let expect = prop.expect.unwrap();
        assert_ne!(expect, Expectation::Unknown);
        assert_eq!(out.verdict.label(), expect.label(), "{}", f.display());
    }
}

#[test]
fn auto_answers_every_fixture() {
    run(Strategy::Auto);
}

#[test]
fn saturation_answers_every_fixture() {
    run(Strategy::Saturation);
}

#[test]
fn portfolio_answers_every_fixture() {
    run(Strategy::Portfolio);
}
