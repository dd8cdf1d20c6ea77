use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn have_solver() -> bool {
    Command::new("z3").arg("-version").output().is_ok_and(|o| o.status.success())
}

fn pnpdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnpdr"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("PNPDR_SOLVER")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = pnpdr(&[]);
    assert_eq!(o.status.code(), Some(1));
    let o = pnpdr(&["check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_files_exit_one() {
    let o = pnpdr(&["check", "--net", "nope.net", "--property", "p >= 1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pnpdr(&["check", "--net", "parity.net", "--property", "q >= 1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_spawn_failure_exits_one() {
    let o = pnpdr(&[
        "check",
        "--net",
        "mutex.net",
        "--property",
        "cs1 + cs2 <= 1",
        "--solver-cmd",
        "no-such-solver-binary",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn parity_saturation_prints_a_certificate() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("parity.cert");
    let script = dir.path().join("parity.smt2");
    let o = pnpdr(&[
        "check",
        "--net",
        "parity.net",
        "--property",
        "p >= 1",
        "--strategy",
        "saturation",
        "--certificate-out",
        cert.to_str().unwrap(),
        "--script-out",
        script.to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.lines().any(|l| l == "verdict: INVARIANT"), "{out}");
    assert!(out.contains("[PDR] Certificate of invariance\n# (not "), "{out}");
    assert!(out.lines().any(|l| l.starts_with("time: ")));

    let c = cert.to_str().unwrap();
    let ok = pnpdr(&["certify", "--net", "parity.net", "--property", "p >= 1", "--certificate", c]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("certificate: VALID"));

    let solved = Command::new("z3").arg(&script).output().unwrap();
    assert_eq!(stdout(&solved).split_whitespace().collect::<Vec<_>>(), ["unsat", "unsat", "unsat"]);
}

#[test]
fn parity_from_two_is_reachable_by_t_dec() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.txt");
    let o = pnpdr(&["check", "--net", "parity2.net", "--property", "p >= 1", "--trace-out", trace.to_str().unwrap()]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("verdict: REACHABLE\n[PDR] Counter-example trace\ntrace: t_dec\nfinal: p=0\n"), "{out}");
    assert!(std::fs::read_to_string(trace).unwrap().contains("trace: t_dec"));
}

#[test]
fn property_files_and_expectations() {
    if !have_solver() {
        return;
    }
    let o = pnpdr(&["check", "--net", "parity2.net", "--property-file", "parity2_goal.prop"]);
    let out = stdout(&o);
    assert!(out.contains("goal: reachable (p = 0)"), "{out}");
    assert!(out.contains("expected: REACHABLE\n"), "{out}");
}

#[test]
fn certify_rejects_bad_certificates() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let weak = dir.path().join("weak.cert");
    std::fs::write(&weak, "true\n").unwrap();
    let o = pnpdr(&["certify", "--net", "parity.net", "--property", "p >= 1", "--certificate", weak.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("certificate: INVALID"));

    let corrupt = dir.path().join("corrupt.cert");
    std::fs::write(&corrupt, "[PDR] Certificate of invariance\n# (p >=\n").unwrap();
    let o =
        pnpdr(&["certify", "--net", "parity.net", "--property", "p >= 1", "--certificate", corrupt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn timeout_is_honored() {
    if !have_solver() {
        return;
    }
    let start = Instant::now();
    let o = pnpdr(&["check", "--net", "parity.net", "--property", "p >= 1", "--strategy", "hurdle", "--timeout", "2"]);
    let took = start.elapsed();
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("verdict: UNKNOWN"));
    assert!(took < Duration::from_secs(3) && took > Duration::from_secs(1), "{took:?}");
}

#[test]
fn bench_on_an_empty_directory_prints_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = pnpdr(&["bench", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.contains("0 problems"));
}

#[test]
fn generated_problems_bench_cleanly() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(pnpdr(&["generate", "--out", d, "--seed", "9", "--count", "8"]).status.code(), Some(0));
    let jsonl = dir.path().join("out.jsonl");
    let o = pnpdr(&["bench", d, "--timeout", "30", "--jsonl", jsonl.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let records: Vec<serde_json::Value> =
        std::fs::read_to_string(jsonl).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 8);
    for r in &records {
        assert_eq!(r["results"]["auto"]["status"], "ok", "{r}");
    }
}
