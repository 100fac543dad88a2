use std::fs;
use std::path::Path;
use std::process::Command;

use sat2binpack::cli::run_with;

const N2: &str = "p cnf 2 3\n1 2 0\n1 2 0\n-1 -2 0\n";

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sat2binpack").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_cnf(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn reduce_writes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write_cnf(dir.path(), "n2.cnf", N2);
    let out = dir.path().join("out");
    let (code, stdout, _) = run(&["reduce", &cnf, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("42 rows, 55 variables, 111 item types, 7 instances"), "{stdout}");
    for f in ["formula.cnf", "system.txt", "bounds.txt", "aggregated.txt", "digits.txt", "family.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(out.join("instances/chi_1_1_1_0.txt").is_file());
    assert_eq!(fs::read_dir(out.join("instances")).unwrap().count(), 7);
    let family = fs::read_to_string(out.join("family.txt")).unwrap();
    assert!(family.contains("1_1_1_0 admissible"));
}

#[test]
fn solve_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write_cnf(dir.path(), "n2.cnf", N2);
    let (code, stdout, _) = run(&["solve", &cnf]);
    assert_eq!(code, 0);
    assert!(stdout.contains("brute force: SAT") && stdout.contains("bin packing: SAT"));

    let (code, stdout, _) = run(&["solve", &cnf, "--json", "--chi-mode", "full", "--jobs", "2"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["agreement"], true);
    assert_eq!(v["chi_mode"], "full");
    assert_eq!(v["item_types"], 111);
    assert_eq!(v["forward_chi"], serde_json::json!([1, 1, 1, 0]));

    let unsat = write_cnf(dir.path(), "u.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    let (code, stdout, _) = run(&["solve", &unsat]);
    assert_eq!(code, 0);
    assert!(stdout.contains("bin packing: UNSAT"));
}

#[test]
fn enumerate_and_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write_cnf(dir.path(), "n2.cnf", N2);
    let (code, stdout, _) = run(&["enumerate", &cnf]);
    assert_eq!(code, 0);
    assert!(stdout.ends_with("10 solutions\n"));
    let (code, stdout, _) = run(&["roundtrip", &cnf]);
    assert_eq!(code, 0);
    assert!(stdout.contains("tight true"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write_cnf(dir.path(), "n2.cnf", N2);
    let bad = write_cnf(dir.path(), "bad.cnf", "p cnf 1 1\n5 0\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", &bad],
        vec!["solve", "/nonexistent/x.cnf"],
        vec!["solve", &cnf, "--gamma", "8"],
        vec!["solve", &cnf, "--chi-mode", "partial"],
        vec!["frobnicate"],
        vec!["sizes", "--n-list", "3"],
    ];
    for args in cases {
        let (code, _, stderr) = run(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(!stderr.is_empty());
    }
}

#[test]
fn sizes_and_selftest() {
    let (code, stdout, _) = run(&["sizes", "--n-list", "2,4"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 4);
    let (code, stdout, _) = run(&["selftest", "--count", "6", "--seed", "9"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0 disagreements"), "{stdout}");
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_sat2binpack");
    let dir = tempfile::tempdir().unwrap();
    let cnf = write_cnf(dir.path(), "n2.cnf", N2);
    assert_eq!(Command::new(exe).args(["solve", &cnf]).status().unwrap().code(), Some(0));
    assert_eq!(Command::new(exe).args(["solve", "/nonexistent"]).output().unwrap().status.code(), Some(2));
    let help = Command::new(exe).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("selftest"));
}
