use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;
use zerofree_cli::{run, Report};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zerofree"))
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const EDGE_COVER: &str = "holant\n3 2\n0 1\n1 2\nfamily = edge_cover\nlambda = 1\nrho = 0.5\n";
const TRIANGLE_EVEN: &str = "holant\n3 3\n0 1\n1 2\n0 2\nfamily = even_subgraph\nlambda = 0.5\nrho = 0.5\n";

fn report(args: &[&str]) -> (i32, Report) {
    let out = run(std::iter::once("zerofree").chain(args.iter().copied()));
    assert!(out.stderr.is_empty(), "{}", out.stderr);
    (out.code, serde_json::from_str(&out.stdout).unwrap())
}

#[test]
fn region_dist_closed_form() {
    let (code, r) = report(&["region-dist", "--region", "halfplane eps=0.5", "--lambda", "1.0"]);
    assert_eq!(code, 0);
    assert_eq!(r.results["distance"].as_f64(), Some(1.0));
}

#[test]
fn certify_edge_cover_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir, "ec.model", EDGE_COVER);
    let (code, r) = report(&["certify", "--model", m.to_str().unwrap(), "--lambda", "1.0"]);
    assert_eq!(code, 0);
    assert_eq!(r.passed, Some(true));
    assert_eq!(r.results["comparison"]["pinnings"].as_u64(), Some(9));
    assert!(!r.tags.is_empty());
}

#[test]
fn exit_codes() {
    let out = bin().arg("no-such-verb").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.model", "holant\n2 1\n0 1\nfamily = edge_cover\nlambda = 1\nrho = 2\n");
    let out = bin().args(["certify", "--model", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.model:4"));
    let m = write(&dir, "ec.model", EDGE_COVER);
    let out = bin().args(["certify", "--model", m.to_str().unwrap(), "--max-sites", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["roots", "--beta", "1", "--gamma", "1", "--d", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn reports_round_trip_and_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir, "es.model", TRIANGLE_EVEN);
    let args = ["sample", "--model", m.to_str().unwrap(), "--steps", "50", "--seed", "9", "--trace"];
    let a = run(std::iter::once("zerofree").chain(args));
    let b = run(std::iter::once("zerofree").chain(args));
    assert_eq!(a.stdout, b.stdout);
    let r: Report = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!(r.to_json() + "\n", a.stdout);
    assert_eq!(r.table.as_ref().unwrap().rows.len(), 50);
}

#[test]
fn floats_have_seventeen_digits() {
    let (_, r) = report(&["eta", "--delta", "0.3"]);
    let text = r.to_json();
    assert!(text.contains("2.6666666666666668e1"), "{text}");
}

#[test]
fn mix_diag_and_non_ergodic_witness() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir, "es.model", TRIANGLE_EVEN);
    let (code, r) = report(&["mix-diag", "--model", m.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(r.results["detailed_balance_residual"].as_f64().unwrap() <= 1e-12);
    let hard = write(&dir, "hard.model", &TRIANGLE_EVEN.replace("rho = 0.5", "rho = 0"));
    let (code, r) = report(&["mix-diag", "--model", hard.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(r.results["ergodicity"]["ergodic"], Value::Bool(false));
    assert!(r.results["ergodicity"]["witness"].is_array());
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let code = run([
        "zerofree",
        "zero-scan",
        "--coeffs",
        "1,1",
        "--region",
        "disk c=-1 r=0.01",
        "--seed",
        "1",
        "--samples",
        "100",
        "--format",
        "csv",
        "--output",
        out.to_str().unwrap(),
    ])
    .code;
    assert_eq!(code, 2);
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("zero_found,true"));
}

#[test]
fn admissible_and_fourier_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let hom = write(&dir, "hom.model", "vertexspin\n3 2\n0 1\n1 2\nq = 2\nmatrix = 1.1 0.9 0.95 1.05\n");
    let (code, r) = report(&[
        "admissible", "--model", hom.to_str().unwrap(), "--eps", "0.01", "--samples", "200", "--seed", "2", "--pinnings",
        "2", "--compare",
    ]);
    assert_eq!(code, 0, "{:?}", r.results);
    assert!(r.results["polydisk_radius"].as_f64().unwrap() > 0.0);
    let cube = write(&dir, "f.model", "cube\nn = 2\ncoef.0,1 = 0.1\n");
    let (code, r) = report(&["fourier-stats", "--model", cube.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((r.results["stats"]["condition_value"].as_f64().unwrap() - 0.1414213562373095).abs() < 1e-12);
}

#[test]
fn ising_transform_verb() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(&dir, "k2.model", "holant\n2 1\n0 1\nfamily = even_subgraph\nlambda = 0.5\nrho = 0.5\n");
    let (code, r) = report(&["ising-transform", "--model", m.to_str().unwrap(), "--draws", "20000", "--seed", "4"]);
    assert_eq!(code, 0);
    assert!(r.results["analytic_tv"].as_f64().unwrap() <= 1e-10);
    assert!(r.results["empirical_tv"].as_f64().unwrap() <= 0.02);
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(
        &dir,
        "rho.toml",
        "verb = \"certify\"\nfamily = [\"even_subgraph\"]\ngraph = [\"cycle:3\"]\nlambda = [0.5]\nrho = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]\n",
    );
    let (code, r) = report(&["sweep", "--grid", g.to_str().unwrap()]);
    assert_eq!(code, 0);
    let t = r.table.unwrap();
    assert_eq!(t.rows.len(), 9);
    let passes = t.header.iter().position(|h| h == "passes").unwrap();
    assert!(t.rows.iter().all(|row| row[passes] == "true"));

    let g = write(&dir, "roots.toml", "verb = \"roots\"\nbeta = [0.0, 0.5]\ngamma = [1.0, 1.5]\nd = [2, 5, 8]\n");
    let (code, r) = report(&["sweep", "--grid", g.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r.table.unwrap().rows.len(), 12);

    let bad = write(&dir, "bad.toml", "verb = \"roots\"\ncolour = [1]\n");
    assert_eq!(run(["zerofree", "sweep", "--grid", bad.to_str().unwrap()]).code, 1);
}
