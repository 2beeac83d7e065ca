mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use singular_arc::io::{read_csv, write_trajectory};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singular-arc"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn construct_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["construct", "--step", "1e-3", "--out", "x.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert!(text.starts_with("t,q1,q2,qd1,qd2,u1,u2,l1,l2,l3,l4\n"));
    assert_eq!(text.lines().count(), 702);
    assert!(dir.path().join("x.meta.json").exists());
}

#[test]
fn construct_zero_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[integrator]\nhorizon = 0.0\n");
    let o = run(&["construct", "--config", &cfg, "--out", "x.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let tr = read_csv(std::fs::File::open(dir.path().join("x.csv")).unwrap()).unwrap();
    assert_eq!(tr.len(), 1);
}

#[test]
fn construct_outside_rk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[initial]\nx0 = [0.1, 1.5707963267948966, 0.3, 0.5]\nlambda0 = [1.0, -3.0, 0.5, -6.0]\n",
    );
    let o = run(&["construct", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 2);
    let cfg = write(dir.path(), "c.toml", "[nonsense]\n");
    assert_eq!(code(&run(&["construct", "--config", &cfg], dir.path())), 2);
    assert_eq!(code(&run(&["construct", "--step", "-1"], dir.path())), 2);
}

#[test]
fn corrupted_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.csv", "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0,0\n0.1,0,0,oops,0,0,0\n");
    assert_eq!(code(&run(&["diagnose", &p], dir.path())), 3);
    let p = write(dir.path(), "back.csv", "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0,0\n0,0,0,0,0,0,0\n");
    assert_eq!(code(&run(&["regularize", &p], dir.path())), 3);
}

#[test]
fn costate_free_file_gets_a_notice() {
    let dir = tempfile::tempdir().unwrap();
    let mut tr = extremal(1e-3, 0.1);
    for s in &mut tr.samples {
        s.lambda = None;
    }
    let p = dir.path().join("plain.csv");
    write_trajectory(&tr, &p).unwrap();
    let o = run(&["diagnose", p.to_str().unwrap(), "--step", "1e-3"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("MissingCostates"));
    assert_eq!(code(&run(&["regularize", p.to_str().unwrap()], dir.path())), 5);
}

#[test]
fn regularize_spiked_and_bang_bang() {
    let dir = tempfile::tempdir().unwrap();
    let (noisy, _) = spike(&extremal(1e-3, 0.7), 0.01, 5.0, 9);
    let p = dir.path().join("noisy.csv");
    write_trajectory(&noisy, &p).unwrap();
    let o = run(&["regularize", p.to_str().unwrap(), "--out", "fixed.csv", "--classification", "cls.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("fixed.report.json").exists());
    assert!(dir.path().join("cls.csv").exists());

    let bb = bang_bang(1e-3, 0.7, 0.35, 1.0);
    let p = dir.path().join("bb.csv");
    write_trajectory(&bb, &p).unwrap();
    let o = run(&["regularize", p.to_str().unwrap(), "--out", "bb_out.csv", "--step", "1e-3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let back = read_csv(std::fs::File::open(dir.path().join("bb_out.csv")).unwrap()).unwrap();
    assert_eq!(back.samples, bb.samples);
}

#[test]
fn regularize_partial() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.csv");
    write_trajectory(&extremal(1e-3, 0.7), &p).unwrap();
    let cfg = write(dir.path(), "c.toml", "[bounds]\nlower = [-15.0, -10.0]\nupper = [20.0, 10.0]\n");
    let o = run(&["regularize", p.to_str().unwrap(), "--config", &cfg, "--step", "1e-3"], dir.path());
    assert_eq!(code(&o), 6, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn certify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["certify", "--samples", "500", "--seed", "7", "--workers", "1", "--out", "a.json"], dir.path());
    let b = run(&["certify", "--samples", "500", "--seed", "7", "--workers", "4", "--out", "b.json"], dir.path());
    assert_eq!((code(&a), code(&b)), (0, 0));
    let ra = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    let rb = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    let strip = |s: &str| {
        let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
        v.as_object_mut().unwrap().remove("workers");
        v.as_object_mut().unwrap().remove("elapsed_seconds");
        v
    };
    assert_eq!(strip(&ra), strip(&rb));
    let c = run(&["certify", "--samples", "500", "--seed", "8", "--out", "c.json"], dir.path());
    assert_eq!(code(&c), 0);
    assert_ne!(strip(&ra), strip(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()));
}
