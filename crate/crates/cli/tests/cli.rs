use std::path::Path;
use std::process::{Command, Output};

use pontryagin::extraction::PontryaginSet;
use pontryagin::verify::Report;

const RES: &str = "32,40,24";

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pontryagin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn digest_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("digest ")).expect("digest printed").to_string()
}

#[test]
fn model_build_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["model", "build", "--kind", "bypass", "--resolution", RES], dir.path());
    let b = run(&["model", "build", "--kind", "bypass", "--resolution", RES], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).starts_with("pontryagin-field 1\n"));
    assert_eq!(digest_line(&a), digest_line(&b));
}

#[test]
fn exported_models_extract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["model", "export", "--kind", "bypass", "--resolution", RES, "--out", "fields"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["extract", "fields/bypass.field", "--out", "p", "--format", "json,obj,csv"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set = PontryaginSet::from_json(&std::fs::read_to_string(d.join("p/curves.json")).unwrap()).unwrap();
    assert_eq!((set.arc_count(), set.closed_count()), (1, 0));
    assert!(d.join("p/curves.obj").exists() && d.join("p/curves.csv").exists());
    let o = run(&["extract", "fields/bypass.field", "--p=-1,0,0", "--out", "q"], d);
    assert!(o.status.success());
    let set = PontryaginSet::from_json(&std::fs::read_to_string(d.join("q/curves.json")).unwrap()).unwrap();
    assert!(set.is_empty());
}

#[test]
fn triangle_and_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["model", "export", "--kind", "triangle", "--resolution", RES, "--out", "."], d).status.success());
    let o = run(&["extract", "triangle.field", "--frame", "jacobian"], d);
    assert!(stdout(&o).starts_with("closed 1 arcs 0"), "{}", stdout(&o));
    let o = run(&["invariant", "selflink", "curves.json"], d);
    assert_eq!(stdout(&o).trim(), "0: -1");
    let o = run(&["invariant", "hopf", "triangle.field"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"value\": -1"));
}

#[test]
fn hopf_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["model", "export", "--kind", "hopf", "--resolution", "40", "--out", "."], d).status.success());
    let o = run(&["invariant", "hopf", "hopf.field", "--p", "0.3,-0.2,1"], d);
    assert!(stdout(&o).contains("\"value\": 1"), "{}", stdout(&o));
    let o = run(&["extract", "hopf.field", "--p", "0.3,-0.2,1"], d);
    assert!(stdout(&o).starts_with("closed 1 arcs 0"));
}

#[test]
fn dividing_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["dividing", "attach", "standard", "--arc", "0,3"], d);
    assert!(o.status.success());
    let text = stdout(&o);
    for chord in ["chord T0 B2", "chord T1 T2", "chord B0 B1"] {
        assert!(text.contains(chord), "{text}");
    }
    std::fs::write(d.join("once.txt"), &text).unwrap();
    let o = run(&["dividing", "render", "once.txt"], d);
    assert!(stdout(&o).contains("T0-B2"));
    let o = run(&["dividing", "triangle", "standard", "--times", "3"], d);
    assert!(stdout(&o).contains("# grading -3"));
    assert!(stdout(&o).contains("# isotopic to input: true"));
    let o = run(&["dividing", "normalize", "standard"], d);
    assert!(stdout(&o).contains("\"chords\":[[0,5],[1,4],[2,3]]"), "{}", stdout(&o));
    let bad = run(&["dividing", "attach", "standard", "--arc", "0,2"], d);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("2"));
}

#[test]
fn verify_writes_report_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["verify", "dividing", "--out", "r", "--seed", "3"], d);
    assert!(o.status.success(), "{}", stdout(&o));
    let report: Report = serde_json::from_str(&std::fs::read_to_string(d.join("r/dividing_report.json")).unwrap()).unwrap();
    assert!(report.passed);
    assert_eq!(report.config.seed, 3);
    assert_eq!(report.config.command, "verify dividing");

    // An invalid model configuration makes the pipeline fail.
    std::fs::write(d.join("bad.toml"), "[model]\nhalf_disk_radius = 0.9\n").unwrap();
    let o = run(&["verify", "thm1", "--config", "bad.toml", "--resolution", RES], d);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn model_config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("m.toml"), "chirality = 1\nresolution = [32, 40, 24]\n").unwrap();
    let a = run(&["model", "build", "--kind", "bypass", "--config", "m.toml"], d);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("resolution 32 40 24"));
    std::fs::write(d.join("bad.toml"), "chirality = 3\n").unwrap();
    let b = run(&["model", "build", "--kind", "bypass", "--config", "bad.toml"], d);
    assert_eq!(b.status.code(), Some(2));
}
