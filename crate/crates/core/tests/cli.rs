use std::path::Path;
use std::process::{Command, Output};

fn headway(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_headway")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_prints_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = headway(
        &[
            "simulate",
            "--fractions",
            "1.0",
            "--controller",
            "fixed:1.5",
            "--seeds",
            "2",
            "--out",
            "run",
            "--save-records",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("fraction,controller,headway,mean_delta_v"));
    assert!(text.contains("1,fixed:1.5,,0,0,0,2"), "{text}");
    assert!(dir.path().join("run/summary.csv").exists());
    assert!(dir.path().join("run/p1/seed0/control/steps.csv").exists());
}

#[test]
fn sweep_and_timespace() {
    let dir = tempfile::tempdir().unwrap();
    let out = headway(&["sweep", "--grid", "2,3", "--seeds", "2", "--out", "sweep.csv"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("best headway"));

    let out =
        headway(&["simulate", "--fractions", "0.5", "--seeds", "1", "--out", "run", "--save-records"], dir.path());
    assert!(out.status.success());
    let steps = "run/p0.5/seed0/baseline/steps.csv";
    let out = headway(&["timespace", steps, "--quantity", "density", "--bin", "50"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("time,seg_0"));
    assert_eq!(text.lines().count(), 11);

    let out = headway(&["timespace", steps, "--quantity", "occupancy"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fig2c_writes_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = headway(&["fig2c", "--out", "f"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("headway holds <= 0.9: true"), "{text}");
    assert!(text.contains("speed limit recovers within 5%: true"), "{text}");
    assert!(std::fs::read_dir(dir.path().join("f")).unwrap().count() > 0);
}

#[test]
fn train_with_no_budget_writes_the_initial_policy() {
    let dir = tempfile::tempdir().unwrap();
    let out = headway(&["train", "--scenario", "desk", "--episodes", "0", "--out", "t"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("t/policy.json").exists());
    let out = headway(
        &["simulate", "--scenario", "desk", "--fractions", "1", "--seeds", "1", "--controller", "policy:t"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--controller", "robot"][..],
        &["simulate", "--controller", "fixed:9"],
        &["simulate", "--scenario", "ring"],
        &["simulate", "--fractions", "2"],
        &["timespace", "missing.csv"],
    ] {
        let out = headway(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    assert!(!headway(&["explode"], dir.path()).status.success());
}
