use std::fs;
use std::process::{Command, Output};

fn photoplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photoplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn free_space_run_takes_one_photo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = photoplan(&["run", "free_space_2d", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("photos: 1\n"));
    let photos = fs::read_to_string(out.join("photos.csv")).unwrap();
    assert_eq!(photos.lines().count(), 2);
    for f in [
        "ticks.csv",
        "coverage_curve.csv",
        "coverage.csv",
        "mission.json",
        "timing.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn seed_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = photoplan(&[
        "run",
        "free_space_2d",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed: 7\n"));
}

#[test]
fn unknown_scenario_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[workspace]\nlower = [0.0, 0.0]\nupper = [10.0, 10.0]\nbogus_key = 1\n\n[target]\ncenter = [5.0, 5.0]\nsize = [2.0, 2.0]\n",
    )
    .unwrap();
    let o = photoplan(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_name_lists_bundled_ones() {
    let o = photoplan(&["run", "no_such_scenario"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("free_space_2d"));
}

#[test]
fn heatmap_rejects_a_non_positive_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    for step in ["0", "-1"] {
        let o = photoplan(&[
            "heatmap",
            "free_space_2d",
            "--step",
            step,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("--step"));
    }
    assert!(!out.exists());
}

#[test]
fn heatmap_writes_one_row_per_feasible_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let o = photoplan(&[
        "heatmap",
        "free_space_2d",
        "--step",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,G"));
    let rows = lines.count();
    assert!(stdout(&o).contains(&format!("({rows} feasible)")));
}

#[test]
fn unknown_suite_lists_the_available_ones() {
    let o = photoplan(&["validate", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    for s in ["raycast", "gp", "pso-error", "utility"] {
        assert!(stderr(&o).contains(s), "{}", stderr(&o));
    }
}

#[test]
fn utility_suite_passes() {
    let o = photoplan(&["validate", "utility"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn scenarios_are_listed() {
    let o = photoplan(&["scenarios"]);
    assert!(o.status.success());
    let names = stdout(&o);
    for n in [
        "free_space_2d",
        "one_obstacle_2d",
        "two_face_2d",
        "slab_3d",
        "building_3d",
    ] {
        assert!(names.lines().any(|l| l == n), "{n} not listed");
    }
}
