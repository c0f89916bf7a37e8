use std::fs;
use std::process::{Command, Output};

fn anyprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyprop")).args(args).env("ANYPROP_THREADS", "0").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn csv_events_voxelize_with_explicit_dims() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("ev.csv");
    let grid = dir.path().join("g.vox");
    let e = events.to_str().unwrap();
    assert!(anyprop(&["simulate", "--scene", "single", "--t1", "40000", "--out", e]).status.success());
    let text = fs::read_to_string(&events).unwrap();
    assert!(text.starts_with("t_us,x,y,p"));
    let out = anyprop(&[
        "voxelize",
        "--events",
        e,
        "--t0",
        "0",
        "--t1",
        "40000",
        "--dims",
        "48x64",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let bytes = fs::read(&grid).unwrap();
    assert_eq!(&bytes[..4], b"VOX1");
}

#[test]
fn propagate_writes_one_csv_row_per_image_row() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("l.csv");
    let out = anyprop(&["propagate", "--scene", "single", "--dt-us", "30000", "--out", labels.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&labels).unwrap();
    assert_eq!(text.lines().count(), 48);
    assert!(text.lines().all(|l| l.split(',').count() == 64));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("miou="));
}

#[test]
fn unknown_scene_is_reported() {
    let out = anyprop(&["simulate", "--scene", "nowhere", "--out", "/dev/null"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere"));
}

#[test]
fn offsets_beyond_the_interval_are_rejected() {
    let out = anyprop(&["propagate", "--scene", "single", "--dt-us", "150000", "--out", "/dev/null"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("outside"), "{}", stderr(&out));
}

#[test]
fn unknown_bench_method_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let out = anyprop(&["bench", "anytime", "--methods", "ours,magic", "--csv", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("magic"), "{}", stderr(&out));
}

#[test]
fn options_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let opts = dir.path().join("opts.txt");
    fs::write(&opts, "memory = false\ntau = 0.5\nconfidence = 0\n").unwrap();
    let out = anyprop(&[
        "propagate",
        "--scene",
        "single",
        "--dt-us",
        "20000",
        "--options",
        opts.to_str().unwrap(),
        "--out",
        dir.path().join("l.csv").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    fs::write(&opts, "tau = -1\n").unwrap();
    let bad = anyprop(&[
        "propagate",
        "--scene",
        "single",
        "--dt-us",
        "20000",
        "--options",
        opts.to_str().unwrap(),
        "--out",
        "/dev/null",
    ]);
    assert!(!bad.status.success());
}
