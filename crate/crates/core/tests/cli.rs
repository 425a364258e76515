use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use roadnav::raster::{read_ften, read_pgm, write_flo, write_ften, write_pgm, FeatureTensor, FlowField, Grid};
use serde_json::Value;

fn roadnav(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_roadnav"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // The child may exit on bad arguments before reading its input.
    let _ = child.stdin.take().unwrap().write_all(stdin);
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn all_road(w: usize, h: usize) -> Vec<u8> {
    write_pgm(&Grid::new(w, h, 1u8).unwrap())
}

#[test]
fn plan_all_road_frame() {
    let out = roadnav(&["plan", "-"], &all_road(64, 48));
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["status"], "reached");
    assert_eq!(doc["destination"], serde_json::json!([31, 0]));
    assert_eq!(doc["directive"]["proceed"], 5);
    assert_eq!(doc["waypoints"][0], serde_json::json!([32.0, 47.0]));
}

#[test]
fn plan_writes_overlay_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = roadnav(&["plan", "-", "--out", out_dir], &all_road(64, 48));
    assert_eq!(out.status.code(), Some(0));
    let path = std::fs::read(dir.path().join("path.json")).unwrap();
    assert_eq!(path, out.stdout);
    let ppm = std::fs::read(dir.path().join("overlay.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n64 48\n255\n"));
    assert_eq!(ppm.len(), b"P6\n64 48\n255\n".len() + 64 * 48 * 3);
}

#[test]
fn blocked_bottom_row_exits_3() {
    let labels = Grid::from_fn(64, 48, |_, y| if y == 47 { 2u8 } else { 1 }).unwrap();
    let out = roadnav(&["plan", "-"], &write_pgm(&labels));
    assert_eq!(out.status.code(), Some(3));
    let doc = json(&out);
    assert_eq!(doc["status"], "no_destination");
    assert_eq!(doc["directive"]["rotate_deg"], 15.0);
    assert!(doc["destination"].is_null());
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(roadnav(&["plan", "-"], b"P5\n2 2\n255\n\x01").status.code(), Some(2));
    assert_eq!(roadnav(&["plan", "-"], b"P2\n1 1\n255\n1\n").status.code(), Some(2));
    // Label 9 is not in the default class table.
    let unknown = write_pgm(&Grid::new(4, 4, 9u8).unwrap());
    assert_eq!(roadnav(&["plan", "-"], &unknown).status.code(), Some(2));
    assert_eq!(roadnav(&["plan", "/no/such/file.pgm"], b"").status.code(), Some(2));
    assert_eq!(roadnav(&["frobnicate"], b"").status.code(), Some(2));
}

#[test]
fn config_unknown_key_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"apf": {"mu": 1}}"#).unwrap();
    let out = roadnav(&["plan", "-", "--config", cfg.to_str().unwrap()], &all_road(16, 16));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn config_changes_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"apf": {"step_px": 2}, "output": {"forces": true}}"#).unwrap();
    let out = roadnav(&["plan", "-", "--config", cfg.to_str().unwrap()], &all_road(33, 40));
    let doc = json(&out);
    assert_eq!(doc["waypoints"][1], serde_json::json!([16.0, 37.0]));
    assert!(doc["forces"].as_array().is_some_and(|f| !f.is_empty()));
}

#[test]
fn gen_scene_is_seeded_and_plannable() {
    let a = roadnav(&["gen-scene", "--seed", "11"], b"");
    let b = roadnav(&["gen-scene", "--seed", "11"], b"");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let grid = read_pgm(&a.stdout).unwrap();
    assert_eq!((grid.width(), grid.height()), (640, 480));
    assert!(grid.data().iter().all(|&v| v <= 2));
    let plan = roadnav(&["plan", "-"], &a.stdout);
    assert!(matches!(plan.status.code(), Some(0 | 3)));
}

#[test]
fn gen_scene_reference_with_corridor() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.json");
    std::fs::write(
        &spec,
        r#"{"width": 40, "height": 30, "obstacles": 2, "min_size": 3, "max_size": 6, "corridor": 3}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = roadnav(
        &[
            "gen-scene",
            "--scene",
            spec.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let reference: Vec<[f64; 2]> =
        serde_json::from_slice(&std::fs::read(out_dir.join("reference.json")).unwrap()).unwrap();
    assert_eq!(reference.len(), 30);
    assert!(read_pgm(&std::fs::read(out_dir.join("scene.pgm")).unwrap()).is_ok());
}

#[test]
fn smooth_and_destination() {
    // Elements scale with the image; at 640x480 they are 7, 11, 7.
    let mut labels = Grid::new(640, 480, 1u8).unwrap();
    labels.set(100, 100, 2);
    let out = roadnav(&["smooth", "-"], &write_pgm(&labels));
    assert_eq!(out.status.code(), Some(0));
    let smoothed = read_pgm(&out.stdout).unwrap();
    assert!(smoothed.data().iter().all(|&v| v == 255));

    let dest = roadnav(&["destination", "--binary", "-"], &out.stdout);
    assert_eq!(json(&dest)["destination"], serde_json::json!([319, 0]));

    let blocked = write_pgm(&Grid::from_fn(64, 48, |_, y| u8::from(y < 47)).unwrap());
    let dest = roadnav(&["destination", "--binary", "-"], &blocked);
    assert_eq!(dest.status.code(), Some(3));
    assert!(json(&dest)["destination"].is_null());
}

#[test]
fn blur_explicit_and_seeded() {
    let img = FeatureTensor::from_vec(1, 1, 5, vec![0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
    let out = roadnav(&["blur", "-", "--length", "3", "--angle", "0"], &write_ften(&img));
    assert_eq!(out.status.code(), Some(0));
    let blurred = read_ften(&out.stdout).unwrap();
    for (a, b) in blurred.values().iter().zip([0.0, 1.0, 1.0, 1.0, 0.0]) {
        assert!((a - b).abs() < 1e-6);
    }

    let pgm = write_pgm(&Grid::from_fn(16, 16, |x, y| ((x * 13 + y * 7) % 256) as u8).unwrap());
    let a = roadnav(&["blur", "-", "--seed", "3"], &pgm);
    let b = roadnav(&["blur", "-", "--seed", "3"], &pgm);
    assert_eq!(a.stdout, b.stdout);
    assert!(read_pgm(&a.stdout).is_ok());
    assert_eq!(roadnav(&["blur", "-", "--length", "4"], &pgm).status.code(), Some(2));
    assert_eq!(
        roadnav(&["blur", "-", "--length", "3", "--angle", "-45"], &pgm)
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn warp_unit_shift() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("f.ften");
    let flow = dir.path().join("f.flo");
    let f = FeatureTensor::from_vec(1, 2, 4, (1..=8).map(f64::from).collect()).unwrap();
    std::fs::write(&features, write_ften(&f)).unwrap();
    std::fs::write(&flow, write_flo(&FlowField::constant(4, 2, 1.0, 0.0).unwrap())).unwrap();
    let out = roadnav(&["warp", features.to_str().unwrap(), flow.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    let warped = read_ften(&out.stdout).unwrap();
    assert_eq!(warped.values(), &[2.0, 3.0, 4.0, 0.0, 6.0, 7.0, 8.0, 0.0]);

    std::fs::write(&flow, write_flo(&FlowField::constant(3, 2, 0.0, 0.0).unwrap())).unwrap();
    let out = roadnav(&["warp", features.to_str().unwrap(), flow.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(2));
}

fn write_labels(dir: &Path, name: &str, w: usize, h: usize, v: &[u8]) -> String {
    let p = dir.join(name);
    std::fs::write(&p, write_pgm(&Grid::from_vec(w, h, v.to_vec()).unwrap())).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn metrics_report() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write_labels(dir.path(), "gt.pgm", 2, 2, &[0, 0, 1, 1]);
    let pred = write_labels(dir.path(), "pred.pgm", 2, 2, &[0, 1, 1, 1]);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    std::fs::write(&a, r#"{"waypoints": [[0, 0]]}"#).unwrap();
    std::fs::write(&b, "[[3, 4]]").unwrap();
    let out = roadnav(
        &[
            "metrics",
            "--pred",
            &pred,
            "--gt",
            &gt,
            "--classes",
            "2",
            "--path",
            a.to_str().unwrap(),
            "--reference",
            b.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["miou"], 7.0 / 12.0);
    assert_eq!(doc["hausdorff_px"], 5.0);
    assert!(doc["odr"].is_null());
    assert_eq!(doc["nofp"], 0.0);
    assert_eq!(doc["counts"]["pixels"], 4);

    let out = roadnav(&["metrics", "--pred", &pred, "--pred", &pred, "--gt", &gt], b"");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn episode_over_files_and_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let road = dir.path().join("road.pgm");
    std::fs::write(&road, all_road(65, 60)).unwrap();
    let r = road.to_str().unwrap();
    let out = roadnav(&["episode", r, r, r], b"");
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["frames"], 3);
    assert_eq!(doc["final_pose"]["y"], -75.0);
    assert!(doc.get("hausdorff_px").is_none());

    let a = roadnav(&["episode", "--frames", "3", "--seed", "5"], b"");
    let b = roadnav(&["episode", "--frames", "3", "--seed", "5"], b"");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["frames"], 3);
}
