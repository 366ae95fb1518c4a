// The `dvo` binary end to end on a small synthetic fixture.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use decoupled_vo::dataset::SceneFile;
use tempfile::TempDir;

fn dvo(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvo"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("dvo runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), stderr(o));
}

/// The room corner at quarter resolution, with depth noise so seeds matter.
fn small_scene(dir: &Path, frames: usize) -> PathBuf {
    let mut scene = SceneFile::room_corner(frames);
    scene.depth_noise_sigma = 0.002;
    scene.seed = 4;
    let i = &mut scene.intrinsics;
    i.width = 160;
    i.height = 120;
    i.fx /= 4.0;
    i.fy /= 4.0;
    i.cx = 79.5;
    i.cy = 59.5;
    let path = dir.join("scene.toml");
    fs::write(&path, scene.to_toml()).unwrap();
    path
}

fn synth(dir: &Path, frames: usize) -> PathBuf {
    let scene = small_scene(dir, frames);
    let seq = dir.join("seq");
    ok(&dvo(&[&"synth", &scene, &seq]));
    seq.join("manifest.toml")
}

fn pose_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p));
        } else {
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn run_writes_one_pose_per_frame_and_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let manifest = synth(tmp.path(), 6);
    let est = tmp.path().join("est.txt");
    let diag = tmp.path().join("diag.csv");
    let o = dvo(&[&"run", &manifest, &est, &"--diagnostics", &diag]);
    ok(&o);
    assert_eq!(pose_lines(&est), 6);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("ATE RMSE"), "{stdout}");

    let text = fs::read_to_string(&diag).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("frame_id,timestamp,status"));
    assert_eq!(rows.len(), 7);
    let width = rows[0].split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == width));
    decoupled_vo::RunConfig::from_comment_block(&text).unwrap();
}

#[test]
fn single_thread_run_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let manifest = synth(tmp.path(), 6);
    let (a, b) = (tmp.path().join("a.txt"), tmp.path().join("b.txt"));
    ok(&dvo(&[&"run", &manifest, &a]));
    ok(&dvo(&[&"run", &manifest, &b, &"--single-thread"]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn max_frames_limits_the_run() {
    let tmp = TempDir::new().unwrap();
    let manifest = synth(tmp.path(), 6);
    let est = tmp.path().join("est.txt");
    ok(&dvo(&[&"run", &manifest, &est, &"--max-frames", &"3"]));
    assert_eq!(pose_lines(&est), 3);
}

#[test]
fn negative_sigma_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "[kcc]\nsigma = -0.2\n").unwrap();
    // the config is validated before the sequence is touched
    let o = dvo(&[&"run", &tmp.path().join("none.toml"), &tmp.path().join("out.txt"), &"--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kcc.sigma"), "{}", stderr(&o));
    assert!(!tmp.path().join("out.txt").exists());
}

#[test]
fn missing_sequence_is_a_load_error() {
    let tmp = TempDir::new().unwrap();
    let o = dvo(&[&"run", &tmp.path().join("none.toml"), &tmp.path().join("out.txt")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("none.toml"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dvo(&[&"run"]).status.code(), Some(2));
    assert_eq!(dvo(&[&"frobnicate"]).status.code(), Some(2));
    assert_eq!(dvo(&[&"--help"]).status.code(), Some(0));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let scene = small_scene(tmp.path(), 3);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&dvo(&[&"synth", &scene, &a]));
    ok(&dvo(&[&"synth", &scene, &b]));
    ok(&dvo(&[&"synth", &scene, &c, &"--seed", &"99"]));
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    assert_eq!(ta.len(), 3 + 3 + 3);
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
}

#[test]
fn invalid_spec_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let mut scene = SceneFile::room_corner(3);
    scene.planes.truncate(1);
    let spec = tmp.path().join("one_plane.toml");
    fs::write(&spec, scene.to_toml()).unwrap();
    let out = tmp.path().join("out");
    let o = dvo(&[&"synth", &spec, &out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn checked_in_scene_files_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenes");
    for name in ["room_corner.toml", "room_corner_noisy.toml", "low_texture.toml"] {
        let scene = SceneFile::load(&dir.join(name)).unwrap();
        scene.into_spec(&dir).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/config/default.toml");
    assert_eq!(decoupled_vo::RunConfig::load(&cfg).unwrap(), decoupled_vo::RunConfig::default());
}

#[test]
fn eval_of_ground_truth_against_itself_is_zero() {
    let tmp = TempDir::new().unwrap();
    let manifest = synth(tmp.path(), 4);
    let gt = manifest.parent().unwrap().join("groundtruth.txt");
    let report = tmp.path().join("ate.csv");
    let o = dvo(&[&"eval", &gt, &gt, &"--report", &report, &"--no-align"]);
    ok(&o);
    let csv = fs::read_to_string(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rmse,mean,median,std,sse"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(values, vec![0.0; 5]);
    // with alignment: needs three poses, the fixture has four
    ok(&dvo(&[&"eval", &gt, &gt]));
}

#[test]
fn malformed_trajectory_reports_line() {
    let tmp = TempDir::new().unwrap();
    let good = tmp.path().join("good.txt");
    let bad = tmp.path().join("bad.txt");
    fs::write(&good, "0 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n2 0 0 0 0 0 0 1\n").unwrap();
    fs::write(&bad, "# header\n0 0 0 0 0 0 0 1\n1 0 0 zero 0 0 0 1\n").unwrap();
    let o = dvo(&[&"eval", &bad, &good]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.txt:3:"), "{err}");
}

#[test]
fn drift_of_consistent_motion_is_zero() {
    let tmp = TempDir::new().unwrap();
    let est = tmp.path().join("est.txt");
    let tags = tmp.path().join("tags.txt");
    fs::write(&est, "0 0 0 0 0 0 0 1\n1 0.5 0 0.2 0 0 0 1\n").unwrap();
    // the same motion seen from a tag frame 2 m ahead
    fs::write(&tags, "0 0 0 -2 0 0 0 1\n1 0.5 0 -1.8 0 0 0 1\n").unwrap();
    let o = dvo(&[&"drift", &est, &tags]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("drift 0.000000 m"), "{:?}", o);
    fs::write(&tags, "0 0 0 -2 0 0 0 1\n1 0.55 0 -1.8 0 0 0 1\n").unwrap();
    let o = dvo(&[&"drift", &est, &tags]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("drift 0.050000 m"), "{:?}", o);
}

#[test]
fn plot_data_series() {
    let tmp = TempDir::new().unwrap();
    let single = tmp.path().join("single.txt");
    fs::write(&single, "0 0 0 0 0 0 0 1\n").unwrap();
    let out = tmp.path().join("plot.csv");
    ok(&dvo(&[&"plot-data", &single, &"--out", &out]));
    assert_eq!(fs::read_to_string(&out).unwrap(), "series,timestamp,x,y,z\nsingle,0.000000000,0.000000000,0.000000000,0.000000000\n");

    let manifest = synth(tmp.path(), 4);
    let gt = manifest.parent().unwrap().join("groundtruth.txt");
    let est = tmp.path().join("est.txt");
    ok(&dvo(&[&"run", &manifest, &est]));
    ok(&dvo(&[&"plot-data", &gt, &est, &"--out", &out]));
    let text = fs::read_to_string(&out).unwrap();
    let labels: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels.into_iter().collect::<Vec<_>>(), ["est", "groundtruth"]);
    assert_eq!(text.lines().count(), 1 + 8);

    // a file that is not a trajectory
    let o = dvo(&[&"plot-data", &gt, &manifest, &"--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("manifest.toml"), "{}", stderr(&o));
}
