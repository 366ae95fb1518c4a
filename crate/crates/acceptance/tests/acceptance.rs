// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Built with `harness = false`; run with
//
//     cargo test --release -p vo-acceptance --test acceptance
//
// Criterion 6 needs externally downloaded ICL-NUIM sequences converted to
// manifests; set DVO_ICL_OFFICE0 and/or DVO_ICL_OFFICE2_PART1 to their
// manifest paths to enable it. It never fails the suite.

use std::path::{Path, PathBuf};
use std::time::Instant;

use decoupled_vo::dataset::trajectory::trajectory_to_string;
use decoupled_vo::dataset::{load_sequence, Frame, SceneFile, SyntheticSceneSpec, TimedPose};
use decoupled_vo::eval::{absolute_trajectory_error, compute_rmse, MetricReport, DEFAULT_MAX_DT};
use decoupled_vo::geometry::{backproject, geodesic_distance, PoseSE3};
use decoupled_vo::grid::Grid;
use decoupled_vo::kcc::{target_response, KccModel, KccParams, KernelKind};
use decoupled_vo::pipeline::{run_pipeline, PipelineOutput};
use decoupled_vo::rotation::{rotation_from_pair, RotationParams};
use decoupled_vo::translation::{project_axonometric, ProjectionConfig};
use decoupled_vo::RunConfig;
use nalgebra::{DMatrix, DVector, Rotation3, Unit, Vector3};
use rand::{rngs::StdRng, RngExt, SeedableRng};
use rand_distr::{Distribution, Normal, UnitSphere};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples/scenes").join(name)
}

fn load_scene(name: &str) -> SyntheticSceneSpec {
    let path = scene_path(name);
    SceneFile::load(&path)
        .and_then(|s| s.into_spec(path.parent().unwrap()))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(spec: &SyntheticSceneSpec, cell: usize, single: bool) -> PipelineOutput {
    let mut cfg = RunConfig::default();
    cfg.normals.cell_size = cell;
    cfg.pipeline.single_thread = single;
    run_pipeline(spec.frames().map(Ok), &spec.intrinsics, &cfg).expect("pipeline run")
}

fn ate(out: &PipelineOutput, spec: &SyntheticSceneSpec) -> MetricReport {
    absolute_trajectory_error(&out.trajectory, &spec.trajectory, DEFAULT_MAX_DT).expect("ATE")
}

// ---------------------------------------------------------------- 1: KCC

fn shift_vec(x: &Grid<f64>, d: usize) -> Grid<f64> {
    let w = x.width();
    x.circular_shift((d % w) as isize, (d / w) as isize)
}

fn kernel(a: &Grid<f64>, b: &Grid<f64>, p: &KccParams) -> f64 {
    let n = a.len() as f64;
    match p.kernel {
        KernelKind::Linear => a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| u * v).sum::<f64>() / n,
        KernelKind::Gaussian => {
            let d: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(u, v)| (u - v) * (u - v)).sum();
            (-d / (p.sigma * p.sigma * n)).exp()
        }
    }
}

/// Kernel ridge regression over every circular shift of `x`, solved densely,
/// then evaluated on every un-shift of `z`.
fn dense_response(x: &Grid<f64>, z: &Grid<f64>, p: &KccParams) -> Vec<f64> {
    let n = x.len();
    let shifts: Vec<Grid<f64>> = (0..n).map(|d| shift_vec(x, d)).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            k[(i, j)] = kernel(&shifts[i], &shifts[j], p);
            k[(j, i)] = k[(i, j)];
        }
    }
    let y = target_response(x.width(), x.height(), &p.target);
    let a = (k + DMatrix::identity(n, n) * p.lambda)
        .lu()
        .solve(&DVector::from_column_slice(y.as_slice()))
        .expect("regularized system is invertible");
    let w = x.width();
    (0..n)
        .map(|d| {
            let back = z.circular_shift(-((d % w) as isize), -((d / w) as isize));
            (0..n).map(|j| a[j] * kernel(&back, &shifts[j], p)).sum()
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let params = KccParams {
            kernel: if case % 4 == 3 { KernelKind::Linear } else { KernelKind::Gaussian },
            ..Default::default()
        };
        // amplitudes spanning near-identity to strongly coupled kernel matrices
        let amp = rng.random_range(0.05..1.0);
        let x = Grid::from_fn(16, 16, |_, _| rng.random_range(-amp..amp));
        let s = (rng.random_range(0..16) as isize, rng.random_range(0..16) as isize);
        let z = x.circular_shift(s.0, s.1).map(|v| v + rng.random_range(-0.1 * amp..0.1 * amp));
        let fast = KccModel::train(&x, &params).unwrap().response(&z).unwrap().0;
        let slow = dense_response(&x, &z, &params);
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let err = fast.as_slice().iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-8 && secs < 10.0,
        format!("200 cases, worst relative error {worst:.2e} (< 1e-8), {secs:.2} s (< 10 s)"),
    )
}

// ------------------------------------------------------ 2: shift recovery

fn criterion_2() -> Verdict {
    let spec = load_scene("room_corner.toml");
    let cfg = ProjectionConfig::default();
    let mut rng = StdRng::seed_from_u64(2);
    let mut failures = 0;
    let mut cases = 0;
    // ten distinct projections along the orbit, ten random shifts each
    for k in 0..10 {
        let frame = spec.render_frame(k * 20);
        let cloud = backproject(&frame.depth, &spec.intrinsics).unwrap();
        let proj = project_axonometric(&cloud, &frame.intensity, &cfg).unwrap();
        assert_eq!(proj.grid_size(), 256);
        let x = proj.correlation_signal();
        let model = KccModel::train(&x, &KccParams::default()).unwrap();
        for _ in 0..10 {
            let s = (rng.random_range(-64..=64i64), rng.random_range(-64..=64i64));
            let found = model.detect(&x.circular_shift(s.0 as isize, s.1 as isize)).unwrap().peak_shift;
            failures += usize::from(found != s);
            cases += 1;
        }
    }
    verdict(failures == 0, format!("{failures} failures over {cases} shifts of 256x256 projections"))
}

// ------------------------------------------------------------ 3: rotation

fn random_rotation(rng: &mut StdRng, max_deg: f64) -> Rotation3<f64> {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), rng.random_range(0.0..max_deg).to_radians())
}

/// Unit normal pair at least `min_sep` degrees apart (either orientation).
fn random_pair(rng: &mut StdRng, min_sep: f64) -> (Vector3<f64>, Vector3<f64>) {
    let a: [f64; 3] = UnitSphere.sample(rng);
    let a = Vector3::from(a);
    let perp = a.cross(&Vector3::from(UnitSphere.sample(rng) as [f64; 3])).normalize();
    let sep = rng.random_range(min_sep..90.0f64).to_radians();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    (a, sign * (a * sep.cos() + perp * sep.sin()))
}

fn jitter(n: &Vector3<f64>, sigma_deg: f64, rng: &mut StdRng) -> Vector3<f64> {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = Normal::new(0.0, sigma_deg.to_radians()).unwrap().sample(rng);
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle) * n
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let params = RotationParams::default();
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst_clean = 0.0f64;
    let mut noisy = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let truth = random_rotation(&mut rng, 30.0);
        let (n1r, n2r) = random_pair(&mut rng, 10.0 + 1e-6);
        let (n1c, n2c) = (truth.inverse() * n1r, truth.inverse() * n2r);
        worst_clean = worst_clean.max(match rotation_from_pair(&n1r, &n1c, &n2r, &n2c, &params) {
            Ok(r) => geodesic_distance(&r.rotation, truth.matrix()),
            Err(_) => f64::INFINITY,
        });
        let [a, b, c, d] = [n1r, n1c, n2r, n2c].map(|n| jitter(&n, 0.2, &mut rng));
        noisy.push(match rotation_from_pair(&a, &b, &c, &d, &params) {
            Ok(r) => geodesic_distance(&r.rotation, truth.matrix()).to_degrees(),
            Err(_) => f64::INFINITY,
        });
    }
    noisy.sort_by(f64::total_cmp);
    let median = 0.5 * (noisy[499] + noisy[500]);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_clean < 1e-7 && median < 0.5 && secs < 5.0,
        format!(
            "noiseless worst {worst_clean:.2e} rad (< 1e-7), 0.2 deg noise median {median:.3} deg (< 0.5), {secs:.2} s (< 5 s)"
        ),
    )
}

// ------------------------------------------- 4, 5, 9: synthetic sequences

struct SequenceResults {
    c4: Verdict,
    c5: Verdict,
    c9: Verdict,
}

fn synthetic_criteria() -> SequenceResults {
    let clean = load_scene("room_corner.toml");
    let noisy = load_scene("room_corner_noisy.toml");
    let low = load_scene("low_texture.toml");
    assert_eq!(clean.len(), 200);
    let max_step = clean.trajectory.windows(2).fold((0.0f64, 0.0f64), |(t, r), w| {
        let rel = w[0].pose.inverse().compose(&w[1].pose);
        (t.max(rel.translation().norm()), r.max(rel.rotation_angle().to_degrees()))
    });

    let clean_conc = run(&clean, 10, false);
    let clean_ate = ate(&clean_conc, &clean).rmse;
    let last = &clean_conc.trajectory.last().unwrap().pose;
    let drift = geodesic_distance(&last.rotation_matrix(), &clean.trajectory.last().unwrap().pose.rotation_matrix())
        .to_degrees();
    let noisy10 = run(&noisy, 10, false);
    let noisy_ate = ate(&noisy10, &noisy).rmse;
    let c4 = verdict(
        clean_ate < 0.02 && drift < 1.0 && noisy_ate < 0.05 && max_step.0 <= 0.01 && max_step.1 <= 0.5,
        format!(
            "noiseless ATE {clean_ate:.4} m (< 0.02), final rotation drift {drift:.3} deg (< 1); \
             5 mm noise ATE {noisy_ate:.4} m (< 0.05); max step {:.4} m / {:.3} deg",
            max_step.0, max_step.1
        ),
    );

    let noisy5 = ate(&run(&noisy, 5, false), &noisy).rmse;
    let noisy1 = ate(&run(&noisy, 1, false), &noisy).rmse;
    let c5 = verdict(
        noisy1 > noisy5 && noisy5 > noisy_ate,
        format!("cell 1 / 5 / 10: {noisy1:.4} / {noisy5:.4} / {noisy_ate:.4} m"),
    );

    let bytes = |o: &PipelineOutput| {
        (trajectory_to_string(&o.trajectory), o.diagnostics_csv(&RunConfig::default(), false))
    };
    let mut mismatched = Vec::new();
    for (name, spec, conc) in [("room_corner", &clean, Some(&clean_conc)), ("room_corner_noisy", &noisy, Some(&noisy10)), ("low_texture", &low, None)] {
        let conc = match conc {
            Some(o) => bytes(o),
            None => bytes(&run(spec, 10, false)),
        };
        if conc != bytes(&run(spec, 10, true)) {
            mismatched.push(name);
        }
    }
    let c9 = verdict(
        mismatched.is_empty(),
        format!("3 scenes, trajectory and diagnostics bytes; mismatched: {mismatched:?}"),
    );
    SequenceResults { c4, c5, c9 }
}

// ----------------------------------------------------------- 6: ICL-NUIM

fn criterion_6() -> Verdict {
    let cases = [("DVO_ICL_OFFICE0", "office seq0", 0.11), ("DVO_ICL_OFFICE2_PART1", "office seq2 part1", 0.05)];
    let mut lines = Vec::new();
    let mut ok = true;
    for (var, label, bound) in cases {
        let Some(path) = std::env::var_os(var) else { continue };
        let result = load_sequence(Path::new(&path)).and_then(|seq| {
            let gt = seq.load_groundtruth()?.ok_or_else(|| decoupled_vo::Error::Insufficient("no ground truth".into()))?;
            let out = run_pipeline(seq.frames(), &seq.intrinsics, &RunConfig::default())?;
            absolute_trajectory_error(&out.trajectory, &gt, DEFAULT_MAX_DT)
        });
        match result {
            Ok(r) => {
                ok &= r.rmse <= bound;
                lines.push(format!("{label} ATE {:.4} m (<= {bound})", r.rmse));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{label}: {e}"));
            }
        }
    }
    if lines.is_empty() {
        return Verdict::Skip("no ICL-NUIM manifests configured (DVO_ICL_OFFICE0, DVO_ICL_OFFICE2_PART1)".into());
    }
    // informational: reported, never blocking
    let detail = lines.join("; ");
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Skip(format!("expected-may-fail: {detail}"))
    }
}

// ---------------------------------------------------------- 7: throughput

fn criterion_7() -> Verdict {
    let spec = load_scene("room_corner.toml");
    let frames: Vec<Frame> = (0..60).map(|i| spec.render_frame(i)).collect();
    let timed = |single: bool| {
        let mut cfg = RunConfig::default();
        cfg.pipeline.single_thread = single;
        let source = frames.clone();
        let start = Instant::now();
        let out = run_pipeline(source.into_iter().map(Ok), &spec.intrinsics, &cfg).unwrap();
        assert_eq!(out.trajectory.len(), frames.len());
        frames.len() as f64 / start.elapsed().as_secs_f64()
    };
    let _warm = timed(true);
    let single = timed(true);
    let conc = timed(false);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (n_ms, r_ms, t_ms) = {
        let mut cfg = RunConfig::default();
        cfg.pipeline.single_thread = true;
        run_pipeline(frames.iter().take(20).cloned().map(Ok), &spec.intrinsics, &cfg).unwrap().mean_latencies()
    };
    verdict(
        conc >= 30.0 && conc >= 1.5 * single,
        format!(
            "concurrent {conc:.1} Hz (>= 30), single-thread {single:.1} Hz, speedup {:.2}x (>= 1.5) on {cores} core(s); \
             stage ms normals {n_ms:.1} rotation {r_ms:.1} translation {t_ms:.1}",
            conc / single
        ),
    )
}

// ---------------------------------------------------------- 8: evaluator

fn criterion_8() -> Verdict {
    let orbit: Vec<TimedPose> = (0..50)
        .map(|k| TimedPose::new(k as f64 * 0.1, decoupled_vo::dataset::synthetic::corner_orbit(k, 50.0)))
        .collect();
    let same_aligned = absolute_trajectory_error(&orbit, &orbit, DEFAULT_MAX_DT).unwrap();
    let same_raw = compute_rmse(&orbit, &orbit, DEFAULT_MAX_DT).unwrap();
    let zero = |r: &MetricReport| [r.rmse, r.mean, r.median, r.std, r.sse].iter().all(|v| v.abs() < 1e-12);

    let gt = vec![
        TimedPose::new(0.0, PoseSE3::identity()),
        TimedPose::new(1.0, PoseSE3::from_translation(Vector3::new(1.0, 0.0, 0.0))),
    ];
    let est = vec![
        TimedPose::new(0.0, PoseSE3::from_translation(Vector3::new(0.03, 0.0, 0.0))),
        TimedPose::new(1.0, PoseSE3::from_translation(Vector3::new(1.0, 0.04, 0.0))),
    ];
    let two = compute_rmse(&est, &gt, DEFAULT_MAX_DT).unwrap();
    let hand = (two.rmse - 0.035355339).abs() < 1e-8 && (two.sse - 0.0025).abs() < 1e-12;

    let mut rng = StdRng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..300);
        let scale = rng.random_range(1e-3..10.0);
        let r = MetricReport::from_errors((0..n).map(|_| rng.random_range(0.0..scale)).collect()).unwrap();
        worst = worst.max((r.rmse * r.rmse - (r.mean * r.mean + r.std * r.std)).abs());
    }
    verdict(
        zero(&same_aligned) && zero(&same_raw) && hand && worst < 1e-9,
        format!(
            "identical -> zeros: {}; two-pose RMSE {:.6} m SSE {:.6} m^2; max |rmse^2 - mean^2 - std^2| {worst:.1e}",
            zero(&same_aligned) && zero(&same_raw),
            two.rmse,
            two.sse
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |id, name, v: Verdict| {
        let (tag, detail) = match &v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {id} {name}: {detail}");
        results.push((id, name, v));
    };
    report(1, "kcc dense oracle", criterion_1());
    report(2, "exact shift recovery", criterion_2());
    report(3, "closed-form rotation", criterion_3());
    let seq = synthetic_criteria();
    report(4, "end-to-end synthetic", seq.c4);
    report(5, "smoothing ablation ordering", seq.c5);
    report(6, "ICL-NUIM reproduction", criterion_6());
    report(7, "throughput", criterion_7());
    report(8, "evaluator correctness", criterion_8());
    report(9, "determinism", seq.c9);

    let failed: Vec<u32> = results.iter().filter(|r| matches!(r.2, Verdict::Fail(_))).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria passed or skipped");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
