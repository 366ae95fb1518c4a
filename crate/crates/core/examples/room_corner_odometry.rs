// Render the room-corner orbit in memory, run the odometry frontend on it and
// report the absolute trajectory error against the renderer's poses.
//
//     cargo run --release --example room_corner_odometry -- [frames] [noise_sigma_m] [cell_size]

use std::path::Path;

use decoupled_vo::dataset::SceneFile;
use decoupled_vo::eval::{absolute_trajectory_error, MetricReport, DEFAULT_MAX_DT};
use decoupled_vo::geometry::geodesic_distance;
use decoupled_vo::pipeline::{run_pipeline, PipelineOutput};
use decoupled_vo::RunConfig;

pub struct OdometryRun {
    pub ate: MetricReport,
    /// Angle between estimated and true rotation at the last frame.
    pub final_rotation_deg: f64,
    pub output: PipelineOutput,
}

pub fn run_example(frames: usize, sigma: f64, cell: usize) -> decoupled_vo::Result<OdometryRun> {
    let mut scene = SceneFile::room_corner(frames);
    scene.depth_noise_sigma = sigma;
    let spec = scene.into_spec(Path::new("."))?;

    let mut config = RunConfig::default();
    config.normals.cell_size = cell;
    let output = run_pipeline(spec.frames().map(Ok), &spec.intrinsics, &config)?;

    let ate = absolute_trajectory_error(&output.trajectory, &spec.trajectory, DEFAULT_MAX_DT)?;
    let last = output.trajectory.last().expect("at least one frame");
    let truth = spec.trajectory.last().expect("at least one pose");
    let drift = geodesic_distance(&last.pose.rotation_matrix(), &truth.pose.rotation_matrix());
    if std::env::var_os("DVO_VERBOSE").is_some() {
        for (d, (e, g)) in output.diagnostics.iter().zip(output.trajectory.iter().zip(&spec.trajectory)) {
            println!("{}  err {:.4}", d.csv_row(false), (e.pose.translation() - g.pose.translation()).norm());
        }
    }
    Ok(OdometryRun {
        ate,
        final_rotation_deg: drift.to_degrees(),
        output,
    })
}

fn main() -> decoupled_vo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let frames = args.first().and_then(|s| s.parse().ok()).unwrap_or(200);
    let sigma = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let cell = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);

    let run = run_example(frames, sigma, cell)?;
    let out = &run.output;
    let (n_ms, r_ms, t_ms) = out.mean_latencies();
    let refresh_r = out.diagnostics.iter().filter(|d| d.rotation.as_ref().is_some_and(|r| r.keyframe)).count();
    let refresh_t = out.diagnostics.iter().filter(|d| d.translation_keyframe).count();
    println!("frames {frames}  depth noise {sigma} m  cell size {cell}");
    print!("{}", run.ate.to_text());
    println!("final rotation drift  {:.4} deg", run.final_rotation_deg);
    println!("keyframes  rotation {refresh_r}  translation {refresh_t}");
    println!("stage latency ms  normals {n_ms:.2}  rotation {r_ms:.2}  translation {t_ms:.2}");
    Ok(())
}
