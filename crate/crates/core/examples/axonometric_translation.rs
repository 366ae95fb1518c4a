// Translation between two room-corner views with equal orientation: project
// both clouds orthographically, find the planar shift with the correlator and
// the depth shift from matched pixels.
//
//     cargo run --release --example axonometric_translation -- [tx] [ty] [tz]

use std::path::Path;

use decoupled_vo::dataset::{SceneFile, TimedPose};
use decoupled_vo::geometry::{backproject, PoseSE3};
use decoupled_vo::translation::{
    estimate_translation, project_axonometric, KeyProjection, ProjectionConfig, TranslationEstimate, TranslationParams,
};
use decoupled_vo::kcc::KccParams;
use nalgebra::Vector3;

pub fn run_example(motion: Vector3<f64>) -> decoupled_vo::Result<TranslationEstimate> {
    let mut spec = SceneFile::room_corner(1).into_spec(Path::new("."))?;
    spec.trajectory = vec![
        TimedPose::new(0.0, PoseSE3::identity()),
        TimedPose::new(0.1, PoseSE3::from_translation(motion)),
    ];
    let cfg = ProjectionConfig::default();
    let mut projections = Vec::new();
    for i in 0..2 {
        let frame = spec.render_frame(i);
        let cloud = backproject(&frame.depth, &spec.intrinsics)?;
        projections.push(
            project_axonometric(&cloud, &frame.intensity, &cfg)
                .map_err(|e| decoupled_vo::Error::Insufficient(e.to_string()))?,
        );
    }
    let cur = projections.pop().unwrap();
    let key = KeyProjection::new(projections.pop().unwrap(), &KccParams::default())?;
    estimate_translation(&key, &cur, &TranslationParams::default())
}

fn main() -> decoupled_vo::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let get = |k: usize, d: f64| args.get(k).copied().unwrap_or(d);
    let motion = Vector3::new(get(0, 0.04), get(1, 0.0), get(2, 0.05));
    let e = run_example(motion)?;
    println!("true  [{:+.4} {:+.4} {:+.4}] m", motion.x, motion.y, motion.z);
    println!(
        "found [{:+.4} {:+.4} {:+.4}] m  (shift {:?} px, PSR {:.1}, {} matched)",
        e.translation.x, e.translation.y, e.translation.z, e.planar.pixels, e.planar.psr, e.depth.matched
    );
    Ok(())
}
