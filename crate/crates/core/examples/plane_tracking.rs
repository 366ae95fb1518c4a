// Normal maps of two room-corner views and the planes tracked between them.
// The second view is turned about the axis equally inclined to the three
// surfaces, so every plane normal turns by the same angle. Optionally writes
// a PGM of the Mode labels.
//
//     cargo run --release --example plane_tracking -- [normal_turn_deg] [labels.pgm]

use std::path::Path;

use decoupled_vo::dataset::{SceneFile, TimedPose};
use decoupled_vo::geometry::{backproject, PoseSE3};
use decoupled_vo::normals::{normal_map, NormalMapParams};
use decoupled_vo::planes::{coverage, track_planes, write_mode_pgm, PlaneMode, PlaneTrackerParams};
use nalgebra::{Unit, UnitQuaternion, Vector3};

/// Camera rotation that turns each room-corner normal by `turn_deg`.
pub fn equal_turn_rotation(turn_deg: f64) -> UnitQuaternion<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let normals = [Vector3::new(s, 0.0, -s), Vector3::new(-s, 0.0, -s), Vector3::new(0.0, -1.0, 0.0)];
    let axis = Unit::new_normalize(normals.iter().sum::<Vector3<f64>>());
    // a unit vector at angle phi to the axis turns by 2 asin(sin(theta/2) sin(phi))
    let sin_phi = (1.0 - (axis.dot(&normals[0])).powi(2)).sqrt();
    let theta = 2.0 * ((turn_deg.to_radians() / 2.0).sin() / sin_phi).asin();
    UnitQuaternion::from_axis_angle(&axis, theta)
}

pub fn run_example(turn_deg: f64, labels: Option<&Path>) -> decoupled_vo::Result<Vec<PlaneMode>> {
    let mut spec = SceneFile::room_corner(1).into_spec(Path::new("."))?;
    let turned = PoseSE3::new(equal_turn_rotation(turn_deg), Vector3::zeros());
    spec.trajectory = vec![TimedPose::new(0.0, PoseSE3::identity()), TimedPose::new(0.1, turned)];

    let params = NormalMapParams::default();
    let maps = (0..2)
        .map(|i| {
            let frame = spec.render_frame(i);
            let cloud = backproject(&frame.depth, &spec.intrinsics)?;
            Ok(normal_map(&cloud, &params))
        })
        .collect::<decoupled_vo::Result<Vec<_>>>()?;

    let tracker = PlaneTrackerParams {
        keep_members: labels.is_some(),
        ..Default::default()
    };
    let modes = track_planes(&maps[0], &maps[1], &tracker)?;
    if let Some(path) = labels {
        write_mode_pgm(path, spec.intrinsics.width, spec.intrinsics.height, &modes)?;
    }
    Ok(modes)
}

fn main() -> decoupled_vo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let turn = args.first().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let labels = args.get(1).map(Path::new);
    let modes = run_example(turn, labels)?;
    println!("{} Mode(s), {} pixels tracked", modes.len(), coverage(&modes));
    for (k, m) in modes.iter().enumerate() {
        let turn = m.normal_ref.angle(&m.normal_cur).to_degrees();
        println!(
            "  mode {k}: {:>6} px  ref [{:+.3} {:+.3} {:+.3}]  turned {turn:.3} deg",
            m.pixel_count, m.normal_ref.x, m.normal_ref.y, m.normal_ref.z
        );
    }
    Ok(())
}
