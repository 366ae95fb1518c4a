// Render a scene file to a sequence on disk (PNG frames, associations,
// ground truth, manifest), load it back and check the frames survive intact.
//
//     cargo run --release --example synthetic_sequence -- [scene.toml] [out_dir] [frames]

use std::path::{Path, PathBuf};

use decoupled_vo::dataset::{load_sequence, render_synthetic, SceneFile};

pub struct RoundTrip {
    pub manifest: PathBuf,
    pub frames: usize,
    /// Frames whose reload equals the in-memory render exactly.
    pub identical: usize,
    pub groundtruth_poses: usize,
}

pub fn run_example(scene: &Path, out_dir: &Path, frames: usize) -> decoupled_vo::Result<RoundTrip> {
    let base = scene.parent().unwrap_or(Path::new("."));
    let mut spec = SceneFile::load(scene)?.into_spec(base)?;
    spec.trajectory.truncate(frames);
    let manifest = render_synthetic(&spec, out_dir)?;

    let seq = load_sequence(&manifest)?;
    let mut identical = 0;
    for (i, loaded) in seq.frames().enumerate() {
        identical += usize::from(loaded? == spec.render_frame(i));
    }
    Ok(RoundTrip {
        frames: seq.len(),
        identical,
        groundtruth_poses: seq.load_groundtruth()?.map_or(0, |g| g.len()),
        manifest,
    })
}

fn main() -> decoupled_vo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scene = args.first().map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenes/room_corner.toml")
    });
    let out = args.get(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("dvo_room_corner"));
    let frames = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let r = run_example(&scene, &out, frames)?;
    println!("wrote {}", r.manifest.display());
    println!("{} frame(s), {} identical after reload, {} ground-truth pose(s)", r.frames, r.identical, r.groundtruth_poses);
    Ok(())
}
