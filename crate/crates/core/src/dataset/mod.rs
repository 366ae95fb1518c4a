//! Sequence ingestion, trajectory files and synthetic plane scenes.

pub mod synthetic;
pub mod trajectory;
pub mod tum;

use crate::geometry::DepthImage;
use crate::grid::Grid;

pub use synthetic::{render_synthetic, SceneFile, ScenePlane, SyntheticSceneSpec, Texture, TrajectorySpec};
pub use trajectory::{read_trajectory, write_trajectory, TimedPose, Trajectory};
pub use tum::{load_sequence, SequenceManifest};

/// One RGB-D frame: luma intensity in [0, 1] and metric depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub intensity: Grid<f32>,
    pub depth: DepthImage,
}
