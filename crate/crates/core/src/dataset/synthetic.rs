//! Ray-cast renderer for scenes made of infinite textured planes.
//!
//! Depth is the camera-frame z of the nearest plane hit. Frames are
//! quantized exactly as they would be stored on disk, so a rendered sequence
//! reloaded from PNGs is bit-identical to the in-memory render.

use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trajectory::{format_number, read_trajectory, TimedPose, Trajectory};
use super::tum::{RawFrame, SequenceWriter};
use super::Frame;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, PoseSE3, DEFAULT_MAX_RANGE};
use crate::grid::Grid;

/// Intensity as a function of plane-local coordinates (meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Texture {
    Constant {
        value: f64,
    },
    Checkerboard {
        cell: f64,
        low: f64,
        high: f64,
    },
    /// Multi-octave value noise; `scale` is the coarsest lattice spacing.
    Noise {
        scale: f64,
        octaves: u32,
        mean: f64,
        contrast: f64,
        seed: u64,
    },
}

impl Texture {
    pub fn sample(&self, s: f64, t: f64) -> f64 {
        let v = match *self {
            Texture::Constant { value } => value,
            Texture::Checkerboard { cell, low, high } => {
                let parity = ((s / cell).floor() as i64 + (t / cell).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    low
                } else {
                    high
                }
            }
            Texture::Noise {
                scale,
                octaves,
                mean,
                contrast,
                seed,
            } => {
                let (mut acc, mut amp, mut norm, mut freq) = (0.0, 1.0, 0.0, 1.0 / scale);
                for o in 0..octaves.max(1) {
                    acc += amp * value_noise(s * freq, t * freq, seed ^ ((o as u64) << 40));
                    norm += amp;
                    amp *= 0.5;
                    freq *= 2.0;
                }
                mean + contrast * (acc / norm - 0.5) * 2.0
            }
        };
        v.clamp(0.0, 1.0)
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            Texture::Constant { value } => value.is_finite(),
            Texture::Checkerboard { cell, low, high } => cell > 0.0 && low.is_finite() && high.is_finite(),
            Texture::Noise { scale, mean, contrast, .. } => {
                scale > 0.0 && mean.is_finite() && contrast.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(field, "texture parameters out of range"))
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    let h = splitmix(splitmix(seed ^ ix as u64).wrapping_add(iy as u64));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothly interpolated lattice noise in [0, 1].
fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (smooth(x - fx), smooth(y - fy));
    let a = lattice(ix, iy, seed);
    let b = lattice(ix + 1, iy, seed);
    let c = lattice(ix, iy + 1, seed);
    let d = lattice(ix + 1, iy + 1, seed);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

/// Plane `normal · p + offset = 0` in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePlane {
    pub normal: [f64; 3],
    pub offset: f64,
    pub texture: Texture,
}

impl ScenePlane {
    pub fn normal(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }

    /// In-plane orthonormal axes used for texture coordinates.
    fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal();
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = helper.cross(&n).normalize();
        (e1, n.cross(&e1))
    }
}

/// How the camera path of a scene file is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Small closed orbit in front of a room corner; see [`corner_orbit`].
    CornerOrbit {
        frames: usize,
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default = "default_rate")]
        rate_hz: f64,
    },
    /// Camera at the world origin for every frame.
    Static {
        frames: usize,
        #[serde(default = "default_rate")]
        rate_hz: f64,
    },
    /// Explicit rows `[t, tx, ty, tz, qx, qy, qz, qw]`.
    Poses { poses: Vec<[f64; 8]> },
    /// A TUM trajectory file, relative to the scene file.
    File { path: PathBuf },
}

fn default_period() -> f64 {
    200.0
}

fn default_rate() -> f64 {
    30.0
}

/// Camera-to-world pose `k` of the corner orbit: a loop of ±25 cm sideways,
/// up to 30 cm forward, a few degrees of yaw/pitch/roll, starting at the
/// identity. With the default 200-frame period each step moves < 1 cm and
/// turns < 0.5°.
pub fn corner_orbit(k: usize, period: f64) -> PoseSE3 {
    let phi = std::f64::consts::TAU * k as f64 / period;
    let t = Vector3::new(
        0.25 * phi.sin(),
        0.05 * (2.0 * phi).sin(),
        0.15 * (1.0 - phi.cos()),
    );
    let yaw = (-5.0f64).to_radians() * phi.sin();
    let pitch = 2.0f64.to_radians() * (2.0 * phi).sin();
    let roll = 1.5f64.to_radians() * phi.sin();
    let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
    PoseSE3::new(UnitQuaternion::from_rotation_matrix(&r), t)
}

impl TrajectorySpec {
    /// `base` resolves relative file paths.
    pub fn resolve(&self, base: &Path) -> Result<Trajectory> {
        let check_rate = |r: f64| {
            if r > 0.0 && r.is_finite() {
                Ok(())
            } else {
                Err(Error::config("trajectory.rate_hz", "must be > 0"))
            }
        };
        Ok(match self {
            TrajectorySpec::CornerOrbit { frames, period, rate_hz } => {
                check_rate(*rate_hz)?;
                if !(*period > 0.0) {
                    return Err(Error::config("trajectory.period", "must be > 0"));
                }
                (0..*frames)
                    .map(|k| TimedPose::new(k as f64 / rate_hz, corner_orbit(k, *period)))
                    .collect()
            }
            TrajectorySpec::Static { frames, rate_hz } => {
                check_rate(*rate_hz)?;
                (0..*frames)
                    .map(|k| TimedPose::new(k as f64 / rate_hz, PoseSE3::identity()))
                    .collect()
            }
            TrajectorySpec::Poses { poses } => poses
                .iter()
                .map(|r| {
                    PoseSE3::from_quaternion_xyzw([r[4], r[5], r[6], r[7]], Vector3::new(r[1], r[2], r[3]))
                        .map(|p| TimedPose::new(r[0], p))
                })
                .collect::<Result<_>>()?,
            TrajectorySpec::File { path } => read_trajectory(&base.join(path))?,
        })
    }
}

/// A scene as written in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of additive depth noise, meters.
    #[serde(default)]
    pub depth_noise_sigma: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    pub intrinsics: CameraIntrinsics,
    pub trajectory: TrajectorySpec,
    pub planes: Vec<ScenePlane>,
}

fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene files always serialize")
    }

    pub fn into_spec(self, base: &Path) -> Result<SyntheticSceneSpec> {
        let trajectory = self.trajectory.resolve(base)?;
        let spec = SyntheticSceneSpec {
            planes: self.planes,
            trajectory,
            intrinsics: self.intrinsics,
            depth_noise_sigma: self.depth_noise_sigma,
            seed: self.seed,
            max_range: self.max_range,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two perpendicular walls meeting 3 m ahead plus a floor 0.8 m below
    /// the camera, all noise-textured, viewed along the corner orbit.
    pub fn room_corner(frames: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let noise = |seed| Texture::Noise {
            scale: 0.16,
            octaves: 4,
            mean: 0.5,
            contrast: 0.8,
            seed,
        };
        Self {
            seed: 0,
            depth_noise_sigma: 0.0,
            max_range: DEFAULT_MAX_RANGE,
            intrinsics: CameraIntrinsics::tum_default(),
            trajectory: TrajectorySpec::CornerOrbit {
                frames,
                period: default_period(),
                rate_hz: default_rate(),
            },
            planes: vec![
                ScenePlane {
                    normal: [s, 0.0, -s],
                    offset: 3.0 * s,
                    texture: noise(11),
                },
                ScenePlane {
                    normal: [-s, 0.0, -s],
                    offset: 3.0 * s,
                    texture: noise(23),
                },
                ScenePlane {
                    normal: [0.0, -1.0, 0.0],
                    offset: 0.8,
                    texture: noise(37),
                },
            ],
        }
    }

    /// The room corner with nearly uniform walls: rotation stays observable,
    /// translation has almost nothing to lock onto.
    pub fn low_texture(frames: usize) -> Self {
        let mut scene = Self::room_corner(frames);
        for (k, plane) in scene.planes.iter_mut().enumerate() {
            plane.texture = Texture::Noise {
                scale: 1.5,
                octaves: 1,
                mean: 0.45 + 0.05 * k as f64,
                contrast: 0.02,
                seed: k as u64,
            };
        }
        scene
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSceneSpec {
    pub planes: Vec<ScenePlane>,
    /// Camera-to-world poses with timestamps.
    pub trajectory: Trajectory,
    pub intrinsics: CameraIntrinsics,
    pub depth_noise_sigma: f64,
    pub seed: u64,
    pub max_range: f64,
}

/// Smallest angle between two planes for them to count as non-parallel.
const NONPARALLEL_MIN_DEG: f64 = 10.0;
/// Fraction of the image a plane must cover to count as visible.
const MIN_VISIBLE_FRACTION: f64 = 0.01;

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.planes.is_empty() {
            return Err(Error::config("planes", "scene has no planes"));
        }
        for (k, p) in self.planes.iter().enumerate() {
            let n = p.normal().norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("planes[{k}].normal"), format!("norm is {n}, not 1")));
            }
            if !p.offset.is_finite() {
                return Err(Error::config(format!("planes[{k}].offset"), "must be finite"));
            }
            p.texture.validate(&format!("planes[{k}].texture"))?;
        }
        if !(self.depth_noise_sigma >= 0.0 && self.depth_noise_sigma.is_finite()) {
            return Err(Error::config("depth_noise_sigma", "must be >= 0"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range", "must be > 0"));
        }
        if self.trajectory.is_empty() {
            return Err(Error::config("trajectory", "no poses"));
        }
        if self.trajectory.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::config("trajectory", "timestamps must increase"));
        }
        for (k, tp) in self.trajectory.iter().enumerate() {
            let visible = self.visible_planes(&tp.pose);
            if !self.has_nonparallel_pair(&visible) {
                return Err(Error::config(
                    "planes",
                    format!(
                        "pose {k} (t = {}) sees {} plane(s) without a non-parallel pair; \
                         at least two non-parallel planes must each cover 1% of the image",
                        tp.timestamp,
                        visible.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    fn has_nonparallel_pair(&self, visible: &[usize]) -> bool {
        let cos_max = NONPARALLEL_MIN_DEG.to_radians().cos();
        visible.iter().enumerate().any(|(i, &a)| {
            visible[i + 1..]
                .iter()
                .any(|&b| self.planes[a].normal().dot(&self.planes[b].normal()).abs() <= cos_max)
        })
    }

    /// Indices of planes covering at least 1% of a subsampled image.
    pub fn visible_planes(&self, pose: &PoseSE3) -> Vec<usize> {
        let intr = &self.intrinsics;
        let step = 4;
        let mut counts = vec![0usize; self.planes.len()];
        let mut total = 0usize;
        for v in (0..intr.height).step_by(step) {
            for u in (0..intr.width).step_by(step) {
                total += 1;
                if let Some((k, _)) = self.cast(pose, u, v) {
                    counts[k] += 1;
                }
            }
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c as f64 >= MIN_VISIBLE_FRACTION * total as f64)
            .map(|(k, _)| k)
            .collect()
    }

    /// Nearest plane hit through pixel `(u, v)`: plane index and camera z.
    #[inline]
    fn cast(&self, pose: &PoseSE3, u: usize, v: usize) -> Option<(usize, f64)> {
        let ray_c = self.intrinsics.ray(u as f64, v as f64);
        let ray_w = pose.rotation() * ray_c;
        let origin = pose.translation();
        let mut best: Option<(usize, f64)> = None;
        for (k, p) in self.planes.iter().enumerate() {
            let n = p.normal();
            let denom = n.dot(&ray_w);
            if denom.abs() < 1e-12 {
                continue;
            }
            // ray_c has unit z, so the ray parameter is the camera-frame depth
            let s = -(n.dot(origin) + p.offset) / denom;
            if s > 0.0 && best.is_none_or(|(_, b)| s < b) {
                best = Some((k, s));
            }
        }
        best.filter(|&(_, s)| s < self.max_range)
    }

    /// Noiseless, unquantized render: depth in meters (0 = no hit), texture
    /// intensity in [0, 1] and the index of the hit plane.
    pub fn render_exact(&self, pose: &PoseSE3) -> (Grid<f64>, Grid<f64>, Grid<Option<usize>>) {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let bases: Vec<_> = self.planes.iter().map(ScenePlane::basis).collect();
        let mut depth = Grid::filled(w, h, 0.0);
        let mut gray = Grid::filled(w, h, 0.0);
        let mut label = Grid::filled(w, h, None);
        for v in 0..h {
            for u in 0..w {
                if let Some((k, z)) = self.cast(pose, u, v) {
                    let p_w = pose.transform_point(&(self.intrinsics.ray(u as f64, v as f64) * z));
                    let (e1, e2) = &bases[k];
                    *depth.get_mut(u, v) = z;
                    *gray.get_mut(u, v) = self.planes[k].texture.sample(p_w.dot(e1), p_w.dot(e2));
                    *label.get_mut(u, v) = Some(k);
                }
            }
        }
        (depth, gray, label)
    }

    /// Frame `index` in sensor units: noise added, depth quantized to
    /// `1 / depth_scale`, intensity to 8 bits.
    pub fn render_raw(&self, index: usize) -> RawFrame {
        let tp = &self.trajectory[index];
        let (depth, gray, _) = self.render_exact(&tp.pose);
        let scale = self.intrinsics.depth_scale;
        let mut rng = StdRng::seed_from_u64(self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let noise = Normal::new(0.0, self.depth_noise_sigma.max(0.0)).expect("sigma checked by validate");
        let raw = depth.map(|&z| {
            if z <= 0.0 {
                return 0;
            }
            let z = if self.depth_noise_sigma > 0.0 {
                z + noise.sample(&mut rng)
            } else {
                z
            };
            let q = (z * scale).round();
            if q >= 1.0 && q <= u16::MAX as f64 && z < self.max_range {
                q as u16
            } else {
                0
            }
        });
        RawFrame {
            // the precision timestamps are stored with
            timestamp: format_number(tp.timestamp).parse().expect("formatted number parses"),
            gray: gray.map(|&g| (g * 255.0).round() as u8),
            depth: raw,
        }
    }

    pub fn render_frame(&self, index: usize) -> Frame {
        self.render_raw(index).to_frame(&self.intrinsics, self.max_range)
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        (0..self.trajectory.len()).map(move |i| self.render_frame(i))
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }
}

/// Validates the spec, then writes a loadable sequence with ground truth.
/// Nothing is written when validation fails. Returns the manifest path.
pub fn render_synthetic(spec: &SyntheticSceneSpec, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    let mut writer = SequenceWriter::create(out_dir, spec.intrinsics, spec.max_range)?;
    for (k, tp) in spec.trajectory.iter().enumerate() {
        writer.push(&spec.render_raw(k), Some(tp))?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tum::load_sequence;

    fn small_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 80.0,
            fy: 80.0,
            cx: 39.5,
            cy: 29.5,
            width: 80,
            height: 60,
            depth_scale: 5000.0,
        }
    }

    fn single_plane_spec(normal: [f64; 3], offset: f64) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            planes: vec![ScenePlane {
                normal,
                offset,
                texture: Texture::Constant { value: 0.5 },
            }],
            trajectory: vec![TimedPose::new(0.0, PoseSE3::identity())],
            intrinsics: small_intrinsics(),
            depth_noise_sigma: 0.0,
            seed: 0,
            max_range: 10.0,
        }
    }

    #[test]
    fn fronto_parallel_plane_has_constant_depth() {
        let spec = single_plane_spec([0.0, 0.0, -1.0], 2.0);
        let (depth, _, _) = spec.render_exact(&PoseSE3::identity());
        assert!(depth.as_slice().iter().all(|&d| d == 2.0));
        let f = spec.render_frame(0);
        assert!(f.depth.depth().as_slice().iter().all(|&d| d == 2.0));
    }

    #[test]
    fn corner_depth_matches_ray_plane_formula() {
        let mut scene = SceneFile::room_corner(1);
        scene.intrinsics = small_intrinsics();
        let spec = scene.into_spec(Path::new(".")).unwrap();
        // on the bisector of the two walls
        let pose = PoseSE3::from_translation(Vector3::new(0.0, 0.0, 0.5));
        let (depth, _, label) = spec.render_exact(&pose);
        let mut seen = [false; 3];
        for v in 0..60 {
            for u in 0..80 {
                let ray = spec.intrinsics.ray(u as f64, v as f64);
                let k = label.get(u, v).unwrap();
                seen[k] = true;
                let p = &spec.planes[k];
                let n = p.normal();
                let expected = -(n.dot(&Vector3::new(0.0, 0.0, 0.5)) + p.offset) / n.dot(&ray);
                assert!((depth.get(u, v) - expected).abs() < 1e-9);
            }
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn valid_depth_satisfies_plane_equation() {
        let mut scene = SceneFile::room_corner(40);
        scene.intrinsics = small_intrinsics();
        let spec = scene.into_spec(Path::new(".")).unwrap();
        for tp in spec.trajectory.iter().step_by(7) {
            let (depth, _, label) = spec.render_exact(&tp.pose);
            for v in 0..60 {
                for u in 0..80 {
                    let z = *depth.get(u, v);
                    if z <= 0.0 {
                        continue;
                    }
                    let p = &spec.planes[label.get(u, v).unwrap()];
                    let pw = tp.pose.transform_point(&(spec.intrinsics.ray(u as f64, v as f64) * z));
                    assert!((p.normal().dot(&pw) + p.offset).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn corner_orbit_motion_bounds() {
        let poses: Vec<PoseSE3> = (0..201).map(|k| corner_orbit(k, 200.0)).collect();
        assert_eq!(poses[0], PoseSE3::identity());
        for w in poses.windows(2) {
            let rel = w[0].inverse().compose(&w[1]);
            assert!(rel.translation().norm() <= 0.01);
            assert!(rel.rotation_angle() <= 0.5f64.to_radians());
        }
    }

    #[test]
    fn single_plane_fails_visibility() {
        let mut spec = single_plane_spec([0.0, 0.0, -1.0], 2.0);
        assert!(matches!(spec.validate(), Err(Error::Config { .. })));
        // a second, parallel plane behind the first does not help
        spec.planes.push(ScenePlane {
            normal: [0.0, 0.0, -1.0],
            offset: 3.0,
            texture: Texture::Constant { value: 0.1 },
        });
        assert!(spec.validate().is_err());
    }

    #[test]
    fn invalid_plane_normal() {
        let mut scene = SceneFile::room_corner(2);
        scene.planes[0].normal = [1.0, 0.0, -1.0];
        let err = scene.into_spec(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("planes[0].normal"), "{err}");
    }

    #[test]
    fn noise_is_seeded() {
        let mut scene = SceneFile::room_corner(2);
        scene.intrinsics = small_intrinsics();
        scene.depth_noise_sigma = 0.005;
        let a = scene.clone().into_spec(Path::new(".")).unwrap();
        let b = scene.clone().into_spec(Path::new(".")).unwrap();
        assert_eq!(a.render_raw(1), b.render_raw(1));
        scene.seed = 99;
        let c = scene.into_spec(Path::new(".")).unwrap();
        assert_ne!(a.render_raw(1).depth, c.render_raw(1).depth);
    }

    #[test]
    fn textures_stay_in_range() {
        let tex = [
            Texture::Constant { value: 2.0 },
            Texture::Checkerboard { cell: 0.1, low: 0.2, high: 0.8 },
            Texture::Noise { scale: 0.1, octaves: 4, mean: 0.5, contrast: 1.0, seed: 3 },
        ];
        for t in &tex {
            for i in 0..500 {
                let v = t.sample(i as f64 * 0.013 - 3.0, i as f64 * -0.007 + 1.0);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let board = &tex[1];
        assert_eq!(board.sample(0.05, 0.05), 0.2);
        assert_eq!(board.sample(0.15, 0.05), 0.8);
        assert_eq!(board.sample(-0.05, 0.05), 0.8);
    }

    #[test]
    fn scene_file_round_trip() {
        let scene = SceneFile::room_corner(5);
        let back: SceneFile = toml::from_str(&scene.to_toml()).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn reload_is_bit_identical() {
        let mut scene = SceneFile::room_corner(3);
        scene.intrinsics = small_intrinsics();
        scene.depth_noise_sigma = 0.005;
        let spec = scene.into_spec(Path::new(".")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = render_synthetic(&spec, dir.path()).unwrap();
        let seq = load_sequence(&manifest).unwrap();
        for (k, loaded) in seq.frames().enumerate() {
            assert_eq!(loaded.unwrap(), spec.render_frame(k));
        }
        let gt = seq.load_groundtruth().unwrap().unwrap();
        assert_eq!(gt.len(), 3);
        for (a, b) in gt.iter().zip(&spec.trajectory) {
            assert!((a.pose.translation() - b.pose.translation()).norm() < 1e-9);
        }
    }

    #[test]
    fn validation_failure_writes_nothing() {
        let spec = single_plane_spec([0.0, 0.0, -1.0], 2.0);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("seq");
        assert!(render_synthetic(&spec, &out).is_err());
        assert!(!out.exists());
    }
}
