//! Pinhole camera, rigid poses and organized point clouds.
//!
//! Camera coordinates follow the usual optical convention: x right, y down,
//! z forward. A pose maps points from its own frame into its parent frame,
//! `p_parent = R * p_child + t`.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Default far cutoff for depth measurements, meters.
pub const DEFAULT_MAX_RANGE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Stored depth units per meter (5000 for TUM 16-bit depth).
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    /// TUM / ICL-NUIM style 640x480 camera.
    pub fn tum_default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
            depth_scale: 5000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be > 0, got {value}")))
            }
        };
        positive("intrinsics.fx", self.fx)?;
        positive("intrinsics.fy", self.fy)?;
        positive("intrinsics.depth_scale", self.depth_scale)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("intrinsics.width", "image size must be non-zero"));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::config(
                "intrinsics.cx",
                format!("must lie in (0, {}), got {}", self.width, self.cx),
            ));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::config(
                "intrinsics.cy",
                format!("must lie in (0, {}), got {}", self.height, self.cy),
            ));
        }
        Ok(())
    }

    /// Ray through pixel `(u, v)` with unit z component.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pinhole projection; `None` behind the camera.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// Rigid transform stored as unit quaternion + translation (meters).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSE3 {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: renormalize(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation_matrix(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Quaternion given as `(qx, qy, qz, qw)`; normalized on the way in.
    pub fn from_quaternion_xyzw(q: [f64; 4], translation: Vector3<f64>) -> Result<Self> {
        let quat = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = quat.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::Data(format!("quaternion {q:?} cannot be normalized")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::Data("non-finite translation".into()));
        }
        Ok(Self::new(UnitQuaternion::from_quaternion(quat), translation))
    }

    /// Checks orthonormality and det = +1 within `1e-9` before accepting.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
        if !m.iter().all(|c| c.is_finite()) {
            return Err(Error::Data("non-finite transform".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!(
                "rotation block is not a proper rotation (|RtR - I| = {ortho:.3e}, det = {det})"
            )));
        }
        Ok(Self::from_rotation_matrix(&r, t))
    }

    #[inline]
    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &PoseSE3) -> PoseSE3 {
        PoseSE3::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> PoseSE3 {
        let inv = self.rotation.inverse();
        PoseSE3::new(inv, -(inv * self.translation))
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Quaternion norm is 1 within `1e-9` and every component is finite.
    pub fn is_valid(&self) -> bool {
        let q = self.rotation.quaternion();
        q.coords.iter().all(|c| c.is_finite())
            && self.translation.iter().all(|c| c.is_finite())
            && (q.norm() - 1.0).abs() <= 1e-9
    }

    /// Rotation angle of this pose, radians.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }
}

pub(crate) fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// `compose(a, b) = a ∘ b`.
pub fn compose(a: &PoseSE3, b: &PoseSE3) -> PoseSE3 {
    a.compose(b)
}

/// Angle of `a * bᵀ`, radians.
pub fn geodesic_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a * b.transpose();
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // acos loses precision near zero; recover the small-angle regime from the skew part
    let skew = Vector3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let sin = 0.5 * skew.norm();
    sin.atan2(cos)
}

/// Depth image in meters with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    depth: Grid<f64>,
    valid: Grid<bool>,
}

impl DepthImage {
    /// Values that are non-finite, `<= 0` or `>= max_range` are marked invalid
    /// and stored as zero.
    pub fn from_meters(depth: Grid<f64>, max_range: f64) -> Self {
        let valid = depth.map(|&d| d.is_finite() && d > 0.0 && d < max_range);
        let depth = Grid::from_vec(
            depth.width(),
            depth.height(),
            depth
                .as_slice()
                .iter()
                .zip(valid.as_slice())
                .map(|(&d, &ok)| if ok { d } else { 0.0 })
                .collect(),
        );
        Self { depth, valid }
    }

    /// Converts raw sensor units once, at ingestion.
    pub fn from_raw_u16(raw: &Grid<u16>, depth_scale: f64, max_range: f64) -> Self {
        Self::from_meters(raw.map(|&d| d as f64 / depth_scale), max_range)
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn depth(&self) -> &Grid<f64> {
        &self.depth
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Option<f64> {
        let i = self.depth.index(u, v);
        self.valid.as_slice()[i].then(|| self.depth.as_slice()[i])
    }
}

/// Organized point cloud: one point per pixel plus a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Grid<Vector3<f64>>,
    valid: Grid<bool>,
}

impl PointCloud {
    pub fn new(points: Grid<Vector3<f64>>, valid: Grid<bool>) -> Self {
        assert!(points.same_shape(&valid), "point/validity shape mismatch");
        Self { points, valid }
    }

    pub fn width(&self) -> usize {
        self.points.width()
    }

    pub fn height(&self) -> usize {
        self.points.height()
    }

    pub fn points(&self) -> &Grid<Vector3<f64>> {
        &self.points
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Option<&Vector3<f64>> {
        let i = self.points.index(u, v);
        self.valid.as_slice()[i].then(|| &self.points.as_slice()[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&b| b).count()
    }

    /// Valid points in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, &Vector3<f64>)> + '_ {
        self.points
            .as_slice()
            .iter()
            .zip(self.valid.as_slice())
            .enumerate()
            .filter_map(|(i, (p, &ok))| ok.then_some((i, p)))
    }
}

pub fn backproject(depth: &DepthImage, intr: &CameraIntrinsics) -> Result<PointCloud> {
    if depth.width() != intr.width || depth.height() != intr.height {
        return Err(Error::config(
            "intrinsics",
            format!(
                "depth image is {}x{} but intrinsics describe {}x{}",
                depth.width(),
                depth.height(),
                intr.width,
                intr.height
            ),
        ));
    }
    let (w, h) = (intr.width, intr.height);
    let inv_fx = 1.0 / intr.fx;
    let inv_fy = 1.0 / intr.fy;
    let d = depth.depth().as_slice();
    let ok = depth.validity().as_slice();
    let mut points = Vec::with_capacity(w * h);
    for v in 0..h {
        let y = (v as f64 - intr.cy) * inv_fy;
        for u in 0..w {
            let i = v * w + u;
            if ok[i] {
                let z = d[i];
                points.push(Vector3::new((u as f64 - intr.cx) * inv_fx * z, y * z, z));
            } else {
                points.push(Vector3::zeros());
            }
        }
    }
    Ok(PointCloud {
        points: Grid::from_vec(w, h, points),
        valid: depth.validity().clone(),
    })
}

/// Rotates every valid point: `p_aligned = R * p`.
pub fn align_cloud(cloud: &PointCloud, rotation: &Matrix3<f64>) -> PointCloud {
    let points = Grid::from_vec(
        cloud.width(),
        cloud.height(),
        cloud
            .points
            .as_slice()
            .iter()
            .zip(cloud.valid.as_slice())
            .map(|(p, &ok)| if ok { rotation * p } else { *p })
            .collect(),
    );
    PointCloud {
        points,
        valid: cloud.valid.clone(),
    }
}
