//! Dense local-plane normal maps from organized point clouds.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    normals: Grid<Vector3<f64>>,
    valid: Grid<bool>,
}

impl NormalMap {
    pub fn new(normals: Grid<Vector3<f64>>, valid: Grid<bool>) -> Self {
        assert!(normals.same_shape(&valid), "normal/validity shape mismatch");
        Self { normals, valid }
    }

    pub fn width(&self) -> usize {
        self.normals.width()
    }

    pub fn height(&self) -> usize {
        self.normals.height()
    }

    pub fn normals(&self) -> &Grid<Vector3<f64>> {
        &self.normals
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.valid
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Option<&Vector3<f64>> {
        let i = self.normals.index(u, v);
        self.valid.as_slice()[i].then(|| &self.normals.as_slice()[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalMapParams {
    /// Side of the smoothing window in pixels; 1 disables smoothing.
    pub cell_size: usize,
}

impl Default for NormalMapParams {
    fn default() -> Self {
        Self { cell_size: 10 }
    }
}

impl NormalMapParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 {
            return Err(Error::config("normals.cell_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Cross product of the vertical and horizontal central differences,
/// normalized and oriented toward the camera. The one-pixel border is invalid.
pub fn compute_raw_normals(cloud: &PointCloud) -> NormalMap {
    let (w, h) = (cloud.width(), cloud.height());
    let pts = cloud.points().as_slice();
    let ok = cloud.validity().as_slice();
    let mut normals = vec![Vector3::zeros(); w * h];
    let mut valid = vec![false; w * h];
    for v in 1..h.saturating_sub(1) {
        for u in 1..w - 1 {
            let i = v * w + u;
            let (down, up, left, right) = (i + w, i - w, i - 1, i + 1);
            if !(ok[i] && ok[down] && ok[up] && ok[left] && ok[right]) {
                continue;
            }
            let vertical = pts[down] - pts[up];
            let horizontal = pts[left] - pts[right];
            let n = vertical.cross(&horizontal);
            let norm = n.norm();
            if norm < 1e-12 {
                continue;
            }
            let mut n = n / norm;
            if n.dot(&pts[i]) > 0.0 {
                n = -n;
            }
            normals[i] = n;
            valid[i] = true;
        }
    }
    NormalMap::new(Grid::from_vec(w, h, normals), Grid::from_vec(w, h, valid))
}

/// Box-mean of valid normals in a `cell_size` window anchored at each pixel,
/// renormalized. A pixel is dropped when fewer than half of the (border
/// truncated) window pixels are valid.
pub fn smooth_normals(raw: &NormalMap, params: &NormalMapParams) -> NormalMap {
    let cell = params.cell_size.max(1);
    if cell == 1 {
        return raw.clone();
    }
    let (w, h) = (raw.width(), raw.height());
    let before = (cell - 1) / 2;
    let after = cell / 2;

    // summed-area tables with a zero first row/column
    let sw = w + 1;
    let mut sums = vec![[0.0f64; 4]; sw * (h + 1)];
    let normals = raw.normals().as_slice();
    let ok = raw.validity().as_slice();
    for v in 0..h {
        let mut row = [0.0f64; 4];
        for u in 0..w {
            let i = v * w + u;
            if ok[i] {
                let n = &normals[i];
                row[0] += n.x;
                row[1] += n.y;
                row[2] += n.z;
                row[3] += 1.0;
            }
            let above = sums[v * sw + u + 1];
            sums[(v + 1) * sw + u + 1] = [
                above[0] + row[0],
                above[1] + row[1],
                above[2] + row[2],
                above[3] + row[3],
            ];
        }
    }

    let mut out = vec![Vector3::zeros(); w * h];
    let mut valid = vec![false; w * h];
    for v in 0..h {
        let v0 = v.saturating_sub(before);
        let v1 = (v + after + 1).min(h);
        for u in 0..w {
            let i = v * w + u;
            if !ok[i] {
                continue;
            }
            let u0 = u.saturating_sub(before);
            let u1 = (u + after + 1).min(w);
            let a = sums[v0 * sw + u0];
            let b = sums[v0 * sw + u1];
            let c = sums[v1 * sw + u0];
            let d = sums[v1 * sw + u1];
            let count = d[3] - b[3] - c[3] + a[3];
            let window = ((u1 - u0) * (v1 - v0)) as f64;
            if 2.0 * count < window {
                continue;
            }
            let mean = Vector3::new(
                d[0] - b[0] - c[0] + a[0],
                d[1] - b[1] - c[1] + a[1],
                d[2] - b[2] - c[2] + a[2],
            ) / count;
            let norm = mean.norm();
            if norm < 1e-6 {
                continue;
            }
            out[i] = mean / norm;
            valid[i] = true;
        }
    }
    NormalMap::new(Grid::from_vec(w, h, out), Grid::from_vec(w, h, valid))
}

/// Raw normals followed by smoothing.
pub fn normal_map(cloud: &PointCloud, params: &NormalMapParams) -> NormalMap {
    smooth_normals(&compute_raw_normals(cloud), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{backproject, CameraIntrinsics, DepthImage};
    use rand::{rngs::StdRng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn intr(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 525.0,
            fy: 525.0,
            cx: w as f64 / 2.0 - 0.5,
            cy: h as f64 / 2.0 - 0.5,
            width: w,
            height: h,
            depth_scale: 5000.0,
        }
    }

    /// Depth of the plane `n·p = offset` along each pixel ray.
    fn plane_depth(cam: &CameraIntrinsics, n: Vector3<f64>, offset: f64) -> Grid<f64> {
        Grid::from_fn(cam.width, cam.height, |u, v| {
            let ray = cam.ray(u as f64, v as f64);
            offset / n.dot(&ray)
        })
    }

    fn cloud_of(cam: &CameraIntrinsics, depth: Grid<f64>) -> PointCloud {
        backproject(&DepthImage::from_meters(depth, 10.0), cam).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_faces_camera() {
        let cam = intr(64, 48);
        let map = compute_raw_normals(&cloud_of(&cam, Grid::filled(64, 48, 2.0)));
        assert_eq!(map.valid_count(), 62 * 46);
        for v in 1..47 {
            for u in 1..63 {
                let n = map.at(u, v).unwrap();
                assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
            }
        }
        assert!(map.at(0, 10).is_none());
    }

    #[test]
    fn slanted_plane_normal() {
        let cam = intr(64, 48);
        let n = Vector3::new(1.0, 0.0, 1.0).normalize();
        // x + z = 3  =>  n·p = 3/sqrt(2)
        let cloud = cloud_of(&cam, plane_depth(&cam, n, 3.0 / 2f64.sqrt()));
        let map = compute_raw_normals(&cloud);
        for v in 1..47 {
            for u in 1..63 {
                let got = map.at(u, v).unwrap();
                // camera sits on the negative side of the plane
                assert!((got + n).norm() < 1e-9, "{got:?}");
                assert!(got.dot(cloud.at(u, v).unwrap()) < 0.0);
            }
        }
    }

    #[test]
    fn holes_invalidate_neighbours() {
        let cam = intr(32, 32);
        let mut depth = Grid::filled(32, 32, 2.0);
        *depth.get_mut(10, 10) = 0.0;
        let map = compute_raw_normals(&cloud_of(&cam, depth));
        for (u, v) in [(10, 10), (9, 10), (11, 10), (10, 9), (10, 11)] {
            assert!(map.at(u, v).is_none(), "({u},{v})");
        }
        assert!(map.at(9, 9).is_some());
    }

    #[test]
    fn smoothing_keeps_uniform_fields() {
        let n = Vector3::new(0.3, -0.4, -0.5).normalize();
        let raw = NormalMap::new(Grid::filled(40, 30, n), Grid::filled(40, 30, true));
        for cell in [1, 2, 5, 10] {
            let out = smooth_normals(&raw, &NormalMapParams { cell_size: cell });
            assert_eq!(out.valid_count(), 40 * 30);
            for m in out.normals().as_slice() {
                assert!((m - n).norm() < 1e-12);
            }
        }
        // idempotent on constant fields
        let once = smooth_normals(&raw, &NormalMapParams::default());
        let twice = smooth_normals(&once, &NormalMapParams::default());
        for (a, b) in once.normals().as_slice().iter().zip(twice.normals().as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cell_size_one_is_identity() {
        let cam = intr(32, 24);
        let raw = compute_raw_normals(&cloud_of(&cam, Grid::filled(32, 24, 1.5)));
        assert_eq!(smooth_normals(&raw, &NormalMapParams { cell_size: 1 }), raw);
    }

    #[test]
    fn quorum_drops_sparse_windows() {
        let n = Vector3::new(0.0, 0.0, -1.0);
        let mut valid = Grid::filled(10, 10, false);
        *valid.get_mut(5, 5) = true;
        let raw = NormalMap::new(Grid::filled(10, 10, n), valid);
        let out = smooth_normals(&raw, &NormalMapParams { cell_size: 3 });
        assert_eq!(out.valid_count(), 0);
    }

    fn mean_angular_error(map: &NormalMap, truth: &Vector3<f64>) -> f64 {
        let errs: Vec<f64> = map
            .normals()
            .as_slice()
            .iter()
            .zip(map.validity().as_slice())
            .filter(|(_, &ok)| ok)
            .map(|(n, _)| n.dot(truth).clamp(-1.0, 1.0).acos())
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    }

    #[test]
    fn smoothing_reduces_noise_monotonically() {
        let cam = intr(160, 120);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let depth = Grid::from_fn(160, 120, |_, _| 2.0 + noise.sample(&mut rng));
        let raw = compute_raw_normals(&cloud_of(&cam, depth));
        let truth = Vector3::new(0.0, 0.0, -1.0);
        let errors: Vec<f64> = [1, 5, 10]
            .iter()
            .map(|&cell| mean_angular_error(&smooth_normals(&raw, &NormalMapParams { cell_size: cell }), &truth))
            .collect();
        assert!(errors[1] <= errors[0] && errors[2] <= errors[1], "{errors:?}");
        assert!(errors[2] < errors[0]);
        for m in smooth_normals(&raw, &NormalMapParams::default()).normals().as_slice() {
            assert!(m.norm() == 0.0 || (m.norm() - 1.0).abs() < 1e-6);
        }
    }
}
