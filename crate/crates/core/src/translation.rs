//! Translation between a rotation-aligned cloud and a keyframe.
//!
//! Both clouds are projected orthographically onto the x-y plane, so metric
//! sizes are preserved regardless of depth. The planar shift is the
//! correlator peak between the two intensity projections; the shift along z
//! is the mean depth difference over pixels whose intensities agree after
//! undoing the planar shift.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::grid::Grid;
use crate::kcc::{KccModel, KccParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Meters per pixel along x.
    pub resolution_x: f64,
    /// Meters per pixel along y.
    pub resolution_y: f64,
    /// Side of the square projection grid; a power of two.
    pub grid_size: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            resolution_x: 0.01,
            resolution_y: 0.01,
            grid_size: 256,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("projection.resolution_x", self.resolution_x),
            ("projection.resolution_y", self.resolution_y),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {r}")));
            }
        }
        if self.grid_size < 32 || !self.grid_size.is_power_of_two() {
            return Err(Error::config(
                "projection.grid_size",
                format!("must be a power of two >= 32, got {}", self.grid_size),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslationParams {
    /// Largest absolute intensity difference for a pixel to count as matched.
    pub color_match_threshold: f64,
    /// PSR below which the translation keyframe is replaced.
    pub psr_keyframe_threshold: f64,
    pub min_matched_pixels: usize,
}

impl Default for TranslationParams {
    fn default() -> Self {
        Self {
            color_match_threshold: 0.05,
            psr_keyframe_threshold: 15.0,
            min_matched_pixels: 100,
        }
    }
}

impl TranslationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.color_match_threshold > 0.0) {
            return Err(Error::config(
                "translation.color_match_threshold",
                format!("must be > 0, got {}", self.color_match_threshold),
            ));
        }
        if !self.psr_keyframe_threshold.is_finite() {
            return Err(Error::config("translation.psr_keyframe_threshold", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TranslationError {
    #[error("no point falls inside the projection grid")]
    EmptyProjection,
    #[error("only {matched} pixels matched after the planar shift")]
    TooFewMatches { matched: usize },
}

/// Orthographic intensity and depth images of an aligned cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct AxonometricFrame {
    /// Intensity in [0, 1]; 0 where invalid.
    pub color: Grid<f64>,
    /// z of the retained point, meters; 0 where invalid.
    pub depth: Grid<f64>,
    pub valid: Grid<bool>,
    pub resolution_x: f64,
    pub resolution_y: f64,
}

impl AxonometricFrame {
    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&b| b).count()
    }

    pub fn grid_size(&self) -> usize {
        self.color.width()
    }

    /// Mean-subtracted (over valid cells), scaled to unit peak magnitude,
    /// invalid cells at the neutral value 0.
    pub fn correlation_signal(&self) -> Grid<f64> {
        let (sum, count) = self
            .color
            .as_slice()
            .iter()
            .zip(self.valid.as_slice())
            .filter(|(_, &ok)| ok)
            .fold((0.0, 0usize), |(s, n), (c, _)| (s + c, n + 1));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let mut out = Grid::from_vec(
            self.color.width(),
            self.color.height(),
            self.color
                .as_slice()
                .iter()
                .zip(self.valid.as_slice())
                .map(|(&c, &ok)| if ok { c - mean } else { 0.0 })
                .collect(),
        );
        let peak = out.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            for v in out.as_mut_slice() {
                *v /= peak;
            }
        }
        out
    }
}

/// Bins each valid point at `(round(x/rx), round(y/ry))` relative to the grid
/// centre; the nearest point (smallest z) wins a cell.
pub fn project_axonometric(
    aligned: &PointCloud,
    intensity: &Grid<f32>,
    cfg: &ProjectionConfig,
) -> Result<AxonometricFrame, TranslationError> {
    assert!(
        aligned.width() == intensity.width() && aligned.height() == intensity.height(),
        "cloud and intensity image differ in size"
    );
    let n = cfg.grid_size;
    let half = (n / 2) as i64;
    let mut color = Grid::filled(n, n, 0.0);
    let mut depth = Grid::filled(n, n, f64::INFINITY);
    let mut valid = Grid::filled(n, n, false);
    let inv_rx = 1.0 / cfg.resolution_x;
    let inv_ry = 1.0 / cfg.resolution_y;
    let gray = intensity.as_slice();
    let mut any = false;
    for (i, p) in aligned.iter_valid() {
        let col = (p.x * inv_rx).round() as i64 + half;
        let row = (p.y * inv_ry).round() as i64 + half;
        if col < 0 || row < 0 || col >= n as i64 || row >= n as i64 {
            continue;
        }
        let k = row as usize * n + col as usize;
        if p.z < depth.as_slice()[k] {
            depth.as_mut_slice()[k] = p.z;
            color.as_mut_slice()[k] = gray[i] as f64;
            valid.as_mut_slice()[k] = true;
            any = true;
        }
    }
    if !any {
        return Err(TranslationError::EmptyProjection);
    }
    for (d, &ok) in depth.as_mut_slice().iter_mut().zip(valid.as_slice()) {
        if !ok {
            *d = 0.0;
        }
    }
    Ok(AxonometricFrame {
        color,
        depth,
        valid,
        resolution_x: cfg.resolution_x,
        resolution_y: cfg.resolution_y,
    })
}

/// A projected keyframe together with the correlator trained on it.
#[derive(Clone, Debug)]
pub struct KeyProjection {
    pub frame: AxonometricFrame,
    pub model: KccModel,
}

impl KeyProjection {
    pub fn new(frame: AxonometricFrame, params: &KccParams) -> Result<Self> {
        let model = KccModel::train(&frame.correlation_signal(), params)?;
        Ok(Self { frame, model })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarShift {
    /// Pixel shift of the current projection relative to the keyframe.
    pub pixels: (i64, i64),
    /// The same shift in meters.
    pub meters: (f64, f64),
    pub psr: f64,
}

pub fn estimate_planar_shift(key: &KeyProjection, cur: &AxonometricFrame) -> Result<PlanarShift> {
    if key.frame.valid_count() == 0 || cur.valid_count() == 0 {
        return Err(Error::Insufficient("empty axonometric frame".into()));
    }
    let res = key.model.detect(&cur.correlation_signal())?;
    let (du, dv) = res.peak_shift;
    Ok(PlanarShift {
        pixels: (du, dv),
        meters: (du as f64 * cur.resolution_x, dv as f64 * cur.resolution_y),
        psr: res.psr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthShift {
    /// Mean of `shifted(cur.depth) - key.depth` over matched pixels.
    pub delta_z: f64,
    pub matched: usize,
}

/// Pixels `(u, v)` of the keyframe matched against `cur(u + du, v + dv)`:
/// valid in both and with intensities within the color threshold.
pub fn matched_pixels(
    key: &AxonometricFrame,
    cur: &AxonometricFrame,
    shift: (i64, i64),
    color_threshold: f64,
) -> Vec<(usize, usize)> {
    let n = key.grid_size() as i64;
    let (du, dv) = shift;
    let mut out = Vec::new();
    for v in 0..n {
        let sv = v + dv;
        if sv < 0 || sv >= n {
            continue;
        }
        for u in 0..n {
            let su = u + du;
            if su < 0 || su >= n {
                continue;
            }
            let (ku, kv, cu, cv) = (u as usize, v as usize, su as usize, sv as usize);
            if !(*key.valid.get(ku, kv) && *cur.valid.get(cu, cv)) {
                continue;
            }
            // L1 residual on intensity
            if (cur.color.get(cu, cv) - key.color.get(ku, kv)).abs() < color_threshold {
                out.push((ku, kv));
            }
        }
    }
    out
}

pub fn estimate_depth_shift(
    key: &AxonometricFrame,
    cur: &AxonometricFrame,
    shift: (i64, i64),
    params: &TranslationParams,
) -> Result<DepthShift, TranslationError> {
    let matched = matched_pixels(key, cur, shift, params.color_match_threshold);
    if matched.len() < params.min_matched_pixels.max(1) {
        return Err(TranslationError::TooFewMatches {
            matched: matched.len(),
        });
    }
    let (du, dv) = shift;
    let sum: f64 = matched
        .iter()
        .map(|&(u, v)| {
            let cu = (u as i64 + du) as usize;
            let cv = (v as i64 + dv) as usize;
            cur.depth.get(cu, cv) - key.depth.get(u, v)
        })
        .sum();
    Ok(DepthShift {
        delta_z: sum / matched.len() as f64,
        matched: matched.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationEstimate {
    /// `t` in `p_key = p_aligned + t`, meters.
    pub translation: Vector3<f64>,
    pub planar: PlanarShift,
    pub depth: DepthShift,
}

/// Planar shift followed by depth shift. The returned translation carries the
/// keyframe-from-current sign (the negated content displacement).
pub fn estimate_translation(
    key: &KeyProjection,
    cur: &AxonometricFrame,
    params: &TranslationParams,
) -> Result<TranslationEstimate> {
    let planar = estimate_planar_shift(key, cur)?;
    let depth = estimate_depth_shift(&key.frame, cur, planar.pixels, params)
        .map_err(|e| Error::Insufficient(e.to_string()))?;
    Ok(TranslationEstimate {
        translation: -Vector3::new(planar.meters.0, planar.meters.1, depth.delta_z),
        planar,
        depth,
    })
}
