//! Association of overlapping planes between two normal maps.
//!
//! A pixel is taken to lie on the same plane in both frames when its
//! reference and current normals nearly agree. Such pixels are grouped
//! greedily, in row-major order, into Modes keyed by the reference normal;
//! each Mode's representative normals are the component-wise medians of its
//! members.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normals::NormalMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneTrackerParams {
    /// Minimum `N_ref(u,v) · N_cur(u,v)` for a pixel to count as overlapping.
    pub threshold_overlap: f64,
    /// Minimum dot product with a Mode's seed normal to join that Mode.
    pub threshold_mode: f64,
    pub min_mode_pixels: usize,
    /// Largest Modes kept in the output.
    pub max_modes: usize,
    /// Retain member pixel indices on each Mode (diagnostics only).
    pub keep_members: bool,
}

impl Default for PlaneTrackerParams {
    fn default() -> Self {
        Self {
            threshold_overlap: 0.95,
            threshold_mode: 0.98,
            min_mode_pixels: 500,
            max_modes: 8,
            keep_members: false,
        }
    }
}

impl PlaneTrackerParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must lie in (0, 1], got {v}")))
            }
        };
        unit("planes.threshold_overlap", self.threshold_overlap)?;
        unit("planes.threshold_mode", self.threshold_mode)?;
        if self.min_mode_pixels < 3 {
            return Err(Error::config("planes.min_mode_pixels", "must be >= 3"));
        }
        if self.max_modes == 0 {
            return Err(Error::config("planes.max_modes", "must be >= 1"));
        }
        Ok(())
    }
}

/// One tracked plane seen in both frames.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneMode {
    pub normal_ref: Vector3<f64>,
    pub normal_cur: Vector3<f64>,
    pub pixel_count: usize,
    /// Row-major pixel indices, present when `keep_members` is set.
    pub member_pixels: Option<Vec<u32>>,
}

struct Accumulator {
    seed: Vector3<f64>,
    members: Vec<u32>,
}

const SCAN_MODES_PER_OUTPUT: usize = 8;

/// Returns Modes sorted by `pixel_count`, largest first. An empty list means
/// no pixel passed the overlap test or no Mode reached `min_mode_pixels`.
pub fn track_planes(
    ref_normals: &NormalMap,
    cur_normals: &NormalMap,
    params: &PlaneTrackerParams,
) -> Result<Vec<PlaneMode>> {
    if ref_normals.width() != cur_normals.width() || ref_normals.height() != cur_normals.height()
    {
        return Err(Error::Data(format!(
            "normal maps differ in size: {}x{} vs {}x{}",
            ref_normals.width(),
            ref_normals.height(),
            cur_normals.width(),
            cur_normals.height()
        )));
    }
    let rn = ref_normals.normals().as_slice();
    let cn = cur_normals.normals().as_slice();
    let rv = ref_normals.validity().as_slice();
    let cv = cur_normals.validity().as_slice();

    // Slivers at plane boundaries seed clusters too; capping during the scan
    // would let them crowd out planes seen later in scan order, so the scan
    // gets a looser bound and the cap applies to the surviving Modes.
    let scan_limit = params.max_modes.saturating_mul(SCAN_MODES_PER_OUTPUT);
    let mut modes: Vec<Accumulator> = Vec::with_capacity(scan_limit.min(64));
    for i in 0..rn.len() {
        if !(rv[i] && cv[i]) {
            continue;
        }
        let nr = &rn[i];
        if nr.dot(&cn[i]) < params.threshold_overlap {
            continue;
        }
        match modes
            .iter()
            .position(|m| m.seed.dot(nr) >= params.threshold_mode)
        {
            Some(k) => modes[k].members.push(i as u32),
            None if modes.len() < scan_limit => modes.push(Accumulator {
                seed: *nr,
                members: vec![i as u32],
            }),
            None => {}
        }
    }

    let mut scratch = Vec::new();
    let mut clusters: Vec<(Vector3<f64>, Vector3<f64>, Vec<u32>)> = modes
        .into_iter()
        .filter(|m| m.members.len() >= params.min_mode_pixels)
        .filter_map(|m| {
            let normal_ref = median_direction(rn, &m.members, &mut scratch)?;
            let normal_cur = median_direction(cn, &m.members, &mut scratch)?;
            Some((normal_ref, normal_cur, m.members))
        })
        .collect();
    // stable: equal counts keep creation (scan) order
    clusters.sort_by(|a, b| b.2.len().cmp(&a.2.len()));

    // A cluster seeded near a boundary can settle within the join threshold
    // of a larger one once medians replace seeds; its members that would
    // have joined the larger one move there, the rest are dropped.
    let mut merged: Vec<(Vector3<f64>, Vector3<f64>, Vec<u32>)> = Vec::with_capacity(clusters.len());
    for c in clusters {
        match merged.iter().position(|m| m.0.dot(&c.0) >= params.threshold_mode) {
            Some(k) => {
                let target = &mut merged[k];
                let n = target.0;
                target
                    .2
                    .extend(c.2.iter().filter(|&&i| rn[i as usize].dot(&n) >= params.threshold_mode));
                target.2.sort_unstable();
                if let (Some(r), Some(cu)) = (
                    median_direction(rn, &target.2, &mut scratch),
                    median_direction(cn, &target.2, &mut scratch),
                ) {
                    target.0 = r;
                    target.1 = cu;
                }
            }
            None => merged.push(c),
        }
    }

    let mut out: Vec<PlaneMode> = merged
        .into_iter()
        .map(|(normal_ref, normal_cur, members)| PlaneMode {
            normal_ref,
            normal_cur,
            pixel_count: members.len(),
            member_pixels: params.keep_members.then_some(members),
        })
        .collect();
    out.sort_by(|a, b| b.pixel_count.cmp(&a.pixel_count));
    out.truncate(params.max_modes);
    Ok(out)
}

/// Component-wise median of the selected normals, renormalized.
fn median_direction(
    normals: &[Vector3<f64>],
    members: &[u32],
    scratch: &mut Vec<f64>,
) -> Option<Vector3<f64>> {
    let mut m = Vector3::zeros();
    for axis in 0..3 {
        scratch.clear();
        scratch.extend(members.iter().map(|&i| normals[i as usize][axis]));
        m[axis] = median_in_place(scratch);
    }
    let norm = m.norm();
    (norm > 1e-12).then(|| m / norm)
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().max_by(f64::total_cmp).unwrap_or(upper_mid);
        0.5 * (lower_mid + upper_mid)
    }
}

/// Total supporting pixels over all Modes.
pub fn coverage(modes: &[PlaneMode]) -> usize {
    modes.iter().map(|m| m.pixel_count).sum()
}

/// Writes an 8-bit binary PGM where each pixel holds `index + 1` of the Mode
/// it belongs to (0 = untracked). Modes must carry member pixels.
pub fn write_mode_pgm(path: &Path, width: usize, height: usize, modes: &[PlaneMode]) -> Result<()> {
    let mut labels = vec![0u8; width * height];
    let step = if modes.is_empty() { 0 } else { 255 / modes.len() };
    for (k, mode) in modes.iter().enumerate() {
        let members = mode.member_pixels.as_ref().ok_or_else(|| {
            Error::Data("Mode has no member pixels; enable keep_members".into())
        })?;
        let value = ((k + 1) * step).min(255) as u8;
        for &i in members {
            if let Some(px) = labels.get_mut(i as usize) {
                *px = value;
            }
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(file, "P5\n{width} {height}\n255\n")
        .and_then(|_| file.write_all(&labels))
        .map_err(|e| Error::io(path, e))
}
