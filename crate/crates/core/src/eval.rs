//! Trajectory metrics: timestamp association, rigid alignment, absolute
//! position error statistics and tag-anchored drift.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::dataset::{TimedPose, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::PoseSE3;

/// Default association window, seconds.
pub const DEFAULT_MAX_DT: f64 = 0.02;

/// Pairs `(est index, gt index)`: each estimate is matched to the nearest
/// ground-truth timestamp within `max_dt`.
pub fn associate(est: &[TimedPose], gt: &[TimedPose], max_dt: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if gt.is_empty() {
        return out;
    }
    for (i, e) in est.iter().enumerate() {
        let j = gt.partition_point(|g| g.timestamp < e.timestamp);
        let best = [j.checked_sub(1), (j < gt.len()).then_some(j)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                let da = (gt[a].timestamp - e.timestamp).abs();
                let db = (gt[b].timestamp - e.timestamp).abs();
                da.total_cmp(&db)
            });
        if let Some(j) = best {
            if (gt[j].timestamp - e.timestamp).abs() <= max_dt {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// Maps estimate positions onto ground truth: `gt ≈ transform ∘ est`.
    pub transform: PoseSE3,
    pub aligned: Trajectory,
    pub pairs: Vec<(usize, usize)>,
}

/// Least-squares rigid transform (no scale) taking `src` onto `dst`.
pub fn rigid_fit(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<PoseSE3> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(Error::Insufficient(format!(
            "rigid alignment needs >= 3 point pairs, got {}",
            src.len().min(dst.len())
        )));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d - mu_d) * (s - mu_s).transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let r = u * fix * v_t;
    Ok(PoseSE3::from_rotation_matrix(&r, mu_d - r * mu_s))
}

pub fn align_trajectories(est: &[TimedPose], gt: &[TimedPose], max_dt: f64) -> Result<Alignment> {
    let pairs = associate(est, gt, max_dt);
    let src: Vec<_> = pairs.iter().map(|&(i, _)| *est[i].pose.translation()).collect();
    let dst: Vec<_> = pairs.iter().map(|&(_, j)| *gt[j].pose.translation()).collect();
    let transform = rigid_fit(&src, &dst)?;
    let aligned = est
        .iter()
        .map(|tp| TimedPose::new(tp.timestamp, transform.compose(&tp.pose)))
        .collect();
    Ok(Alignment {
        transform,
        aligned,
        pairs,
    })
}

/// Position error statistics, meters. `std` is the population deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub sse: f64,
    /// `sqrt(mean(e_i))`, the unsquared variant some texts print under the
    /// RMSE name; kept for comparison only.
    pub rmse_of_norms: f64,
    pub errors: Vec<f64>,
}

impl MetricReport {
    pub fn from_errors(errors: Vec<f64>) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Insufficient("no associated poses".into()));
        }
        let n = errors.len() as f64;
        let sse: f64 = errors.iter().map(|e| e * e).sum();
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = errors.clone();
        let median = crate::planes::median_in_place(&mut sorted);
        Ok(Self {
            rmse: (sse / n).sqrt(),
            mean,
            median,
            std: var.sqrt(),
            sse,
            rmse_of_norms: mean.sqrt(),
            errors,
        })
    }

    pub const CSV_HEADER: &'static str = "rmse,mean,median,std,sse";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{:.9},{:.9},{:.9},{:.9},{:.9}\n",
            Self::CSV_HEADER,
            self.rmse,
            self.mean,
            self.median,
            self.std,
            self.sse
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "poses          {}", self.errors.len());
        for (name, v) in [
            ("RMSE (m)", self.rmse),
            ("Mean (m)", self.mean),
            ("Median (m)", self.median),
            ("Std. (m)", self.std),
            ("SSE (m^2)", self.sse),
        ] {
            let _ = writeln!(s, "{name:<14} {v:.6}");
        }
        let _ = writeln!(s, "sqrt(mean e)   {:.6}", self.rmse_of_norms);
        s
    }
}

/// Euclidean position errors over associated pairs.
pub fn position_errors(est: &[TimedPose], gt: &[TimedPose], pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| (est[i].pose.translation() - gt[j].pose.translation()).norm())
        .collect()
}

/// Errors of `est` against `gt` without any alignment.
pub fn compute_rmse(est: &[TimedPose], gt: &[TimedPose], max_dt: f64) -> Result<MetricReport> {
    let pairs = associate(est, gt, max_dt);
    MetricReport::from_errors(position_errors(est, gt, &pairs))
}

/// Absolute trajectory error after rigid alignment.
pub fn absolute_trajectory_error(est: &[TimedPose], gt: &[TimedPose], max_dt: f64) -> Result<MetricReport> {
    let al = align_trajectories(est, gt, max_dt)?;
    MetricReport::from_errors(position_errors(&al.aligned, gt, &al.pairs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftReport {
    /// Translation norm of the residual transform, meters.
    pub translation: f64,
    pub rotation_deg: f64,
}

/// Residual between the estimated first→last motion and the motion derived
/// from two externally measured poses: `(tag_first⁻¹ ∘ tag_last)⁻¹ ∘
/// (est_first⁻¹ ∘ est_last)`. `tag_*` are camera poses in the tag frame;
/// `est_*` are camera poses in the odometry world frame.
pub fn drift_error(
    est_first: &PoseSE3,
    est_last: &PoseSE3,
    tag_first: &PoseSE3,
    tag_last: &PoseSE3,
) -> Result<DriftReport> {
    for (name, p) in [
        ("est_first", est_first),
        ("est_last", est_last),
        ("tag_first", tag_first),
        ("tag_last", tag_last),
    ] {
        if !p.is_valid() {
            return Err(Error::Data(format!("{name} is not a valid rigid transform")));
        }
    }
    let tag_rel = tag_first.inverse().compose(tag_last);
    let est_rel = est_first.inverse().compose(est_last);
    let residual = tag_rel.inverse().compose(&est_rel);
    Ok(DriftReport {
        translation: residual.translation().norm(),
        rotation_deg: residual.rotation_angle().to_degrees(),
    })
}

/// CSV `series,timestamp,x,y,z`. Every trajectory after the first is rigidly
/// aligned to the first when at least three poses associate; otherwise it is
/// emitted as-is.
pub fn plot_data(series: &[(String, Trajectory)], max_dt: f64) -> String {
    let mut out = String::from("series,timestamp,x,y,z\n");
    let reference = series.first().map(|(_, t)| t);
    for (k, (label, traj)) in series.iter().enumerate() {
        let aligned = match reference {
            Some(r) if k > 0 => align_trajectories(traj, r, max_dt)
                .map(|a| a.aligned)
                .unwrap_or_else(|_| traj.clone()),
            _ => traj.clone(),
        };
        for tp in &aligned {
            let p = tp.pose.translation();
            let _ = writeln!(out, "{label},{:.9},{:.9},{:.9},{:.9}", tp.timestamp, p.x, p.y, p.z);
        }
    }
    out
}
