//! Closed-form relative rotation from two pairs of matched plane normals.
//!
//! For a plane seen in both frames, `n_ref = R · n_cur`. Two non-parallel
//! planes pin down `R`:
//!
//! * both normals unchanged: `R = I`;
//! * one normal unchanged: that normal is the rotation axis and the other
//!   pair fixes the angle;
//! * neither unchanged: the axis is orthogonal to both normal differences,
//!   `N ∝ (n1r - n1c) × (n2r - n2c)`, and either pair fixes the angle.
//!
//! The angle about a known axis comes from the Rodrigues formula, solved for
//! cos and sin separately and combined with `atan2`.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planes::PlaneMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationParams {
    /// Dot product above which a normal pair is treated as unmoved.
    pub parallel_tol: f64,
    /// Minimum angle between the two planes of a pair, radians.
    pub nonparallel_min_angle: f64,
    /// Largest tolerated angular misfit of a candidate on its own pair, radians.
    pub max_residual: f64,
}

impl Default for RotationParams {
    fn default() -> Self {
        Self {
            parallel_tol: 0.9999,
            nonparallel_min_angle: 10f64.to_radians(),
            max_residual: 3f64.to_radians(),
        }
    }
}

impl RotationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.parallel_tol > 0.0 && self.parallel_tol < 1.0) {
            return Err(Error::config(
                "rotation.parallel_tol",
                format!("must lie in (0, 1), got {}", self.parallel_tol),
            ));
        }
        if !(self.nonparallel_min_angle >= 0.0 && self.nonparallel_min_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config(
                "rotation.nonparallel_min_angle",
                "must lie in [0, pi/2) radians",
            ));
        }
        if !(self.max_residual > 0.0) {
            return Err(Error::config("rotation.max_residual", "must be > 0"));
        }
        Ok(())
    }
}

/// Which closed form produced a rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaseTag {
    /// Both normal pairs unchanged.
    Identity,
    /// One pair unchanged; its normal is the axis.
    KnownAxis,
    /// General case; axis from the cross product of normal differences.
    General,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Identity => "identity",
            CaseTag::KnownAxis => "known_axis",
            CaseTag::General => "general",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum RotationError {
    #[error("plane normals are {angle_deg:.2} deg apart, below the non-parallel minimum")]
    NearParallel { angle_deg: f64 },
    #[error("rotation axis is undetermined for this pair")]
    Degenerate,
    #[error("best candidate misfits its pair by {residual_deg:.3} deg")]
    Inconsistent { residual_deg: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRotation {
    pub rotation: Matrix3<f64>,
    pub case_tag: CaseTag,
    /// Largest angle between `R·n_cur` and `n_ref` over the two pairs, radians.
    pub residual: f64,
}

#[inline]
fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Angle about `axis` taking `n_cur` to `n_ref`; `None` when `n_cur` is
/// (nearly) parallel to the axis.
fn angle_about_axis(axis: &Vector3<f64>, n_ref: &Vector3<f64>, n_cur: &Vector3<f64>) -> Option<f64> {
    let along = axis.dot(n_cur);
    let perp = axis.cross(n_cur);
    let perp_sq = perp.norm_squared();
    if perp_sq.sqrt() < 1e-9 {
        return None;
    }
    let cos = (n_ref.dot(n_cur) - along * along) / (1.0 - along * along);
    let sin = n_ref.dot(&perp) / perp_sq;
    Some(sin.atan2(cos))
}

fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Rotation `R` with `R·n_ic ≈ n_ir` for both pairs.
///
/// Every closed form admissible for the pair is evaluated (the identity and
/// known-axis forms only when the corresponding normals agree within
/// `parallel_tol`) and the one with the smallest misfit is returned.
pub fn rotation_from_pair(
    n1r: &Vector3<f64>,
    n1c: &Vector3<f64>,
    n2r: &Vector3<f64>,
    n2c: &Vector3<f64>,
    params: &RotationParams,
) -> Result<PairRotation, RotationError> {
    let separation = n1r.dot(n2r).abs().min(1.0).acos();
    if separation < params.nonparallel_min_angle {
        return Err(RotationError::NearParallel {
            angle_deg: separation.to_degrees(),
        });
    }

    let mut candidates: Vec<(CaseTag, Matrix3<f64>)> = Vec::with_capacity(6);
    let unmoved1 = n1r.dot(n1c) >= params.parallel_tol;
    let unmoved2 = n2r.dot(n2c) >= params.parallel_tol;
    if unmoved1 && unmoved2 {
        candidates.push((CaseTag::Identity, Matrix3::identity()));
    }
    if unmoved1 {
        if let Some(alpha) = angle_about_axis(n1r, n2r, n2c) {
            candidates.push((CaseTag::KnownAxis, axis_angle(n1r, alpha)));
        }
    }
    if unmoved2 {
        if let Some(alpha) = angle_about_axis(n2r, n1r, n1c) {
            candidates.push((CaseTag::KnownAxis, axis_angle(n2r, alpha)));
        }
    }

    let d1 = n1r - n1c;
    let d2 = n2r - n2c;
    let cross = d1.cross(&d2);
    let scale = d1.norm() * d2.norm();
    if scale > 0.0 && cross.norm() >= 1e-9 * scale {
        let axis = cross.normalize();
        // the cross product fixes the axis only up to sign
        for signed in [axis, -axis] {
            for (nr, nc) in [(n1r, n1c), (n2r, n2c)] {
                if let Some(alpha) = angle_about_axis(&signed, nr, nc) {
                    candidates.push((CaseTag::General, axis_angle(&signed, alpha)));
                }
            }
        }
    }

    if candidates.is_empty() {
        return Err(RotationError::Degenerate);
    }

    let best = candidates
        .into_iter()
        .map(|(case_tag, rotation)| {
            let residual = angle_between(&(rotation * n1c), n1r)
                .max(angle_between(&(rotation * n2c), n2r));
            PairRotation {
                rotation,
                case_tag,
                residual,
            }
        })
        .min_by(|a, b| {
            a.residual
                .total_cmp(&b.residual)
                .then(a.case_tag.cmp(&b.case_tag))
        })
        .expect("non-empty");

    if best.residual > params.max_residual {
        return Err(RotationError::Inconsistent {
            residual_deg: best.residual.to_degrees(),
        });
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationEstimate {
    /// `R_ref_cur`: maps current-frame directions into the reference frame.
    pub rotation: Matrix3<f64>,
    /// Pixel-weighted mean angle between `R·normal_cur` and `normal_ref`
    /// over all Modes, radians.
    pub residual: f64,
    pub case_tag: CaseTag,
    /// Indices of the two Modes that produced the rotation.
    pub pair_used: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FallbackReason {
    /// Fewer than two Modes were tracked.
    TooFewModes,
    /// No Mode pair passed the separation test.
    NoAdmissiblePair,
    /// Every admissible pair was degenerate or inconsistent.
    AllCandidatesRejected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RotationOutcome {
    Estimated(RotationEstimate),
    /// Under-constrained frame; callers substitute an identity increment.
    Fallback(FallbackReason),
}

impl RotationOutcome {
    pub fn is_fallback(&self) -> bool {
        matches!(self, RotationOutcome::Fallback(_))
    }

    pub fn estimate(&self) -> Option<&RotationEstimate> {
        match self {
            RotationOutcome::Estimated(e) => Some(e),
            RotationOutcome::Fallback(_) => None,
        }
    }

    /// Estimated rotation, identity on fallback.
    pub fn rotation(&self) -> Matrix3<f64> {
        self.estimate()
            .map(|e| e.rotation)
            .unwrap_or_else(Matrix3::identity)
    }
}

fn weighted_residual(rotation: &Matrix3<f64>, modes: &[PlaneMode]) -> f64 {
    let (sum, weight) = modes.iter().fold((0.0, 0.0), |(s, w), m| {
        let c = m.pixel_count as f64;
        (s + c * angle_between(&(rotation * m.normal_cur), &m.normal_ref), w + c)
    });
    if weight > 0.0 {
        sum / weight
    } else {
        0.0
    }
}

/// Evaluates every admissible Mode pair and keeps the rotation with the
/// smallest pixel-weighted residual over all Modes. Ties go to the pair with
/// more supporting pixels, then to the lower pair index.
pub fn estimate_rotation(modes: &[PlaneMode], params: &RotationParams) -> RotationOutcome {
    if modes.len() < 2 {
        return RotationOutcome::Fallback(FallbackReason::TooFewModes);
    }
    let mut admissible = false;
    let mut best: Option<(f64, usize, (usize, usize), PairRotation)> = None;
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let (a, b) = (&modes[i], &modes[j]);
            let pair = match rotation_from_pair(
                &a.normal_ref,
                &a.normal_cur,
                &b.normal_ref,
                &b.normal_cur,
                params,
            ) {
                Ok(p) => {
                    admissible = true;
                    p
                }
                Err(RotationError::NearParallel { .. }) => continue,
                Err(_) => {
                    admissible = true;
                    continue;
                }
            };
            let score = weighted_residual(&pair.rotation, modes);
            let support = a.pixel_count + b.pixel_count;
            let better = match &best {
                None => true,
                Some((s, sup, idx, _)) => score
                    .total_cmp(s)
                    .then(sup.cmp(&support))
                    .then((i, j).cmp(idx))
                    .is_lt(),
            };
            if better {
                best = Some((score, support, (i, j), pair));
            }
        }
    }
    match best {
        Some((residual, _, pair_used, pair)) => RotationOutcome::Estimated(RotationEstimate {
            rotation: pair.rotation,
            residual,
            case_tag: pair.case_tag,
            pair_used,
        }),
        None if admissible => RotationOutcome::Fallback(FallbackReason::AllCandidatesRejected),
        None => RotationOutcome::Fallback(FallbackReason::NoAdmissiblePair),
    }
}
