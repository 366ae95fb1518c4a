//! Three-stage odometry frontend.
//!
//! Stage 1 back-projects depth and computes normal maps. Stage 2 tracks
//! planes against the rotation keyframe and estimates the world rotation.
//! Stage 3 aligns the cloud with that rotation, projects it, correlates it
//! against the translation keyframe and composes the world pose. Each stage
//! keeps its own keyframe.
//!
//! In concurrent mode the stages run on their own threads joined by bounded
//! channels; the single-thread mode runs the very same stage objects in
//! sequence, so both produce identical poses.

use std::fmt::Write as _;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::time::Instant;

use nalgebra::{Matrix3, UnitQuaternion};

use crate::config::RunConfig;
use crate::dataset::{Frame, TimedPose, Trajectory};
use crate::error::Result;
use crate::geometry::{align_cloud, backproject, CameraIntrinsics, PointCloud, PoseSE3};
use crate::normals::{normal_map, NormalMap};
use crate::planes::{coverage, track_planes};
use crate::rotation::{estimate_rotation, CaseTag, FallbackReason, RotationOutcome};
use crate::translation::{estimate_translation, project_axonometric, KeyProjection};

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Output of stage 1.
pub struct NormalsMsg {
    pub frame_id: u64,
    pub frame: Frame,
    pub cloud: PointCloud,
    pub normals: NormalMap,
    pub normal_ms: f64,
}

/// Output of stage 2.
pub struct RotationMsg {
    pub frame_id: u64,
    pub frame: Frame,
    pub cloud: PointCloud,
    /// `R_world_cur`.
    pub world_rotation: Matrix3<f64>,
    pub rotation: RotationReport,
    pub normal_ms: f64,
    pub rotation_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationReport {
    pub case_tag: Option<CaseTag>,
    pub residual_deg: Option<f64>,
    pub fallback: Option<FallbackReason>,
    pub modes: usize,
    pub coverage: usize,
    /// This frame became the rotation keyframe.
    pub keyframe: bool,
}

/// A stage message, or the record of a frame that could not be decoded.
pub enum Msg<T> {
    Frame(T),
    Skipped { frame_id: u64, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameDiagnostics {
    pub frame_id: u64,
    pub timestamp: Option<f64>,
    /// `None` when the frame was processed; otherwise why it was skipped.
    pub skipped: Option<String>,
    pub rotation: Option<RotationReport>,
    pub psr: Option<f64>,
    pub translation_fallback: Option<String>,
    pub translation_keyframe: bool,
    pub normal_ms: f64,
    pub rotation_ms: f64,
    pub translation_ms: f64,
}

pub const DIAGNOSTICS_COLUMNS: &str = "frame_id,timestamp,status,case_tag,residual_deg,psr,modes,\
rotation_fallback,translation_fallback,rotation_keyframe,translation_keyframe,normal_ms,rotation_ms,translation_ms";

fn fallback_name(r: FallbackReason) -> &'static str {
    match r {
        FallbackReason::TooFewModes => "too_few_modes",
        FallbackReason::NoAdmissiblePair => "no_admissible_pair",
        FallbackReason::AllCandidatesRejected => "all_candidates_rejected",
    }
}

impl FrameDiagnostics {
    /// One CSV row. With `timings == false` the latency columns are left
    /// empty so that rows are reproducible byte for byte.
    pub fn csv_row(&self, timings: bool) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let r = self.rotation.as_ref();
        let ms = |v: f64| if timings { format!("{v:.3}") } else { String::new() };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.frame_id,
            opt(self.timestamp.map(|t| format!("{t:.6}"))),
            match &self.skipped {
                None => "ok".to_string(),
                Some(reason) => format!("skipped: {}", reason.replace([',', '\n'], ";")),
            },
            opt(r.and_then(|r| r.case_tag).map(|c| c.as_str().to_string())),
            opt(r.and_then(|r| r.residual_deg).map(|v| format!("{v:.6}"))),
            opt(self.psr.map(|v| format!("{v:.4}"))),
            opt(r.map(|r| r.modes.to_string())),
            opt(r.and_then(|r| r.fallback).map(|f| fallback_name(f).to_string())),
            opt(self.translation_fallback.clone()),
            r.map_or(0, |r| r.keyframe as u8),
            self.translation_keyframe as u8,
            ms(self.normal_ms),
            ms(self.rotation_ms),
            ms(self.translation_ms),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineOutput {
    /// World←camera pose per processed frame; the first frame is the world.
    pub trajectory: Trajectory,
    pub diagnostics: Vec<FrameDiagnostics>,
}

impl PipelineOutput {
    /// Config echo, column header, one row per frame.
    pub fn diagnostics_csv(&self, config: &RunConfig, timings: bool) -> String {
        let mut out = config.to_comment_block();
        out.push_str(DIAGNOSTICS_COLUMNS);
        out.push('\n');
        for d in &self.diagnostics {
            let _ = writeln!(out, "{}", d.csv_row(timings));
        }
        out
    }

    /// Mean per-stage latencies over processed frames, ms.
    pub fn mean_latencies(&self) -> (f64, f64, f64) {
        let done: Vec<_> = self.diagnostics.iter().filter(|d| d.skipped.is_none()).collect();
        let n = done.len().max(1) as f64;
        (
            done.iter().map(|d| d.normal_ms).sum::<f64>() / n,
            done.iter().map(|d| d.rotation_ms).sum::<f64>() / n,
            done.iter().map(|d| d.translation_ms).sum::<f64>() / n,
        )
    }
}

pub struct NormalStage {
    intrinsics: CameraIntrinsics,
    config: RunConfig,
}

impl NormalStage {
    pub fn new(intrinsics: CameraIntrinsics, config: &RunConfig) -> Self {
        Self {
            intrinsics,
            config: config.clone(),
        }
    }

    pub fn process(&mut self, frame_id: u64, frame: Result<Frame>) -> Msg<NormalsMsg> {
        let start = Instant::now();
        let frame = match frame {
            Ok(f) => f,
            Err(e) => {
                return Msg::Skipped {
                    frame_id,
                    reason: e.to_string(),
                }
            }
        };
        let cloud = match backproject(&frame.depth, &self.intrinsics) {
            Ok(c) => c,
            Err(e) => {
                return Msg::Skipped {
                    frame_id,
                    reason: e.to_string(),
                }
            }
        };
        let normals = normal_map(&cloud, &self.config.normals);
        Msg::Frame(NormalsMsg {
            frame_id,
            frame,
            cloud,
            normals,
            normal_ms: elapsed_ms(start),
        })
    }
}

struct RotationKeyframe {
    normals: NormalMap,
    world_rotation: Matrix3<f64>,
    initial_coverage: usize,
}

/// Rotation keyframe decision: refresh when coverage falls below `fraction`
/// of its initial value or fewer than two Modes remain.
pub fn rotation_keyframe_due(modes: usize, coverage: usize, initial: usize, fraction: f64) -> bool {
    modes < 2 || (coverage as f64) < fraction * initial as f64
}

/// Translation keyframe decision: refresh when there is no estimate or its
/// PSR is below the threshold.
pub fn translation_keyframe_due(psr: Option<f64>, threshold: f64) -> bool {
    psr.is_none_or(|p| p < threshold)
}

pub struct RotationStage {
    config: RunConfig,
    keyframe: Option<RotationKeyframe>,
    world_rotation: Matrix3<f64>,
}

impl RotationStage {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            keyframe: None,
            world_rotation: Matrix3::identity(),
        }
    }

    fn make_keyframe(&self, normals: NormalMap, world_rotation: Matrix3<f64>) -> RotationKeyframe {
        let initial_coverage = track_planes(&normals, &normals, &self.config.planes)
            .map(|m| coverage(&m))
            .unwrap_or(0);
        RotationKeyframe {
            normals,
            world_rotation,
            initial_coverage,
        }
    }

    pub fn process(&mut self, msg: Msg<NormalsMsg>) -> Msg<RotationMsg> {
        let m = match msg {
            Msg::Frame(m) => m,
            Msg::Skipped { frame_id, reason } => return Msg::Skipped { frame_id, reason },
        };
        let start = Instant::now();
        let report = match &self.keyframe {
            None => {
                self.keyframe = Some(self.make_keyframe(m.normals, self.world_rotation));
                RotationReport {
                    case_tag: None,
                    residual_deg: None,
                    fallback: None,
                    modes: 0,
                    coverage: 0,
                    keyframe: true,
                }
            }
            Some(kf) => {
                let modes = track_planes(&kf.normals, &m.normals, &self.config.planes).unwrap_or_default();
                let outcome = estimate_rotation(&modes, &self.config.rotation);
                if let RotationOutcome::Estimated(e) = &outcome {
                    self.world_rotation = orthonormalize(&(kf.world_rotation * e.rotation));
                }
                // on fallback the previous world rotation is held
                let cov = coverage(&modes);
                let refresh = rotation_keyframe_due(
                    modes.len(),
                    cov,
                    kf.initial_coverage,
                    self.config.pipeline.rotation_coverage_fraction,
                );
                if refresh {
                    self.keyframe = Some(self.make_keyframe(m.normals, self.world_rotation));
                }
                RotationReport {
                    case_tag: outcome.estimate().map(|e| e.case_tag),
                    residual_deg: outcome.estimate().map(|e| e.residual.to_degrees()),
                    fallback: match outcome {
                        RotationOutcome::Fallback(r) => Some(r),
                        RotationOutcome::Estimated(_) => None,
                    },
                    modes: modes.len(),
                    coverage: cov,
                    keyframe: refresh,
                }
            }
        };
        Msg::Frame(RotationMsg {
            frame_id: m.frame_id,
            frame: m.frame,
            cloud: m.cloud,
            world_rotation: self.world_rotation,
            rotation: report,
            normal_ms: m.normal_ms,
            rotation_ms: elapsed_ms(start),
        })
    }
}

fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    UnitQuaternion::from_matrix(r).to_rotation_matrix().into_inner()
}

struct TranslationKeyframe {
    key: KeyProjection,
    pose: PoseSE3,
}

pub struct TranslationStage {
    config: RunConfig,
    keyframe: Option<TranslationKeyframe>,
    last_translation: nalgebra::Vector3<f64>,
}

impl TranslationStage {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            keyframe: None,
            last_translation: nalgebra::Vector3::zeros(),
        }
    }

    fn make_keyframe(&self, m: &RotationMsg, pose: PoseSE3) -> Option<TranslationKeyframe> {
        // the keyframe is projected in its own camera frame
        let frame = project_axonometric(&m.cloud, &m.frame.intensity, &self.config.projection).ok()?;
        let key = KeyProjection::new(frame, &self.config.kcc).ok()?;
        Some(TranslationKeyframe { key, pose })
    }

    pub fn process(&mut self, msg: Msg<RotationMsg>) -> (Option<TimedPose>, FrameDiagnostics) {
        let m = match msg {
            Msg::Frame(m) => m,
            Msg::Skipped { frame_id, reason } => {
                return (
                    None,
                    FrameDiagnostics {
                        frame_id,
                        timestamp: None,
                        skipped: Some(reason),
                        rotation: None,
                        psr: None,
                        translation_fallback: None,
                        translation_keyframe: false,
                        normal_ms: 0.0,
                        rotation_ms: 0.0,
                        translation_ms: 0.0,
                    },
                )
            }
        };
        let start = Instant::now();
        let mut psr = None;
        let mut fallback = None;
        let translation = match &self.keyframe {
            None => self.last_translation,
            Some(kf) => {
                let r_key_cur = kf.pose.rotation_matrix().transpose() * m.world_rotation;
                let aligned = align_cloud(&m.cloud, &r_key_cur);
                match project_axonometric(&aligned, &m.frame.intensity, &self.config.projection) {
                    Err(e) => {
                        fallback = Some(e.to_string());
                        self.last_translation
                    }
                    Ok(cur) => match estimate_translation(&kf.key, &cur, &self.config.translation) {
                        Ok(est) => {
                            psr = Some(est.planar.psr);
                            kf.pose.rotation() * est.translation + kf.pose.translation()
                        }
                        Err(e) => {
                            fallback = Some(e.to_string());
                            self.last_translation
                        }
                    },
                }
            }
        };
        self.last_translation = translation;
        let pose = PoseSE3::from_rotation_matrix(&m.world_rotation, translation);
        let refresh = self.keyframe.is_none()
            || translation_keyframe_due(psr, self.config.translation.psr_keyframe_threshold);
        if refresh {
            if let Some(kf) = self.make_keyframe(&m, pose) {
                self.keyframe = Some(kf);
            }
        }
        let diag = FrameDiagnostics {
            frame_id: m.frame_id,
            timestamp: Some(m.frame.timestamp),
            skipped: None,
            rotation: Some(m.rotation),
            psr,
            translation_fallback: fallback.map(|f| f.replace(',', ";")),
            translation_keyframe: refresh,
            normal_ms: m.normal_ms,
            rotation_ms: m.rotation_ms,
            translation_ms: elapsed_ms(start),
        };
        (Some(TimedPose::new(m.frame.timestamp, pose)), diag)
    }
}

fn collect(out: &mut PipelineOutput, (pose, diag): (Option<TimedPose>, FrameDiagnostics)) {
    if let Some(p) = pose {
        out.trajectory.push(p);
    }
    log::debug!("{}", diag.csv_row(true));
    out.diagnostics.push(diag);
}

/// Runs the frontend over a time-ordered frame stream. Frames that fail to
/// decode are skipped and recorded in the diagnostics.
pub fn run_pipeline<I>(source: I, intrinsics: &CameraIntrinsics, config: &RunConfig) -> Result<PipelineOutput>
where
    I: IntoIterator<Item = Result<Frame>>,
    I::IntoIter: Send,
{
    config.validate()?;
    intrinsics.validate()?;
    let mut s1 = NormalStage::new(*intrinsics, config);
    let mut s2 = RotationStage::new(config);
    let mut s3 = TranslationStage::new(config);
    let mut out = PipelineOutput::default();
    let source = source.into_iter();

    if config.pipeline.single_thread {
        for (id, frame) in source.enumerate() {
            let result = s3.process(s2.process(s1.process(id as u64, frame)));
            collect(&mut out, result);
        }
        return Ok(out);
    }

    let cap = config.pipeline.channel_capacity;
    std::thread::scope(|scope| {
        let (tx1, rx1): (SyncSender<Msg<NormalsMsg>>, Receiver<_>) = sync_channel(cap);
        let (tx2, rx2): (SyncSender<Msg<RotationMsg>>, Receiver<_>) = sync_channel(cap);
        scope.spawn(move || {
            for (id, frame) in source.enumerate() {
                if tx1.send(s1.process(id as u64, frame)).is_err() {
                    break;
                }
            }
        });
        scope.spawn(move || {
            for msg in rx1 {
                if tx2.send(s2.process(msg)).is_err() {
                    break;
                }
            }
        });
        for msg in rx2 {
            collect(&mut out, s3.process(msg));
        }
    });
    Ok(out)
}
