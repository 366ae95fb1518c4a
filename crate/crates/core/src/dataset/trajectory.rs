//! TUM trajectory text format: `timestamp tx ty tz qx qy qz qw` per line,
//! `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::PoseSE3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedPose {
    pub timestamp: f64,
    pub pose: PoseSE3,
}

impl TimedPose {
    pub fn new(timestamp: f64, pose: PoseSE3) -> Self {
        Self { timestamp, pose }
    }
}

pub type Trajectory = Vec<TimedPose>;

/// At most nine decimals, trailing zeros trimmed; `-0` prints as `0`.
pub fn format_number(x: f64) -> String {
    // shortest round-trip form when it is already short enough
    let shortest = format!("{x}");
    let decimals = shortest.split_once('.').map_or(0, |(_, d)| d.len());
    let mut s = if decimals <= 9 { shortest } else { format!("{x:.9}") };
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn format_pose_line(tp: &TimedPose) -> String {
    let t = tp.pose.translation();
    let q = tp.pose.rotation().quaternion();
    let fields = [tp.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w];
    let mut line = String::new();
    for (k, v) in fields.iter().enumerate() {
        if k > 0 {
            line.push(' ');
        }
        line.push_str(&format_number(*v));
    }
    line
}

pub fn trajectory_to_string(traj: &[TimedPose]) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for tp in traj {
        let _ = writeln!(out, "{}", format_pose_line(tp));
    }
    out
}

pub fn write_trajectory(traj: &[TimedPose], path: &Path) -> Result<()> {
    std::fs::write(path, trajectory_to_string(traj)).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

/// `origin` only labels errors.
pub fn parse_trajectory(text: &str, origin: &Path) -> Result<Trajectory> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            reason,
        };
        let values = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| err(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let q = [values[4], values[5], values[6], values[7]];
        let qn = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        // files written with few decimals are accepted and renormalized
        if (qn - 1.0).abs() > 1e-3 {
            return Err(err(format!("quaternion norm {qn} is not 1")));
        }
        let pose = PoseSE3::from_quaternion_xyzw(q, Vector3::new(values[1], values[2], values[3]))
            .map_err(|e| err(e.to_string()))?;
        if let Some(prev) = out.last().map(|p: &TimedPose| p.timestamp) {
            if values[0] < prev {
                return Err(err(format!("timestamp {} precedes {}", values[0], prev)));
            }
        }
        out.push(TimedPose::new(values[0], pose));
    }
    Ok(out)
}
