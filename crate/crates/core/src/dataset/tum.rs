//! TUM / ICL-NUIM style sequences on disk: 8-bit color PNGs, 16-bit depth
//! PNGs, an association list and a small TOML manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::{format_number, read_trajectory, write_trajectory, TimedPose, Trajectory};
use super::Frame;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, DEFAULT_MAX_RANGE};
use crate::grid::Grid;

/// Column order of an association line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationOrder {
    /// `t_rgb rgb_path t_depth depth_path` (TUM `associate.py`).
    #[default]
    RgbDepth,
    /// `t_depth depth_path t_rgb rgb_path` (ICL-NUIM distribution).
    DepthRgb,
}

/// The on-disk manifest. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub associations: PathBuf,
    #[serde(default)]
    pub association_order: AssociationOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groundtruth: Option<PathBuf>,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    pub intrinsics: CameraIntrinsics,
}

fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE
}

#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    /// Frame timestamp (the color image's), seconds.
    pub timestamp: f64,
    pub color: PathBuf,
    pub depth: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceManifest {
    pub root: PathBuf,
    pub entries: Vec<Association>,
    pub intrinsics: CameraIntrinsics,
    pub max_range: f64,
    pub groundtruth: Option<PathBuf>,
}

impl SequenceManifest {
    /// Parses the manifest and its association list, and checks that every
    /// referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ManifestFile =
            toml::from_str(&text).map_err(|e| Error::load(path, e.to_string()))?;
        file.intrinsics.validate()?;
        if !(file.max_range > 0.0) {
            return Err(Error::config("max_range", "must be > 0"));
        }
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let assoc_path = root.join(&file.associations);
        let entries = read_associations(&assoc_path, &root, file.association_order)?;
        for e in &entries {
            for p in [&e.color, &e.depth] {
                if !p.is_file() {
                    return Err(Error::load(p, "referenced file does not exist"));
                }
            }
        }
        let groundtruth = file.groundtruth.map(|g| root.join(g));
        if let Some(g) = &groundtruth {
            if !g.is_file() {
                return Err(Error::load(g, "ground-truth trajectory does not exist"));
            }
        }
        Ok(Self {
            root,
            entries,
            intrinsics: file.intrinsics,
            max_range: file.max_range,
            groundtruth,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load_groundtruth(&self) -> Result<Option<Trajectory>> {
        self.groundtruth.as_deref().map(read_trajectory).transpose()
    }

    pub fn load_frame(&self, index: usize) -> Result<Frame> {
        let e = &self.entries[index];
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let raw = read_depth_png(&e.depth)?;
        check_size(&e.depth, &raw, w, h)?;
        let intensity = read_color_png(&e.color)?;
        check_size(&e.color, &intensity, w, h)?;
        Ok(Frame {
            timestamp: e.timestamp,
            intensity,
            depth: DepthImage::from_raw_u16(&raw, self.intrinsics.depth_scale, self.max_range),
        })
    }

    /// Frames in association order, decoded lazily.
    pub fn frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        (0..self.entries.len()).map(move |i| self.load_frame(i))
    }
}

/// Loads a manifest; frames are decoded as the returned sequence is iterated.
pub fn load_sequence(manifest: &Path) -> Result<SequenceManifest> {
    SequenceManifest::load(manifest)
}

fn check_size<T>(path: &Path, g: &Grid<T>, w: usize, h: usize) -> Result<()> {
    if g.width() != w || g.height() != h {
        return Err(Error::load(
            path,
            format!("image is {}x{}, intrinsics say {w}x{h}", g.width(), g.height()),
        ));
    }
    Ok(())
}

pub fn read_associations(path: &Path, root: &Path, order: AssociationOrder) -> Result<Vec<Association>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<Association> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let stamp = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| err(format!("bad timestamp {s:?}")))
        };
        let (t_rgb, rgb, depth) = match order {
            AssociationOrder::RgbDepth => (stamp(f[0])?, f[1], f[3]),
            AssociationOrder::DepthRgb => (stamp(f[2])?, f[3], f[1]),
        };
        stamp(if order == AssociationOrder::RgbDepth { f[2] } else { f[0] })?;
        if let Some(prev) = out.last() {
            if t_rgb <= prev.timestamp {
                return Err(err(format!("timestamp {t_rgb} is not after {}", prev.timestamp)));
            }
        }
        out.push(Association {
            timestamp: t_rgb,
            color: root.join(rgb),
            depth: root.join(depth),
        });
    }
    if out.is_empty() {
        return Err(Error::load(path, "association list is empty"));
    }
    Ok(out)
}

/// Luma of an 8-bit RGB triple, in [0, 1].
#[inline]
pub fn luma_rgb8(r: u8, g: u8, b: u8) -> f32 {
    (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
}

fn open_png(path: &Path) -> Result<(png::Reader<BufReader<File>>, Vec<u8>, png::OutputInfo)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::load(path, format!("PNG decode failed: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::load(path, "PNG too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::load(path, format!("PNG decode failed: {e}")))?;
    buf.truncate(info.buffer_size());
    Ok((reader, buf, info))
}

/// Raw 16-bit depth units. Anything but 16-bit grayscale is rejected.
pub fn read_depth_png(path: &Path) -> Result<Grid<u16>> {
    let (_, buf, info) = open_png(path)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::load(
            path,
            format!(
                "depth must be 16-bit grayscale, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let data = buf
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok(Grid::from_vec(info.width as usize, info.height as usize, data))
}

/// 8-bit gray, gray+alpha, RGB or RGBA, converted to luma in [0, 1].
pub fn read_color_png(path: &Path) -> Result<Grid<f32>> {
    let (_, buf, info) = open_png(path)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::load(
            path,
            format!("color must be 8-bit, found {:?}", info.bit_depth),
        ));
    }
    let data: Vec<f32> = match info.color_type {
        png::ColorType::Grayscale => buf.iter().map(|&g| luma_rgb8(g, g, g)).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| luma_rgb8(p[0], p[0], p[0])).collect(),
        png::ColorType::Rgb => buf.chunks_exact(3).map(|p| luma_rgb8(p[0], p[1], p[2])).collect(),
        png::ColorType::Rgba => buf.chunks_exact(4).map(|p| luma_rgb8(p[0], p[1], p[2])).collect(),
        other => {
            return Err(Error::load(path, format!("unsupported color type {other:?}")));
        }
    };
    Ok(Grid::from_vec(info.width as usize, info.height as usize, data))
}

fn write_png(path: &Path, w: usize, h: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.set_compression(png::Compression::Fast);
    let to_io = |e: png::EncodingError| Error::load(path, format!("PNG encode failed: {e}"));
    let mut writer = enc.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub fn write_depth_png(path: &Path, raw: &Grid<u16>) -> Result<()> {
    let bytes: Vec<u8> = raw.as_slice().iter().flat_map(|d| d.to_be_bytes()).collect();
    write_png(path, raw.width(), raw.height(), png::ColorType::Grayscale, png::BitDepth::Sixteen, &bytes)
}

pub fn write_gray_as_rgb_png(path: &Path, gray: &Grid<u8>) -> Result<()> {
    let bytes: Vec<u8> = gray.as_slice().iter().flat_map(|&g| [g, g, g]).collect();
    write_png(path, gray.width(), gray.height(), png::ColorType::Rgb, png::BitDepth::Eight, &bytes)
}

/// One frame in sensor units, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFrame {
    pub timestamp: f64,
    pub gray: Grid<u8>,
    pub depth: Grid<u16>,
}

impl RawFrame {
    /// The frame exactly as `load_sequence` would decode it.
    pub fn to_frame(&self, intrinsics: &CameraIntrinsics, max_range: f64) -> Frame {
        Frame {
            timestamp: self.timestamp,
            intensity: self.gray.map(|&g| luma_rgb8(g, g, g)),
            depth: DepthImage::from_raw_u16(&self.depth, intrinsics.depth_scale, max_range),
        }
    }
}

/// Incrementally writes a TUM-layout directory: `rgb/`, `depth/`,
/// `associations.txt`, optional `groundtruth.txt`, `manifest.toml`.
pub struct SequenceWriter {
    root: PathBuf,
    intrinsics: CameraIntrinsics,
    max_range: f64,
    lines: String,
    groundtruth: Trajectory,
}

impl SequenceWriter {
    pub fn create(root: &Path, intrinsics: CameraIntrinsics, max_range: f64) -> Result<Self> {
        for sub in ["rgb", "depth"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            intrinsics,
            max_range,
            lines: String::from("# t_rgb rgb t_depth depth\n"),
            groundtruth: Vec::new(),
        })
    }

    pub fn push(&mut self, frame: &RawFrame, pose: Option<&TimedPose>) -> Result<()> {
        let stamp = format_number(frame.timestamp);
        let rgb = format!("rgb/{stamp}.png");
        let depth = format!("depth/{stamp}.png");
        write_gray_as_rgb_png(&self.root.join(&rgb), &frame.gray)?;
        write_depth_png(&self.root.join(&depth), &frame.depth)?;
        self.lines.push_str(&format!("{stamp} {rgb} {stamp} {depth}\n"));
        if let Some(p) = pose {
            self.groundtruth.push(*p);
        }
        Ok(())
    }

    /// Writes the association list, ground truth and manifest; returns the
    /// manifest path.
    pub fn finish(self) -> Result<PathBuf> {
        let assoc = self.root.join("associations.txt");
        std::fs::write(&assoc, &self.lines).map_err(|e| Error::io(&assoc, e))?;
        let groundtruth = if self.groundtruth.is_empty() {
            None
        } else {
            write_trajectory(&self.groundtruth, &self.root.join("groundtruth.txt"))?;
            Some(PathBuf::from("groundtruth.txt"))
        };
        let manifest = ManifestFile {
            associations: "associations.txt".into(),
            association_order: AssociationOrder::RgbDepth,
            groundtruth,
            max_range: self.max_range,
            intrinsics: self.intrinsics,
        };
        let path = self.root.join("manifest.toml");
        let text = toml::to_string(&manifest).map_err(|e| Error::load(&path, e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
