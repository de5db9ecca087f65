//! Domain types shared by every pipeline stage: video sequences, sensor and
//! interaction enums, tactile attribute annotations, the dataset manifest,
//! and video I/O (frame directories and raw tensor files).

use crate::grid::Grid;
use crate::tensorfile::{TensorFile, TensorFileError};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("inconsistent frame dimensions: frame {index} is {found_h}x{found_w}x{found_c}, expected {h}x{w}x{c}")]
    InconsistentDimensions {
        index: usize,
        found_h: usize,
        found_w: usize,
        found_c: usize,
        h: usize,
        w: usize,
        c: usize,
    },
    #[error("failed to decode {path}: {reason}")]
    DecodeFailure { path: PathBuf, reason: String },
    #[error("write failure at {path}: {reason}")]
    WriteFailure { path: PathBuf, reason: String },
    #[error("video needs at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("tensor file error: {0}")]
    Tensor(#[from] TensorFileError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    GelSightMini,
    Digit,
    Tac3D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Press,
    Rotate,
    Slide,
    Mixed,
}

/// One H×W×C frame with intensities in [0, 1], channel-interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), h * w * c, "frame payload does not match h*w*c");
        Self { h, w, c, data }
    }

    pub fn from_grid(g: &Grid) -> Self {
        Self::new(g.h(), g.w(), 1, g.data().to_vec())
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, ch: usize) -> f32 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    /// Luma conversion: single-channel frames pass through, RGB uses the
    /// Rec.601 weights, anything else averages channels.
    pub fn to_luma(&self) -> Grid {
        Grid::from_fn(self.h, self.w, |x, y| match self.c {
            1 => self.get(x, y, 0),
            3 => {
                0.299 * self.get(x, y, 0) + 0.587 * self.get(x, y, 1) + 0.114 * self.get(x, y, 2)
            }
            c => (0..c).map(|ch| self.get(x, y, ch)).sum::<f32>() / c as f32,
        })
    }

    /// Per-channel bilinear resize, endpoint-aligned (see [`Grid::resize_bilinear`]).
    pub fn resize_bilinear(&self, th: usize, tw: usize) -> Frame {
        let channels: Vec<Grid> = (0..self.c)
            .map(|ch| {
                Grid::from_fn(self.h, self.w, |x, y| self.get(x, y, ch)).resize_bilinear(th, tw)
            })
            .collect();
        let mut data = Vec::with_capacity(th * tw * self.c);
        for y in 0..th {
            for x in 0..tw {
                for g in &channels {
                    data.push(g.get(x, y).clamp(0.0, 1.0));
                }
            }
        }
        Frame::new(th, tw, self.c, data)
    }
}

/// An ordered recording V = {I_0 .. I_T}; T+1 frames of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    pub sensor: SensorKind,
    pub object_id: String,
    pub region_id: u32,
    pub interaction: InteractionKind,
    pub fps: f32,
}

impl VideoSequence {
    pub fn new(
        frames: Vec<Frame>,
        sensor: SensorKind,
        object_id: impl Into<String>,
        region_id: u32,
        interaction: InteractionKind,
        fps: f32,
    ) -> Result<Self, ModelError> {
        if frames.len() < 3 {
            return Err(ModelError::TooFewFrames(frames.len()));
        }
        let (h, w, c) = (frames[0].h, frames[0].w, frames[0].c);
        for (index, f) in frames.iter().enumerate() {
            if (f.h, f.w, f.c) != (h, w, c) {
                return Err(ModelError::InconsistentDimensions {
                    index,
                    found_h: f.h,
                    found_w: f.w,
                    found_c: f.c,
                    h,
                    w,
                    c,
                });
            }
        }
        Ok(Self {
            frames,
            sensor,
            object_id: object_id.into(),
            region_id,
            interaction,
            fps,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t]
    }

    /// Number of frames, T+1.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The paper's T: last frame index for frames 0..=T.
    pub fn t_max(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn h(&self) -> usize {
        self.frames[0].h
    }

    pub fn w(&self) -> usize {
        self.frames[0].w
    }

    pub fn c(&self) -> usize {
        self.frames[0].c
    }

    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self, ModelError> {
        Self::new(
            frames,
            self.sensor,
            self.object_id.clone(),
            self.region_id,
            self.interaction,
            self.fps,
        )
    }
}

/// Three-level scales for the four tactile attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HardnessLevel {
    HighlyDeformable,
    ModeratelyDeformable,
    ExtremelyHard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtrusionLevel {
    Absent,
    Moderate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElasticityLevel {
    None,
    Moderate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrictionLevel {
    Slight,
    Moderate,
    Strong,
}

/// Four-attribute, three-level label record for one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TactileAnnotation {
    pub object_id: String,
    pub hardness: HardnessLevel,
    pub protrusion: ProtrusionLevel,
    pub elasticity: ElasticityLevel,
    pub friction: FrictionLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video: String,
    pub object_id: String,
    pub region_id: u32,
    pub sensor: SensorKind,
    pub interaction: InteractionKind,
    pub annotation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            entries,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| ModelError::ManifestParse(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(ModelError::MissingPath(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| ModelError::ManifestParse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Finding {
    MissingAnnotation {
        object_id: String,
    },
    Duplicate {
        object_id: String,
        region_id: u32,
        sensor: SensorKind,
        interaction: InteractionKind,
    },
    UnresolvablePath {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

/// Checks a manifest against an annotation list: every referenced object
/// must be annotated, (object, region, sensor, interaction) rows must be
/// unique, and video paths (resolved against `base`, if given) must exist.
pub fn validate_manifest(
    manifest: &Manifest,
    annotations: &[TactileAnnotation],
    base: Option<&Path>,
) -> ValidationReport {
    let annotated: HashSet<&str> = annotations.iter().map(|a| a.object_id.as_str()).collect();
    let mut findings = Vec::new();
    let mut seen = HashSet::new();
    for entry in &manifest.entries {
        if !annotated.contains(entry.object_id.as_str()) {
            findings.push(Finding::MissingAnnotation {
                object_id: entry.object_id.clone(),
            });
        }
        let key = (
            entry.object_id.clone(),
            entry.region_id,
            entry.sensor,
            entry.interaction,
        );
        if !seen.insert(key) {
            findings.push(Finding::Duplicate {
                object_id: entry.object_id.clone(),
                region_id: entry.region_id,
                sensor: entry.sensor,
                interaction: entry.interaction,
            });
        }
        if let Some(base) = base {
            let p = base.join(&entry.video);
            if !p.exists() {
                findings.push(Finding::UnresolvablePath {
                    path: entry.video.clone(),
                });
            }
        }
    }
    ValidationReport {
        ok: findings.is_empty(),
        findings,
    }
}

/// On-disk layout for a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoLayout {
    /// Directory of `frame_%05d.png` files.
    FrameDirectory,
    /// One f32 TensorFile of shape (T+1, H, W, C).
    TensorFile,
}

/// Metadata to attach when loading a video from disk; the formats
/// themselves carry only pixels.
#[derive(Debug, Clone)]
pub struct VideoMeta {
    pub sensor: SensorKind,
    pub object_id: String,
    pub region_id: u32,
    pub interaction: InteractionKind,
    pub fps: f32,
}

impl Default for VideoMeta {
    fn default() -> Self {
        Self {
            sensor: SensorKind::GelSightMini,
            object_id: String::new(),
            region_id: 0,
            interaction: InteractionKind::Mixed,
            fps: 30.0,
        }
    }
}

fn frame_file_name(t: usize) -> String {
    format!("frame_{t:05}.png")
}

pub fn load_video(
    path: impl AsRef<Path>,
    layout: VideoLayout,
    meta: &VideoMeta,
) -> Result<VideoSequence, ModelError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ModelError::MissingPath(path.to_path_buf()));
    }
    let frames = match layout {
        VideoLayout::FrameDirectory => {
            let mut frames = Vec::new();
            loop {
                let fp = path.join(frame_file_name(frames.len()));
                if !fp.exists() {
                    break;
                }
                frames.push(load_png_frame(&fp)?);
            }
            frames
        }
        VideoLayout::TensorFile => {
            let tensor = TensorFile::load(path)?;
            let (shape, data): (&[usize], Vec<f32>) = match &tensor {
                TensorFile::F32 { shape, data } => (shape, data.clone()),
                TensorFile::U8 { shape, data } => {
                    (shape, data.iter().map(|&v| v as f32 / 255.0).collect())
                }
            };
            if shape.len() != 4 {
                return Err(ModelError::DecodeFailure {
                    path: path.to_path_buf(),
                    reason: format!("expected 4-d (T,H,W,C) tensor, got {shape:?}"),
                });
            }
            let (t, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
            data.chunks_exact(h * w * c)
                .take(t)
                .map(|chunk| {
                    Frame::new(h, w, c, chunk.iter().map(|v| v.clamp(0.0, 1.0)).collect())
                })
                .collect()
        }
    };
    VideoSequence::new(
        frames,
        meta.sensor,
        meta.object_id.clone(),
        meta.region_id,
        meta.interaction,
        meta.fps,
    )
}

pub fn save_video(
    video: &VideoSequence,
    path: impl AsRef<Path>,
    layout: VideoLayout,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    match layout {
        VideoLayout::FrameDirectory => {
            fs::create_dir_all(path)?;
            for (t, frame) in video.frames().iter().enumerate() {
                save_png_frame(frame, &path.join(frame_file_name(t)))?;
            }
        }
        VideoLayout::TensorFile => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut data = Vec::with_capacity(video.len() * video.h() * video.w() * video.c());
            for frame in video.frames() {
                data.extend_from_slice(frame.data());
            }
            TensorFile::F32 {
                shape: vec![video.len(), video.h(), video.w(), video.c()],
                data,
            }
            .save(path)?;
        }
    }
    Ok(())
}

fn load_png_frame(path: &Path) -> Result<Frame, ModelError> {
    let img = image::open(path).map_err(|e| ModelError::DecodeFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let (h, w) = (img.height() as usize, img.width() as usize);
    match img {
        image::DynamicImage::ImageLuma8(buf) => Ok(Frame::new(
            h,
            w,
            1,
            buf.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        )),
        other => {
            let rgb = other.to_rgb8();
            Ok(Frame::new(
                h,
                w,
                3,
                rgb.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
            ))
        }
    }
}

/// Write a single frame as an 8-bit PNG (grayscale or RGB).
pub fn save_png_frame(frame: &Frame, path: &Path) -> Result<(), ModelError> {
    let quantize = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let result = match frame.c() {
        1 => {
            let buf: Vec<u8> = frame.data().iter().map(|&v| quantize(v)).collect();
            image::GrayImage::from_raw(frame.w() as u32, frame.h() as u32, buf)
                .expect("buffer sized to frame")
                .save(path)
        }
        3 => {
            let buf: Vec<u8> = frame.data().iter().map(|&v| quantize(v)).collect();
            image::RgbImage::from_raw(frame.w() as u32, frame.h() as u32, buf)
                .expect("buffer sized to frame")
                .save(path)
        }
        c => {
            return Err(ModelError::WriteFailure {
                path: path.to_path_buf(),
                reason: format!("unsupported channel count {c} for PNG frames"),
            })
        }
    };
    result.map_err(|e| ModelError::WriteFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_frame(h: usize, w: usize, v: f32) -> Frame {
        Frame::new(h, w, 1, vec![v; h * w])
    }

    fn video(frames: Vec<Frame>) -> VideoSequence {
        VideoSequence::new(
            frames,
            SensorKind::GelSightMini,
            "obj",
            0,
            InteractionKind::Press,
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn inconsistent_dimensions_rejected() {
        let frames = vec![
            gray_frame(64, 64, 0.5),
            gray_frame(32, 32, 0.5),
            gray_frame(64, 64, 0.5),
        ];
        let err = VideoSequence::new(
            frames,
            SensorKind::Digit,
            "o",
            0,
            InteractionKind::Slide,
            30.0,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InconsistentDimensions { .. }));
    }

    #[test]
    fn too_few_frames_rejected() {
        let err = VideoSequence::new(
            vec![gray_frame(8, 8, 0.0)],
            SensorKind::Digit,
            "o",
            0,
            InteractionKind::Slide,
            30.0,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::TooFewFrames(1)));
    }

    #[test]
    fn tensor_layout_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.vtf");
        let frames: Vec<Frame> = (0..9)
            .map(|t| {
                Frame::new(
                    32,
                    32,
                    3,
                    (0..32 * 32 * 3)
                        .map(|i| ((i + t * 31) % 256) as f32 / 255.0)
                        .collect(),
                )
            })
            .collect();
        let v = video(frames);
        save_video(&v, &p, VideoLayout::TensorFile).unwrap();
        let meta = VideoMeta {
            object_id: "obj".into(),
            interaction: InteractionKind::Press,
            ..VideoMeta::default()
        };
        let back = load_video(&p, VideoLayout::TensorFile, &meta).unwrap();
        assert_eq!(v.frames(), back.frames());
        assert_eq!(back.len(), 9);
        assert_eq!((back.h(), back.w(), back.c()), (32, 32, 3));
    }

    #[test]
    fn frame_directory_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..3)
            .map(|t| {
                Frame::new(
                    16,
                    16,
                    1,
                    (0..256).map(|i| ((i * (t + 1)) % 256) as f32 / 255.0).collect(),
                )
            })
            .collect();
        let v = video(frames);
        save_video(&v, dir.path(), VideoLayout::FrameDirectory).unwrap();
        assert!(dir.path().join("frame_00002.png").exists());
        let back = load_video(dir.path(), VideoLayout::FrameDirectory, &VideoMeta::default())
            .unwrap();
        assert_eq!(back.len(), 3);
        let max_err = v
            .frames()
            .iter()
            .zip(back.frames())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 255.0 + 1e-6, "max_err={max_err}");
    }

    #[test]
    fn load_missing_path_errors() {
        let err = load_video("/nonexistent/xyz", VideoLayout::TensorFile, &VideoMeta::default())
            .unwrap_err();
        assert!(matches!(err, ModelError::MissingPath(_)));
    }

    #[test]
    fn validate_manifest_findings() {
        let manifest = Manifest::new(vec![
            ManifestEntry {
                video: "a.vtf".into(),
                object_id: "apple".into(),
                region_id: 0,
                sensor: SensorKind::GelSightMini,
                interaction: InteractionKind::Press,
                annotation: "apple".into(),
            },
            ManifestEntry {
                video: "b.vtf".into(),
                object_id: "apple".into(),
                region_id: 0,
                sensor: SensorKind::GelSightMini,
                interaction: InteractionKind::Press,
                annotation: "apple".into(),
            },
            ManifestEntry {
                video: "c.vtf".into(),
                object_id: "ghost".into(),
                region_id: 1,
                sensor: SensorKind::Digit,
                interaction: InteractionKind::Slide,
                annotation: "ghost".into(),
            },
        ]);
        let annotations = vec![TactileAnnotation {
            object_id: "apple".into(),
            hardness: HardnessLevel::ExtremelyHard,
            protrusion: ProtrusionLevel::Absent,
            elasticity: ElasticityLevel::None,
            friction: FrictionLevel::Slight,
        }];
        let report = validate_manifest(&manifest, &annotations, None);
        assert!(!report.ok);
        let dupes = report
            .findings
            .iter()
            .filter(|f| matches!(f, Finding::Duplicate { .. }))
            .count();
        let missing = report
            .findings
            .iter()
            .filter(|f| matches!(f, Finding::MissingAnnotation { .. }))
            .count();
        assert_eq!(dupes, 1);
        assert_eq!(missing, 1);
        // pure function: identical inputs, identical report
        assert_eq!(report, validate_manifest(&manifest, &annotations, None));
    }

    #[test]
    fn validate_manifest_ok_case() {
        let manifest = Manifest::new(vec![ManifestEntry {
            video: "a.vtf".into(),
            object_id: "apple".into(),
            region_id: 0,
            sensor: SensorKind::GelSightMini,
            interaction: InteractionKind::Press,
            annotation: "apple".into(),
        }]);
        let annotations = vec![TactileAnnotation {
            object_id: "apple".into(),
            hardness: HardnessLevel::ExtremelyHard,
            protrusion: ProtrusionLevel::Absent,
            elasticity: ElasticityLevel::None,
            friction: FrictionLevel::Slight,
        }];
        assert!(validate_manifest(&manifest, &annotations, None).ok);
    }
}
