//! Keyframe selection and the Gaussian-mixture keyframe mask.
//!
//! The mask places N = ⌈α·H·W/β²⌉ Gaussian kernels at stratified jittered
//! sampling points and clamps their sum to 1, giving a continuous-valued
//! map in [0, 1]. Value 1 means "masked (hidden from the encoder)".

use crate::grid::Grid;
use crate::model::VideoSequence;
use crate::tensorfile::TensorFile;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("keyframe selection needs at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Continuous per-pixel mask in [0, 1] attached to one frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMap {
    pub values: Grid,
    pub frame_index: usize,
}

impl MaskMap {
    pub fn to_tensor(&self) -> TensorFile {
        TensorFile::F32 {
            shape: vec![self.values.h(), self.values.w()],
            data: self.values.data().to_vec(),
        }
    }

    /// 16-bit binary PGM (P5, maxval 65535), value = round(65535·m).
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<(), MaskError> {
        let (h, w) = (self.values.h(), self.values.w());
        let mut out = Vec::with_capacity(32 + h * w * 2);
        write!(out, "P5\n{w} {h}\n65535\n")?;
        for &v in self.values.data() {
            let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Keyframe selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyframeStrategy {
    /// ⌊T/2⌋ for frames 0..=T (lower median for even counts).
    Middle,
    /// argmax_t mean |I_t − I_0|, ties broken by the smaller index.
    MaxContact,
}

pub fn select_keyframe(
    video: &VideoSequence,
    strategy: KeyframeStrategy,
) -> Result<usize, MaskError> {
    if video.len() < 3 {
        return Err(MaskError::TooFewFrames(video.len()));
    }
    match strategy {
        KeyframeStrategy::Middle => Ok(video.t_max() / 2),
        KeyframeStrategy::MaxContact => {
            let first = video.frame(0);
            let mut best = (0usize, f64::NEG_INFINITY);
            for t in 0..video.len() {
                let score: f64 = video
                    .frame(t)
                    .data()
                    .iter()
                    .zip(first.data())
                    .map(|(&a, &b)| (a - b).abs() as f64)
                    .sum::<f64>()
                    / first.data().len() as f64;
                if score > best.1 {
                    best = (t, score);
                }
            }
            Ok(best.0)
        }
    }
}

/// Sampling-point configuration: density α, grid size β, kernel scale λ.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingConfig {
    pub alpha: f64,
    pub beta: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(alpha: f64, beta: usize, lambda: f64, seed: u64) -> Result<Self, MaskError> {
        let cfg = Self {
            alpha,
            beta,
            lambda,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MaskError::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.beta < 2 {
            return Err(MaskError::InvalidConfig(format!(
                "beta must be >= 2, got {}",
                self.beta
            )));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(MaskError::InvalidConfig(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Default kernel scale for a grid size: λ = β/2.
    pub fn default_lambda(beta: usize) -> f64 {
        beta as f64 / 2.0
    }

    pub fn point_count(&self, h: usize, w: usize) -> usize {
        (self.alpha * (h * w) as f64 / (self.beta * self.beta) as f64).ceil() as usize
    }
}

/// A sampling point at integer pixel coordinates (stored as floats).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f32,
    pub y: f32,
}

/// Stratified jittered sampling: partition the frame into ⌈H/β⌉×⌈W/β⌉
/// cells, shuffle them with the seed, take the first N, and place one point
/// uniformly at random on the integer pixels of each cell.
pub fn sample_points(h: usize, w: usize, cfg: &SamplingConfig) -> Result<Vec<SamplePoint>, MaskError> {
    cfg.validate()?;
    let n = cfg.point_count(h, w);
    let cells_y = h.div_ceil(cfg.beta);
    let cells_x = w.div_ceil(cfg.beta);
    let mut cells: Vec<(usize, usize)> = (0..cells_y)
        .flat_map(|cy| (0..cells_x).map(move |cx| (cy, cx)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    cells.shuffle(&mut rng);
    let mut points = Vec::with_capacity(n);
    for &(cy, cx) in cells.iter().take(n) {
        let y0 = cy * cfg.beta;
        let x0 = cx * cfg.beta;
        let y1 = ((cy + 1) * cfg.beta).min(h);
        let x1 = ((cx + 1) * cfg.beta).min(w);
        let py = rng.gen_range(y0..y1);
        let px = rng.gen_range(x0..x1);
        points.push(SamplePoint {
            x: px as f32,
            y: py as f32,
        });
    }
    debug_assert_eq!(points.len(), n);
    Ok(points)
}

/// M'_k(x,y) = min(1, Σ_i exp(−((x−p_ix)² + (y−p_iy)²) / (2λ²))).
///
/// The clamp makes the value exactly 1 at every sampling point.
pub fn gaussian_mask(h: usize, w: usize, points: &[SamplePoint], lambda: f64) -> MaskMap {
    assert!(!points.is_empty(), "gaussian_mask needs at least one point");
    assert!(lambda > 0.0);
    let inv_two_lambda_sq = 1.0 / (2.0 * lambda * lambda);
    let values = Grid::from_fn(h, w, |x, y| {
        let mut sum = 0.0f64;
        for p in points {
            let dx = x as f64 - p.x as f64;
            let dy = y as f64 - p.y as f64;
            sum += (-(dx * dx + dy * dy) * inv_two_lambda_sq).exp();
            if sum >= 1.0 {
                break;
            }
        }
        sum.min(1.0) as f32
    });
    MaskMap {
        values,
        frame_index: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Frame, InteractionKind, SensorKind};

    fn cfg(alpha: f64, beta: usize, seed: u64) -> SamplingConfig {
        SamplingConfig::new(alpha, beta, SamplingConfig::default_lambda(beta), seed).unwrap()
    }

    #[test]
    fn point_count_formula() {
        assert_eq!(cfg(0.25, 16, 0).point_count(224, 224), 49);
        assert_eq!(cfg(0.5, 16, 0).point_count(32, 32), 2);
    }

    #[test]
    fn sample_points_deterministic_per_seed() {
        let c = cfg(0.25, 16, 7);
        let a = sample_points(224, 224, &c).unwrap();
        let b = sample_points(224, 224, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 49);
        let c2 = cfg(0.25, 16, 8);
        let other = sample_points(224, 224, &c2).unwrap();
        assert_eq!(other.len(), 49);
        assert_ne!(a, other);
        for p in &a {
            assert!(p.y >= 0.0 && (p.y as usize) < 224);
            assert!(p.x >= 0.0 && (p.x as usize) < 224);
        }
    }

    #[test]
    fn gaussian_mask_closed_form_values() {
        let points = vec![SamplePoint { x: 8.0, y: 8.0 }];
        let m = gaussian_mask(16, 16, &points, 4.0);
        assert_eq!(m.values.get(8, 8), 1.0);
        // exp(-16/32) = exp(-0.5)
        let expect = (-0.5f64).exp() as f32;
        assert!((m.values.get(12, 8) - expect).abs() < 1e-6);
        assert!((m.values.get(8, 12) - expect).abs() < 1e-6);
    }

    #[test]
    fn coincident_points_stay_clamped() {
        let points = vec![SamplePoint { x: 5.0, y: 5.0 }; 2];
        let m = gaussian_mask(12, 12, &points, 3.0);
        assert!(m.values.max() <= 1.0);
        assert_eq!(m.values.get(5, 5), 1.0);
    }

    #[test]
    fn mask_is_one_at_every_sample_point() {
        let c = cfg(0.3, 8, 42);
        let pts = sample_points(48, 64, &c).unwrap();
        let m = gaussian_mask(48, 64, &pts, c.lambda);
        for p in &pts {
            assert_eq!(m.values.get(p.x as usize, p.y as usize), 1.0);
        }
        assert!(m.values.min() >= 0.0 && m.values.max() <= 1.0);
    }

    #[test]
    fn adding_a_point_never_decreases_mask() {
        let mut pts = sample_points(32, 32, &cfg(0.3, 8, 1)).unwrap();
        let before = gaussian_mask(32, 32, &pts, 4.0);
        pts.push(SamplePoint { x: 1.0, y: 30.0 });
        let after = gaussian_mask(32, 32, &pts, 4.0);
        for (a, b) in before.values.data().iter().zip(after.values.data()) {
            assert!(b >= a);
        }
    }

    #[test]
    fn mask_permutation_invariant_and_lambda_monotone() {
        let pts = sample_points(32, 32, &cfg(0.4, 8, 3)).unwrap();
        let mut rev = pts.clone();
        rev.reverse();
        let a = gaussian_mask(32, 32, &pts, 4.0);
        let b = gaussian_mask(32, 32, &rev, 4.0);
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            assert!((x - y).abs() < 1e-6);
        }
        let small = gaussian_mask(32, 32, &pts, 2.0);
        let large = gaussian_mask(32, 32, &pts, 6.0);
        assert!(large.values.mean() >= small.values.mean());
    }

    #[test]
    fn select_keyframe_middle() {
        let mk = |n: usize| {
            let frames = vec![Frame::new(8, 8, 1, vec![0.1; 64]); n];
            VideoSequence::new(
                frames,
                SensorKind::GelSightMini,
                "o",
                0,
                InteractionKind::Press,
                30.0,
            )
            .unwrap()
        };
        assert_eq!(select_keyframe(&mk(9), KeyframeStrategy::Middle).unwrap(), 4);
        assert_eq!(select_keyframe(&mk(8), KeyframeStrategy::Middle).unwrap(), 3);
    }

    #[test]
    fn select_keyframe_max_contact_peak() {
        // activity profile peaks at frame 5 of 9
        let profile = [0.0, 0.1, 0.2, 0.35, 0.5, 0.8, 0.5, 0.3, 0.1];
        let frames: Vec<Frame> = profile
            .iter()
            .map(|&p| Frame::new(8, 8, 1, vec![p; 64]))
            .collect();
        let v = VideoSequence::new(
            frames,
            SensorKind::GelSightMini,
            "o",
            0,
            InteractionKind::Press,
            30.0,
        )
        .unwrap();
        assert_eq!(select_keyframe(&v, KeyframeStrategy::MaxContact).unwrap(), 5);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SamplingConfig::new(1.5, 16, 8.0, 0).is_err());
        assert!(SamplingConfig::new(0.5, 1, 8.0, 0).is_err());
        assert!(SamplingConfig::new(0.5, 16, 0.0, 0).is_err());
    }
}
