//! Backward warping of the keyframe mask to every frame, binarization to
//! tubelet-level token masks, the tube-masking baseline, and a leakage
//! metric that quantifies how recoverable masked tubelets are from visible
//! temporally adjacent neighbors.

use crate::flow::MappingField;
use crate::keyframe::MaskMap;
use crate::model::VideoSequence;
use crate::tensorfile::TensorFile;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("mapping dimensions {0}x{1} do not match mask {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("mask ratio must be in (0,1), got {0}")]
    BadRatio(f64),
}

/// Tubelet geometry: `t_patch` frames by `p`×`p` pixels per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TubeletGeometry {
    pub t_patch: usize,
    pub p: usize,
}

impl Default for TubeletGeometry {
    fn default() -> Self {
        Self { t_patch: 2, p: 16 }
    }
}

impl TubeletGeometry {
    /// (temporal, rows, cols) token grid for a video; frame counts not
    /// divisible by `t_patch` are truncated at the tail.
    pub fn grid(&self, frame_count: usize, h: usize, w: usize) -> Result<(usize, usize, usize), PropagateError> {
        if self.t_patch == 0 || self.p == 0 {
            return Err(PropagateError::GeometryMismatch(
                "t_patch and p must be positive".into(),
            ));
        }
        if !h.is_multiple_of(self.p) || !w.is_multiple_of(self.p) {
            return Err(PropagateError::GeometryMismatch(format!(
                "{h}x{w} frames are not divisible by patch size {}",
                self.p
            )));
        }
        let t_grid = frame_count / self.t_patch;
        if t_grid == 0 {
            return Err(PropagateError::GeometryMismatch(format!(
                "{frame_count} frames cannot fill one {}-frame tubelet",
                self.t_patch
            )));
        }
        Ok((t_grid, h / self.p, w / self.p))
    }
}

/// Boolean token grid over (temporal, row, col) tubelets; `true` = masked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    pub bits: Vec<bool>,
    pub t_grid: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TokenMask {
    #[inline]
    pub fn idx(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.rows + i) * self.cols + j
    }

    #[inline]
    pub fn is_masked(&self, t: usize, i: usize, j: usize) -> bool {
        self.bits[self.idx(t, i, j)]
    }

    pub fn total(&self) -> usize {
        self.bits.len()
    }

    pub fn masked_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Achieved masked fraction.
    pub fn ratio(&self) -> f64 {
        self.masked_count() as f64 / self.total() as f64
    }

    pub fn to_tensor(&self) -> TensorFile {
        TensorFile::U8 {
            shape: vec![self.t_grid, self.rows, self.cols],
            data: self.bits.iter().map(|&b| b as u8).collect(),
        }
    }

    /// JSON sidecar describing the token grid.
    pub fn sidecar(&self, geom: TubeletGeometry, rho: f64) -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "t_patch": geom.t_patch,
            "p": geom.p,
            "t_grid": self.t_grid,
            "rows": self.rows,
            "cols": self.cols,
            "rho": rho,
            "masked": self.masked_count(),
            "total": self.total(),
        })
    }
}

/// Warp the keyframe mask to every frame: M_t(x) = bilinear(M'_k, C_{t→k}(x)).
///
/// The keyframe's own mapping is the identity, so M_k reproduces M'_k
/// bit-exactly; all outputs stay in [0, 1].
pub fn propagate_mask(
    keyframe_mask: &MaskMap,
    mappings: &[MappingField],
) -> Result<Vec<MaskMap>, PropagateError> {
    let (h, w) = (keyframe_mask.values.h(), keyframe_mask.values.w());
    let mut out = Vec::with_capacity(mappings.len());
    for m in mappings {
        if m.x.h() != h || m.x.w() != w {
            return Err(PropagateError::DimensionMismatch(m.x.h(), m.x.w(), h, w));
        }
        let values = crate::grid::Grid::from_fn(h, w, |x, y| {
            keyframe_mask
                .values
                .sample(m.x.get(x, y), m.y.get(x, y))
                .clamp(0.0, 1.0)
        });
        out.push(MaskMap {
            values,
            frame_index: m.frame_index,
        });
    }
    Ok(out)
}

/// Binarize the continuous per-frame masks into a token mask: score each
/// tubelet by the mean mask value over its pixels and frames, then mask the
/// round(ρ·K) highest-scoring tubelets, ties broken by (temporal, row, col)
/// lexicographic order.
pub fn binarize_tokens(
    masks: &[MaskMap],
    geom: TubeletGeometry,
    rho: f64,
) -> Result<TokenMask, PropagateError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(PropagateError::BadRatio(rho));
    }
    if masks.is_empty() {
        return Err(PropagateError::GeometryMismatch("no masks".into()));
    }
    let (h, w) = (masks[0].values.h(), masks[0].values.w());
    let (t_grid, rows, cols) = geom.grid(masks.len(), h, w)?;

    let mut scores = vec![0.0f64; t_grid * rows * cols];
    let norm = (geom.t_patch * geom.p * geom.p) as f64;
    for (ti, chunk) in masks.chunks_exact(geom.t_patch).take(t_grid).enumerate() {
        for mask in chunk {
            for i in 0..rows {
                for j in 0..cols {
                    let mut s = 0.0f64;
                    for y in i * geom.p..(i + 1) * geom.p {
                        for x in j * geom.p..(j + 1) * geom.p {
                            s += mask.values.get(x, y) as f64;
                        }
                    }
                    scores[(ti * rows + i) * cols + j] += s;
                }
            }
        }
    }
    for s in &mut scores {
        *s /= norm;
    }

    let total = scores.len();
    let target = (rho * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    // highest score first; equal scores keep lexicographic (t, i, j) order
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut bits = vec![false; total];
    for &i in order.iter().take(target) {
        bits[i] = true;
    }
    Ok(TokenMask {
        bits,
        t_grid,
        rows,
        cols,
    })
}

/// Tube-masking baseline: one random spatial mask at ratio ρ replicated
/// across every temporal index.
pub fn tube_mask(
    geom: TubeletGeometry,
    frame_count: usize,
    h: usize,
    w: usize,
    rho: f64,
    seed: u64,
) -> Result<TokenMask, PropagateError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(PropagateError::BadRatio(rho));
    }
    let (t_grid, rows, cols) = geom.grid(frame_count, h, w)?;
    let spatial = rows * cols;
    let target = (rho * spatial as f64).round() as usize;
    let mut cells: Vec<usize> = (0..spatial).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);
    let mut spatial_bits = vec![false; spatial];
    for &c in cells.iter().take(target) {
        spatial_bits[c] = true;
    }
    let mut bits = Vec::with_capacity(t_grid * spatial);
    for _ in 0..t_grid {
        bits.extend_from_slice(&spatial_bits);
    }
    Ok(TokenMask {
        bits,
        t_grid,
        rows,
        cols,
    })
}

/// Leakage report: the share of masked tubelets recoverable from a visible
/// co-located tubelet within the temporal window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub leak_fraction: f64,
    pub per_frame: Vec<f64>,
    pub tau: f64,
    pub window: usize,
    pub masked_total: usize,
    pub recoverable: usize,
}

/// A masked tubelet (t, i, j) counts as recoverable iff some visible
/// tubelet (t', i, j) with 0 < |t' − t| ≤ w has mean absolute pixel
/// difference < τ against it.
pub fn leakage(
    video: &VideoSequence,
    token_mask: &TokenMask,
    geom: TubeletGeometry,
    tau: f64,
    w: usize,
) -> Result<LeakageReport, PropagateError> {
    assert!(tau > 0.0, "tau must be positive");
    assert!(w >= 1, "window must be >= 1");
    let (t_grid, rows, cols) = geom.grid(video.len(), video.h(), video.w())?;
    if (t_grid, rows, cols) != (token_mask.t_grid, token_mask.rows, token_mask.cols) {
        return Err(PropagateError::GeometryMismatch(format!(
            "token mask grid {}x{}x{} does not match video grid {t_grid}x{rows}x{cols}",
            token_mask.t_grid, token_mask.rows, token_mask.cols
        )));
    }

    let mut masked_total = 0usize;
    let mut recoverable = 0usize;
    let mut per_frame_masked = vec![0usize; t_grid];
    let mut per_frame_recov = vec![0usize; t_grid];

    for t in 0..t_grid {
        for i in 0..rows {
            for j in 0..cols {
                if !token_mask.is_masked(t, i, j) {
                    continue;
                }
                masked_total += 1;
                per_frame_masked[t] += 1;
                let lo = t.saturating_sub(w);
                let hi = (t + w).min(t_grid - 1);
                let hit = (lo..=hi).any(|tn| {
                    tn != t
                        && !token_mask.is_masked(tn, i, j)
                        && tubelet_mad(video, geom, t, tn, i, j) < tau
                });
                if hit {
                    recoverable += 1;
                    per_frame_recov[t] += 1;
                }
            }
        }
    }

    let per_frame = per_frame_masked
        .iter()
        .zip(&per_frame_recov)
        .map(|(&m, &r)| if m == 0 { 0.0 } else { r as f64 / m as f64 })
        .collect();
    Ok(LeakageReport {
        leak_fraction: if masked_total == 0 {
            0.0
        } else {
            recoverable as f64 / masked_total as f64
        },
        per_frame,
        tau,
        window: w,
        masked_total,
        recoverable,
    })
}

/// Mean absolute difference between two co-located tubelets.
fn tubelet_mad(
    video: &VideoSequence,
    geom: TubeletGeometry,
    ta: usize,
    tb: usize,
    i: usize,
    j: usize,
) -> f64 {
    let c = video.c();
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for dt in 0..geom.t_patch {
        let fa = video.frame(ta * geom.t_patch + dt);
        let fb = video.frame(tb * geom.t_patch + dt);
        for y in i * geom.p..(i + 1) * geom.p {
            for x in j * geom.p..(j + 1) * geom.p {
                for ch in 0..c {
                    sum += (fa.get(x, y, ch) - fb.get(x, y, ch)).abs() as f64;
                    count += 1;
                }
            }
        }
    }
    sum / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::keyframe::{gaussian_mask, SamplePoint};
    use crate::model::{Frame, InteractionKind, SensorKind};

    fn mask_of(h: usize, w: usize) -> MaskMap {
        let points = vec![
            SamplePoint { x: 10.0, y: 12.0 },
            SamplePoint { x: 22.0, y: 6.0 },
        ];
        gaussian_mask(h, w, &points, 4.0)
    }

    fn static_video(frames: usize, h: usize, w: usize, value: f32) -> VideoSequence {
        VideoSequence::new(
            vec![Frame::new(h, w, 1, vec![value; h * w]); frames],
            SensorKind::GelSightMini,
            "o",
            0,
            InteractionKind::Press,
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_mapping_reproduces_keyframe_mask_bit_exact() {
        let m = mask_of(32, 32);
        let mappings: Vec<MappingField> =
            (0..4).map(|t| MappingField::identity(32, 32, t)).collect();
        let warped = propagate_mask(&m, &mappings).unwrap();
        for wmask in &warped {
            assert_eq!(wmask.values, m.values);
        }
    }

    #[test]
    fn constant_translation_shifts_mask() {
        let m = mask_of(32, 32);
        let mapping = MappingField::constant_translation(32, 32, 3.0, 0.0, 0);
        let warped = propagate_mask(&m, &[mapping]).unwrap();
        // frame-t pixel x samples keyframe at x+3: mask appears shifted by -3
        let mut total_err = 0.0f64;
        let mut n = 0usize;
        for y in 2..30 {
            for x in 2..27 {
                total_err += (warped[0].values.get(x, y) - m.values.get(x + 3, y)).abs() as f64;
                n += 1;
            }
        }
        assert!(total_err / n as f64 <= 1e-5);
    }

    #[test]
    fn fully_out_of_bounds_mapping_clamps_to_edge() {
        let m = mask_of(32, 32);
        let mapping = MappingField {
            x: Grid::filled(32, 32, 1000.0),
            y: Grid::filled(32, 32, 7.0),
            frame_index: 0,
        };
        // constant_translation clamps coordinates itself; build raw and rely
        // on sample clamping instead
        let warped = propagate_mask(&m, &[mapping]).unwrap();
        let edge = m.values.get(31, 7);
        assert!(warped[0]
            .values
            .data()
            .iter()
            .all(|&v| (v - edge).abs() < 1e-7));
    }

    #[test]
    fn propagate_dimension_mismatch() {
        let m = mask_of(32, 32);
        let mapping = MappingField::identity(16, 16, 0);
        assert!(matches!(
            propagate_mask(&m, &[mapping]),
            Err(PropagateError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn binarize_counts_and_tiebreak() {
        let geom = TubeletGeometry { t_patch: 2, p: 16 };
        let ones = MaskMap {
            values: Grid::filled(224, 224, 1.0),
            frame_index: 0,
        };
        let masks = vec![ones; 16];
        let tm = binarize_tokens(&masks, geom, 0.5).unwrap();
        assert_eq!(tm.total(), 1568);
        assert_eq!(tm.masked_count(), 784);
        // degenerate scores: tie-break selects the lexicographically first 784
        assert!(tm.bits[..784].iter().all(|&b| b));
        assert!(tm.bits[784..].iter().all(|&b| !b));

        let tm9 = binarize_tokens(&masks, geom, 0.9).unwrap();
        assert_eq!(tm9.masked_count(), 1411);
    }

    #[test]
    fn binarize_left_half_concentration() {
        let geom = TubeletGeometry { t_patch: 2, p: 16 };
        let half = MaskMap {
            values: Grid::from_fn(64, 64, |x, _| if x < 32 { 1.0 } else { 0.0 }),
            frame_index: 0,
        };
        let masks = vec![half; 4];
        let tm = binarize_tokens(&masks, geom, 0.25).unwrap();
        for t in 0..tm.t_grid {
            for i in 0..tm.rows {
                for j in 0..tm.cols {
                    if tm.is_masked(t, i, j) {
                        assert!(j < 2, "masked token at column {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn tube_mask_replicates_and_counts() {
        let geom = TubeletGeometry { t_patch: 2, p: 16 };
        let tm = tube_mask(geom, 16, 224, 224, 0.75, 3).unwrap();
        assert_eq!(tm.rows * tm.cols, 196);
        for t in 1..tm.t_grid {
            for i in 0..tm.rows {
                for j in 0..tm.cols {
                    assert_eq!(tm.is_masked(t, i, j), tm.is_masked(0, i, j));
                }
            }
        }
        let per_slice: usize = (0..tm.rows)
            .flat_map(|i| (0..tm.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| tm.is_masked(0, i, j))
            .count();
        assert_eq!(per_slice, 147);

        let again = tube_mask(geom, 16, 224, 224, 0.75, 3).unwrap();
        assert_eq!(tm, again);
        let other = tube_mask(geom, 16, 224, 224, 0.75, 4).unwrap();
        assert_ne!(tm, other);
        assert_eq!(other.masked_count(), tm.masked_count());
    }

    #[test]
    fn leakage_zero_under_tube_mask_on_static_video() {
        let geom = TubeletGeometry { t_patch: 2, p: 8 };
        let video = static_video(8, 32, 32, 0.5);
        let tm = tube_mask(geom, 8, 32, 32, 0.5, 1).unwrap();
        let report = leakage(&video, &tm, geom, 0.05, 1).unwrap();
        assert_eq!(report.leak_fraction, 0.0);
    }

    #[test]
    fn leakage_matches_brute_force_enumeration() {
        // static video, independent per-frame random mask on a 4x4x4 grid:
        // a masked cell leaks iff any temporal neighbor is visible.
        let geom = TubeletGeometry { t_patch: 2, p: 8 };
        let video = static_video(8, 32, 32, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut bits = vec![false; 4 * 4 * 4];
        let mut order: Vec<usize> = (0..64).collect();
        order.shuffle(&mut rng);
        for &i in order.iter().take(32) {
            bits[i] = true;
        }
        let tm = TokenMask {
            bits: bits.clone(),
            t_grid: 4,
            rows: 4,
            cols: 4,
        };
        let report = leakage(&video, &tm, geom, 0.05, 1).unwrap();

        // independent enumeration oracle over the small grid
        let idx = |t: usize, i: usize, j: usize| (t * 4 + i) * 4 + j;
        let mut masked = 0;
        let mut recov = 0;
        for t in 0..4usize {
            for i in 0..4 {
                for j in 0..4 {
                    if !bits[idx(t, i, j)] {
                        continue;
                    }
                    masked += 1;
                    let mut hit = false;
                    if t > 0 && !bits[idx(t - 1, i, j)] {
                        hit = true;
                    }
                    if t < 3 && !bits[idx(t + 1, i, j)] {
                        hit = true;
                    }
                    if hit {
                        recov += 1;
                    }
                }
            }
        }
        assert_eq!(report.masked_total, masked);
        assert_eq!(report.recoverable, recov);
        assert!((report.leak_fraction - recov as f64 / masked as f64).abs() < 1e-12);
    }

    #[test]
    fn leakage_monotone_in_window() {
        let geom = TubeletGeometry { t_patch: 2, p: 8 };
        let video = static_video(12, 32, 32, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let total = 6 * 4 * 4;
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        let mut bits = vec![false; total];
        for &i in order.iter().take(total * 3 / 4) {
            bits[i] = true;
        }
        let tm = TokenMask {
            bits,
            t_grid: 6,
            rows: 4,
            cols: 4,
        };
        let l1 = leakage(&video, &tm, geom, 0.05, 1).unwrap();
        let l3 = leakage(&video, &tm, geom, 0.05, 3).unwrap();
        assert!(l3.leak_fraction >= l1.leak_fraction);
        // shrinking tau can only reduce leakage
        let tiny = leakage(&video, &tm, geom, 1e-9, 1).unwrap();
        assert!(tiny.leak_fraction <= l1.leak_fraction);
    }

    #[test]
    fn geometry_rules() {
        let geom = TubeletGeometry { t_patch: 2, p: 16 };
        // tail truncation: 17 frames -> 8 temporal tokens
        assert_eq!(geom.grid(17, 224, 224).unwrap().0, 8);
        assert!(geom.grid(16, 220, 224).is_err());
        assert!(matches!(
            binarize_tokens(
                &[MaskMap {
                    values: Grid::zeros(32, 32),
                    frame_index: 0
                }],
                TubeletGeometry { t_patch: 2, p: 16 },
                1.5
            ),
            Err(PropagateError::BadRatio(_))
        ));
    }
}
