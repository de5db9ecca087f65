//! Dense optical flow: a coarse-to-fine pyramidal least-squares estimator,
//! the keyframe-oriented bidirectional flow set, composition of per-step
//! flows into per-frame keyframe coordinate maps, and Middlebury `.flo` I/O.
//!
//! Flow semantics are forward flow from `src` to `dst` throughout:
//! `src(x) ≈ dst(x + d(x))`.

use crate::grid::Grid;
use crate::model::VideoSequence;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("keyframe index {k} out of range 0..={t_max}")]
    KeyframeOutOfRange { k: usize, t_max: usize },
    #[error("target dimensions must be at least 16x16, got {0}x{1}")]
    DegenerateTarget(usize, usize),
    #[error("bad .flo magic {0}")]
    BadMagic(f32),
    #[error("truncated .flo payload: expected {expected} floats, got {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("precomputed flow missing for pair {src}->{dst} in {dir}")]
    MissingPrecomputed {
        src: usize,
        dst: usize,
        dir: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Per-pixel displacement field from frame `src_index` to `dst_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Grid,
    pub v: Grid,
    pub src_index: usize,
    pub dst_index: usize,
}

impl FlowField {
    pub fn zeros(h: usize, w: usize, src_index: usize, dst_index: usize) -> Self {
        Self {
            u: Grid::zeros(h, w),
            v: Grid::zeros(h, w),
            src_index,
            dst_index,
        }
    }

    pub fn h(&self) -> usize {
        self.u.h()
    }

    pub fn w(&self) -> usize {
        self.u.w()
    }

    /// Maximum displacement magnitude over the field.
    pub fn max_magnitude(&self) -> f32 {
        self.u
            .data()
            .iter()
            .zip(self.v.data())
            .map(|(&u, &v)| (u * u + v * v).sqrt())
            .fold(0.0, f32::max)
    }
}

/// The keyframe-oriented flow collection: forward flows O_{t→t+1} for
/// t < k and backward flows O_{t→t−1} for t > k, |Φ| = T in total.
#[derive(Debug, Clone)]
pub struct FlowSet {
    pub keyframe_index: usize,
    pub forward: Vec<FlowField>,
    pub backward: Vec<FlowField>,
}

impl FlowSet {
    pub fn len(&self) -> usize {
        self.forward.len() + self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sub-pixel coordinate map C_{t→k}: where each frame-t pixel lands in
/// keyframe coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingField {
    pub x: Grid,
    pub y: Grid,
    pub frame_index: usize,
}

impl MappingField {
    pub fn identity(h: usize, w: usize, frame_index: usize) -> Self {
        Self {
            x: Grid::from_fn(h, w, |x, _| x as f32),
            y: Grid::from_fn(h, w, |_, y| y as f32),
            frame_index,
        }
    }

    /// Shift every target coordinate by a constant (dx, dy), clamped to bounds.
    pub fn constant_translation(h: usize, w: usize, dx: f32, dy: f32, frame_index: usize) -> Self {
        let xmax = (w - 1) as f32;
        let ymax = (h - 1) as f32;
        Self {
            x: Grid::from_fn(h, w, |x, _| (x as f32 + dx).clamp(0.0, xmax)),
            y: Grid::from_fn(h, w, |_, y| (y as f32 + dy).clamp(0.0, ymax)),
            frame_index,
        }
    }
}

/// Parameters for the built-in coarse-to-fine estimator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowParams {
    /// Number of pyramid levels (level 0 is full resolution).
    pub pyramid_levels: usize,
    /// Refinement iterations per level.
    pub iterations: usize,
    /// Half-width of the local least-squares window (radius 2 = 5×5).
    pub window_radius: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            iterations: 3,
            window_radius: 2,
        }
    }
}

/// Flow source: the built-in classical estimator or a directory of
/// precomputed `.flo` files named `flow_<src>_<dst>.flo`.
pub enum FlowProvider {
    ClassicalPyramidal(FlowParams),
    Precomputed(std::path::PathBuf),
}

impl FlowProvider {
    pub fn flow(
        &self,
        video: &VideoSequence,
        src: usize,
        dst: usize,
    ) -> Result<FlowField, FlowError> {
        match self {
            FlowProvider::ClassicalPyramidal(params) => {
                let a = video.frame(src).to_luma();
                let b = video.frame(dst).to_luma();
                let mut field = estimate_flow_gray(&a, &b, *params)?;
                field.src_index = src;
                field.dst_index = dst;
                Ok(field)
            }
            FlowProvider::Precomputed(dir) => {
                let path = dir.join(format!("flow_{src:05}_{dst:05}.flo"));
                if !path.exists() {
                    return Err(FlowError::MissingPrecomputed {
                        src,
                        dst,
                        dir: dir.display().to_string(),
                    });
                }
                let mut field = read_flo(&path)?;
                if field.h() != video.h() || field.w() != video.w() {
                    return Err(FlowError::DimensionMismatch(
                        field.h(),
                        field.w(),
                        video.h(),
                        video.w(),
                    ));
                }
                field.src_index = src;
                field.dst_index = dst;
                Ok(field)
            }
        }
    }
}

/// Bilinear-resample every frame to the target size; intensities stay in [0,1].
pub fn normalize_spatial(
    video: &VideoSequence,
    target_h: usize,
    target_w: usize,
) -> Result<VideoSequence, FlowError> {
    if target_h < 16 || target_w < 16 {
        return Err(FlowError::DegenerateTarget(target_h, target_w));
    }
    let frames = video
        .frames()
        .iter()
        .map(|f| f.resize_bilinear(target_h, target_w))
        .collect();
    Ok(video.with_frames(frames)?)
}

/// Dense forward flow between two frames (luma conversion applied
/// internally for multi-channel input).
pub fn estimate_flow(
    frame_a: &crate::model::Frame,
    frame_b: &crate::model::Frame,
    params: FlowParams,
) -> Result<FlowField, FlowError> {
    if frame_a.h() != frame_b.h() || frame_a.w() != frame_b.w() {
        return Err(FlowError::DimensionMismatch(
            frame_a.h(),
            frame_a.w(),
            frame_b.h(),
            frame_b.w(),
        ));
    }
    estimate_flow_gray(&frame_a.to_luma(), &frame_b.to_luma(), params)
}

fn blur_121(g: &Grid) -> Grid {
    // separable [1 2 1]/4, edge-clamped
    let (h, w) = (g.h(), g.w());
    let horiz = Grid::from_fn(h, w, |x, y| {
        let xm = x.saturating_sub(1);
        let xp = (x + 1).min(w - 1);
        0.25 * g.get(xm, y) + 0.5 * g.get(x, y) + 0.25 * g.get(xp, y)
    });
    Grid::from_fn(h, w, |x, y| {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        0.25 * horiz.get(x, ym) + 0.5 * horiz.get(x, y) + 0.25 * horiz.get(x, yp)
    })
}

fn downsample_half(g: &Grid) -> Grid {
    let blurred = blur_121(g);
    let (h, w) = (g.h().div_ceil(2), g.w().div_ceil(2));
    Grid::from_fn(h, w, |x, y| {
        blurred.sample((x * 2) as f32, (y * 2) as f32)
    })
}

fn build_pyramid(g: &Grid, levels: usize) -> Vec<Grid> {
    let mut pyr = vec![g.clone()];
    for _ in 1..levels {
        let last = pyr.last().unwrap();
        if last.h() < 16 || last.w() < 16 {
            break;
        }
        pyr.push(downsample_half(last));
    }
    pyr
}

/// Box sums over a (2r+1)² window via running sums per row then column.
fn window_sum(g: &Grid, r: usize) -> Grid {
    let (h, w) = (g.h(), g.w());
    let horiz = Grid::from_fn(h, w, |x, y| {
        let lo = x.saturating_sub(r);
        let hi = (x + r).min(w - 1);
        (lo..=hi).map(|xx| g.get(xx, y)).sum()
    });
    Grid::from_fn(h, w, |x, y| {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        (lo..=hi).map(|yy| horiz.get(x, yy)).sum()
    })
}

fn estimate_flow_gray(a: &Grid, b: &Grid, params: FlowParams) -> Result<FlowField, FlowError> {
    if a.h() != b.h() || a.w() != b.w() {
        return Err(FlowError::DimensionMismatch(a.h(), a.w(), b.h(), b.w()));
    }
    let levels = params.pyramid_levels.max(1);
    let pyr_a = build_pyramid(a, levels);
    let pyr_b = build_pyramid(b, levels);
    let depth = pyr_a.len().min(pyr_b.len());

    let mut u = Grid::zeros(pyr_a[depth - 1].h(), pyr_a[depth - 1].w());
    let mut v = u.clone();

    for level in (0..depth).rev() {
        let la = &pyr_a[level];
        let lb = &pyr_b[level];
        if u.h() != la.h() || u.w() != la.w() {
            let scale_x = la.w() as f32 / u.w() as f32;
            let scale_y = la.h() as f32 / u.h() as f32;
            u = u.resize_bilinear(la.h(), la.w());
            v = v.resize_bilinear(la.h(), la.w());
            u.data_mut().iter_mut().for_each(|x| *x *= scale_x);
            v.data_mut().iter_mut().for_each(|x| *x *= scale_y);
        }
        for _ in 0..params.iterations {
            let (du, dv) = lk_step(la, lb, &u, &v, params.window_radius);
            for i in 0..u.data().len() {
                u.data_mut()[i] += du.data()[i];
                v.data_mut()[i] += dv.data()[i];
            }
        }
    }
    Ok(FlowField {
        u,
        v,
        src_index: 0,
        dst_index: 1,
    })
}

/// One Lucas-Kanade refinement: warp `b` by the current flow, solve the
/// local 2×2 normal equations over the window, return the per-pixel update.
fn lk_step(a: &Grid, b: &Grid, u: &Grid, v: &Grid, radius: usize) -> (Grid, Grid) {
    let (h, w) = (a.h(), a.w());
    let warped = Grid::from_fn(h, w, |x, y| {
        b.sample(x as f32 + u.get(x, y), y as f32 + v.get(x, y))
    });
    // gradients of the average image, central differences
    let avg = Grid::from_fn(h, w, |x, y| 0.5 * (a.get(x, y) + warped.get(x, y)));
    let ix = Grid::from_fn(h, w, |x, y| {
        let xm = x.saturating_sub(1);
        let xp = (x + 1).min(w - 1);
        (avg.get(xp, y) - avg.get(xm, y)) / (xp - xm).max(1) as f32
    });
    let iy = Grid::from_fn(h, w, |x, y| {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        (avg.get(x, yp) - avg.get(x, ym)) / (yp - ym).max(1) as f32
    });
    let it = Grid::from_fn(h, w, |x, y| warped.get(x, y) - a.get(x, y));

    let prod = |p: &Grid, q: &Grid| {
        Grid::new(
            h,
            w,
            p.data().iter().zip(q.data()).map(|(&x, &y)| x * y).collect(),
        )
    };
    let sxx = window_sum(&prod(&ix, &ix), radius);
    let sxy = window_sum(&prod(&ix, &iy), radius);
    let syy = window_sum(&prod(&iy, &iy), radius);
    let sxt = window_sum(&prod(&ix, &it), radius);
    let syt = window_sum(&prod(&iy, &it), radius);

    let mut du = Grid::zeros(h, w);
    let mut dv = Grid::zeros(h, w);
    let step_cap = (radius as f32).max(1.0);
    du.data_mut()
        .par_iter_mut()
        .zip(dv.data_mut().par_iter_mut())
        .enumerate()
        .for_each(|(i, (du_i, dv_i))| {
            let (xx, xy, yy) = (sxx.data()[i], sxy.data()[i], syy.data()[i]);
            let (xt, yt) = (sxt.data()[i], syt.data()[i]);
            let det = xx * yy - xy * xy;
            let trace = xx + yy;
            // reject ill-conditioned windows (flat or single-orientation)
            if det > 1e-9 && trace > 1e-7 {
                *du_i = (-(yy * xt - xy * yt) / det).clamp(-step_cap, step_cap);
                *dv_i = (-(xx * yt - xy * xt) / det).clamp(-step_cap, step_cap);
            }
        });
    // smooth the update so untextured pixels inherit from neighbors
    (blur_121(&du), blur_121(&dv))
}

/// The Φ set: forward flows O_{t→t+1} for t = 0..k−1 and backward flows
/// O_{t→t−1} for t = k+1..T.
pub fn bidirectional_flow_set(
    video: &VideoSequence,
    k: usize,
    provider: &FlowProvider,
) -> Result<FlowSet, FlowError> {
    let t_max = video.t_max();
    if k > t_max {
        return Err(FlowError::KeyframeOutOfRange { k, t_max });
    }
    let forward = (0..k)
        .map(|t| provider.flow(video, t, t + 1))
        .collect::<Result<Vec<_>, _>>()?;
    let backward = (k + 1..=t_max)
        .map(|t| provider.flow(video, t, t - 1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FlowSet {
        keyframe_index: k,
        forward,
        backward,
    })
}

/// Compose the per-step flows of Φ into one coordinate map per frame.
///
/// C_{k→k} is the identity; for t < k, C_{t→k}(x) = C_{t+1→k}(x + O_{t→t+1}(x))
/// with bilinear sampling of the inner map; symmetric for t > k. Sampled
/// positions clamp to image bounds.
pub fn compose_to_keyframe(flows: &FlowSet) -> Vec<MappingField> {
    let k = flows.keyframe_index;
    let (h, w) = if let Some(f) = flows.forward.first().or(flows.backward.first()) {
        (f.h(), f.w())
    } else {
        // single-frame set: only the identity map exists
        (0, 0)
    };
    let t_count = flows.len() + 1;
    let mut maps: Vec<Option<MappingField>> = vec![None; t_count];
    let (h, w) = if h == 0 {
        (1, 1)
    } else {
        (h, w)
    };
    maps[k] = Some(MappingField::identity(h, w, k));

    // walk outward from the keyframe so the inner map always exists
    for t in (0..k).rev() {
        let inner = maps[t + 1].as_ref().unwrap();
        maps[t] = Some(compose_step(&flows.forward[t], inner, t));
    }
    for t in k + 1..t_count {
        let inner = maps[t - 1].as_ref().unwrap();
        maps[t] = Some(compose_step(&flows.backward[t - k - 1], inner, t));
    }
    maps.into_iter().map(|m| m.unwrap()).collect()
}

fn compose_step(step: &FlowField, inner: &MappingField, frame_index: usize) -> MappingField {
    let (h, w) = (step.h(), step.w());
    let xmax = (w - 1) as f32;
    let ymax = (h - 1) as f32;
    let mut mx = Grid::zeros(h, w);
    let mut my = Grid::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let px = x as f32 + step.u.get(x, y);
            let py = y as f32 + step.v.get(x, y);
            mx.set(x, y, inner.x.sample(px, py).clamp(0.0, xmax));
            my.set(x, y, inner.y.sample(px, py).clamp(0.0, ymax));
        }
    }
    MappingField {
        x: mx,
        y: my,
        frame_index,
    }
}

/// Read a Middlebury `.flo` file: magic float 202021.25, i32 width,
/// i32 height, then interleaved (u, v) f32 pairs row-major.
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let magic = f32::from_le_bytes(buf4);
    if magic != FLO_MAGIC {
        return Err(FlowError::BadMagic(magic));
    }
    r.read_exact(&mut buf4)?;
    let w = i32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4)?;
    let h = i32::from_le_bytes(buf4) as usize;
    let expected = h * w * 2;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() < expected * 4 {
        return Err(FlowError::TruncatedPayload {
            expected,
            found: raw.len() / 4,
        });
    }
    let mut u = Grid::zeros(h, w);
    let mut v = Grid::zeros(h, w);
    for i in 0..h * w {
        let uo = i * 8;
        u.data_mut()[i] = f32::from_le_bytes(raw[uo..uo + 4].try_into().unwrap());
        v.data_mut()[i] = f32::from_le_bytes(raw[uo + 4..uo + 8].try_into().unwrap());
    }
    Ok(FlowField {
        u,
        v,
        src_index: 0,
        dst_index: 1,
    })
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&FLO_MAGIC.to_le_bytes())?;
    w.write_all(&(flow.w() as i32).to_le_bytes())?;
    w.write_all(&(flow.h() as i32).to_le_bytes())?;
    for i in 0..flow.h() * flow.w() {
        w.write_all(&flow.u.data()[i].to_le_bytes())?;
        w.write_all(&flow.v.data()[i].to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Frame, InteractionKind, SensorKind, VideoSequence};

    fn textured_grid(h: usize, w: usize) -> Grid {
        Grid::from_fn(h, w, |x, y| {
            let xf = x as f32;
            let yf = y as f32;
            0.5 + 0.2 * (xf * 0.37).sin() * (yf * 0.23).cos()
                + 0.15 * (xf * 0.11 + yf * 0.19).sin()
        })
    }

    fn gray_video(grids: Vec<Grid>) -> VideoSequence {
        let frames = grids.iter().map(Frame::from_grid).collect();
        VideoSequence::new(
            frames,
            SensorKind::GelSightMini,
            "t",
            0,
            InteractionKind::Slide,
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn identical_frames_give_near_zero_flow() {
        let g = textured_grid(64, 64);
        let f = Frame::from_grid(&g);
        let flow = estimate_flow(&f, &f, FlowParams::default()).unwrap();
        assert!(flow.max_magnitude() < 0.1, "max={}", flow.max_magnitude());
    }

    #[test]
    fn translation_recovered_within_half_pixel() {
        let master = textured_grid(96, 96);
        let a = Grid::from_fn(64, 64, |x, y| master.sample(x as f32 + 8.0, y as f32 + 8.0));
        let b = Grid::from_fn(64, 64, |x, y| master.sample(x as f32 + 6.0, y as f32 + 8.0));
        // content of a at x matches b at x+2: forward flow (2, 0)
        let flow = estimate_flow(
            &Frame::from_grid(&a),
            &Frame::from_grid(&b),
            FlowParams::default(),
        )
        .unwrap();
        let margin = 8;
        let mut sum_u = 0.0f64;
        let mut sum_v = 0.0f64;
        let mut n = 0u32;
        for y in margin..64 - margin {
            for x in margin..64 - margin {
                sum_u += flow.u.get(x, y) as f64;
                sum_v += flow.v.get(x, y) as f64;
                n += 1;
            }
        }
        let mu = sum_u / n as f64;
        let mv = sum_v / n as f64;
        assert!(
            ((mu - 2.0).powi(2) + mv.powi(2)).sqrt() < 0.5,
            "mean flow ({mu}, {mv})"
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Frame::from_grid(&textured_grid(32, 32));
        let b = Frame::from_grid(&textured_grid(32, 48));
        assert!(matches!(
            estimate_flow(&a, &b, FlowParams::default()),
            Err(FlowError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn flow_set_counts_match_union_bounds() {
        let g = textured_grid(32, 32);
        let video = gray_video(vec![g.clone(); 9]);
        let provider = FlowProvider::ClassicalPyramidal(FlowParams::default());
        let set = bidirectional_flow_set(&video, 4, &provider).unwrap();
        assert_eq!(set.forward.len(), 4);
        assert_eq!(set.backward.len(), 4);
        assert_eq!(set.len(), 8);
        for (t, f) in set.forward.iter().enumerate() {
            assert_eq!((f.src_index, f.dst_index), (t, t + 1));
        }
        for (i, f) in set.backward.iter().enumerate() {
            let t = 5 + i;
            assert_eq!((f.src_index, f.dst_index), (t, t - 1));
        }

        let set0 = bidirectional_flow_set(&video, 0, &provider).unwrap();
        assert_eq!(set0.forward.len(), 0);
        assert_eq!(set0.backward.len(), 8);

        assert!(matches!(
            bidirectional_flow_set(&video, 9, &provider),
            Err(FlowError::KeyframeOutOfRange { .. })
        ));
    }

    #[test]
    fn static_video_flows_near_zero() {
        let g = textured_grid(32, 32);
        let video = gray_video(vec![g.clone(); 5]);
        let provider = FlowProvider::ClassicalPyramidal(FlowParams::default());
        let set = bidirectional_flow_set(&video, 2, &provider).unwrap();
        for f in set.forward.iter().chain(&set.backward) {
            assert!(f.max_magnitude() < 0.1);
        }
    }

    #[test]
    fn compose_zero_flows_is_identity() {
        let zero = |s, d| FlowField::zeros(16, 16, s, d);
        let set = FlowSet {
            keyframe_index: 2,
            forward: vec![zero(0, 1), zero(1, 2)],
            backward: vec![zero(3, 2), zero(4, 3)],
        };
        let maps = compose_to_keyframe(&set);
        assert_eq!(maps.len(), 5);
        for (t, m) in maps.iter().enumerate() {
            assert_eq!(m.frame_index, t);
            let id = MappingField::identity(16, 16, t);
            assert_eq!(m.x, id.x);
            assert_eq!(m.y, id.y);
        }
    }

    #[test]
    fn compose_constant_steps_accumulates() {
        // per-step flow (+1, 0), k = 2: C_{0->2}(x) = x + (2, 0) in the interior
        let step = |s, d| FlowField {
            u: Grid::filled(16, 16, 1.0),
            v: Grid::zeros(16, 16),
            src_index: s,
            dst_index: d,
        };
        let set = FlowSet {
            keyframe_index: 2,
            forward: vec![step(0, 1), step(1, 2)],
            backward: vec![],
        };
        let maps = compose_to_keyframe(&set);
        for y in 2..14 {
            for x in 2..12 {
                assert!((maps[0].x.get(x, y) - (x as f32 + 2.0)).abs() < 1e-4);
                assert!((maps[0].y.get(x, y) - y as f32).abs() < 1e-4);
            }
        }
        // t = k is identity regardless of the flows
        let id = MappingField::identity(16, 16, 2);
        assert_eq!(maps[2].x, id.x);
    }

    #[test]
    fn flo_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.flo");
        let flow = FlowField {
            u: Grid::from_fn(6, 8, |x, y| (x as f32 * 1.7 - y as f32 * 0.3).sin() * 5.0),
            v: Grid::from_fn(6, 8, |x, y| (y as f32 * 2.1 + x as f32).cos() * 3.0),
            src_index: 0,
            dst_index: 1,
        };
        write_flo(&flow, &p).unwrap();
        let back = read_flo(&p).unwrap();
        assert_eq!(flow.u, back.u);
        assert_eq!(flow.v, back.v);
    }

    #[test]
    fn flo_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0.0f32.to_le_bytes());
        bytes.extend_from_slice(&8i32.to_le_bytes());
        bytes.extend_from_slice(&6i32.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_flo(&p), Err(FlowError::BadMagic(_))));

        let p2 = dir.path().join("trunc.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        bytes.extend_from_slice(&8i32.to_le_bytes());
        bytes.extend_from_slice(&6i32.to_le_bytes());
        for _ in 0..(8 * 6 * 2 - 10) {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        std::fs::write(&p2, &bytes).unwrap();
        assert!(matches!(
            read_flo(&p2),
            Err(FlowError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn normalize_spatial_contract() {
        let g = Grid::filled(64, 64, 0.42);
        let video = gray_video(vec![g.clone(), g.clone(), g]);
        // identity resize returns identical frames
        let same = normalize_spatial(&video, 64, 64).unwrap();
        assert_eq!(same.frames(), video.frames());
        // constant stays constant
        let small = normalize_spatial(&video, 32, 32).unwrap();
        for f in small.frames() {
            assert!(f.data().iter().all(|&v| (v - 0.42).abs() < 1e-6));
        }
        assert!(matches!(
            normalize_spatial(&video, 8, 32),
            Err(FlowError::DegenerateTarget(..))
        ));
    }
}
