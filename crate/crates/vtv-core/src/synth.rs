//! Synthetic visuo-tactile sequences with analytic ground-truth flow.
//!
//! Three interaction kinds mirror the capture protocol: pressing (a
//! radially growing bright contact blob), rotation about the frame center,
//! and sliding (global translation). Frames are rendered by bilinear
//! sampling of a band-limited textured master image so flow estimators see
//! gradient structure; translation and rotation ground truth is analytic.

use crate::flow::FlowField;
use crate::grid::Grid;
use crate::model::{Frame, InteractionKind, ModelError, SensorKind, VideoSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Interaction recipe for one fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionSpec {
    pub kind: SynthKind,
    /// Pixels per frame for Slide, degrees per frame for Rotate, maximum
    /// contact radius in pixels for Press.
    pub amplitude: f64,
    pub frames: usize,
    pub texture_seed: u64,
    /// Ramp-up / plateau / ramp-down fractions of the contact profile; must
    /// sum to 1.
    pub contact_profile: (f64, f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Press,
    Rotate,
    Slide,
}

impl InteractionSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.frames < 3 {
            return Err(format!("frames must be >= 3, got {}", self.frames));
        }
        if self.amplitude < 0.0 {
            return Err(format!("amplitude must be >= 0, got {}", self.amplitude));
        }
        let (a, b, c) = self.contact_profile;
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(format!("contact profile fractions must sum to 1, got {:?}", self.contact_profile));
        }
        Ok(())
    }

    pub fn slide(amplitude: f64, frames: usize, texture_seed: u64) -> Self {
        Self {
            kind: SynthKind::Slide,
            amplitude,
            frames,
            texture_seed,
            contact_profile: (0.5, 0.0, 0.5),
        }
    }

    pub fn rotate(deg_per_frame: f64, frames: usize, texture_seed: u64) -> Self {
        Self {
            kind: SynthKind::Rotate,
            amplitude: deg_per_frame,
            frames,
            texture_seed,
            contact_profile: (0.5, 0.0, 0.5),
        }
    }

    pub fn press(max_radius: f64, frames: usize, texture_seed: u64) -> Self {
        Self {
            kind: SynthKind::Press,
            amplitude: max_radius,
            frames,
            texture_seed,
            contact_profile: (0.5, 0.0, 0.5),
        }
    }

    fn interaction_kind(&self) -> InteractionKind {
        match self.kind {
            SynthKind::Press => InteractionKind::Press,
            SynthKind::Rotate => InteractionKind::Rotate,
            SynthKind::Slide => InteractionKind::Slide,
        }
    }

    /// Piecewise-linear contact profile in [0, 1] over the frame index.
    pub fn profile_value(&self, t: usize) -> f64 {
        let (up, plateau, _down) = self.contact_profile;
        let total = (self.frames - 1) as f64;
        if total == 0.0 {
            return 1.0;
        }
        let s = t as f64 / total;
        if s < up {
            if up == 0.0 {
                1.0
            } else {
                s / up
            }
        } else if s <= up + plateau {
            1.0
        } else {
            let down = 1.0 - up - plateau;
            if down == 0.0 {
                1.0
            } else {
                ((1.0 - s) / down).max(0.0)
            }
        }
    }
}

/// Band-limited texture: a sum of 8 random-phase sinusoids, scaled into
/// [0.2, 0.8].
fn texture(h: usize, w: usize, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            let freq = rng.gen_range(0.05..0.35);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(0.5..1.0);
            (freq * angle.cos(), freq * angle.sin(), phase, amp)
        })
        .collect();
    // two fixed high-frequency carriers with incommensurate wavelengths and
    // strong horizontal components: they guarantee that any shift of a few
    // pixels changes local content everywhere, so no region of the texture
    // is flat at patch scale
    for &(freq, angle_deg, amp) in &[(1.166_f64, 10.0_f64, 2.0_f64), (1.02, -30.0, 2.0)] {
        let a = angle_deg.to_radians();
        waves.push((
            freq * a.cos(),
            freq * a.sin(),
            rng.gen_range(0.0..std::f64::consts::TAU),
            amp,
        ));
    }
    let raw = Grid::from_fn(h, w, |x, y| {
        waves
            .iter()
            .map(|&(kx, ky, phase, amp)| amp * (kx * x as f64 + ky * y as f64 + phase).sin())
            .sum::<f64>() as f32
    });
    let (lo, hi) = (raw.min(), raw.max());
    let span = (hi - lo).max(1e-6);
    Grid::from_fn(h, w, |x, y| 0.2 + 0.6 * (raw.get(x, y) - lo) / span)
}

/// Generate a sequence and its per-adjacent-pair ground-truth forward
/// flows (frame t → t+1).
pub fn synth_sequence(
    spec: &InteractionSpec,
    h: usize,
    w: usize,
) -> Result<(VideoSequence, Vec<FlowField>), ModelError> {
    spec.validate().map_err(ModelError::ManifestParse)?;
    let (frames, flows) = match spec.kind {
        SynthKind::Slide => render_slide(spec, h, w),
        SynthKind::Rotate => render_rotate(spec, h, w),
        SynthKind::Press => render_press(spec, h, w),
    };
    let video = VideoSequence::new(
        frames,
        SensorKind::GelSightMini,
        format!("synth_{:?}_{}", spec.kind, spec.texture_seed).to_lowercase(),
        0,
        spec.interaction_kind(),
        30.0,
    )?;
    Ok((video, flows))
}

fn render_slide(spec: &InteractionSpec, h: usize, w: usize) -> (Vec<Frame>, Vec<FlowField>) {
    let a = spec.amplitude;
    let t_count = spec.frames;
    let margin = (a * t_count as f64).ceil() as usize + 2;
    let master = texture(h + 4, w + margin, spec.texture_seed);
    // frame t samples the master at x + (T - t)·a: content slides right
    // with t, so forward flow from t to t+1 is exactly (+a, 0)
    let frames = (0..t_count)
        .map(|t| {
            let off = (t_count - 1 - t) as f64 * a;
            Frame::from_grid(&Grid::from_fn(h, w, |x, y| {
                master.sample((x as f64 + off) as f32, y as f32 + 2.0)
            }))
        })
        .collect();
    let flows = (0..t_count - 1)
        .map(|t| FlowField {
            u: Grid::filled(h, w, a as f32),
            v: Grid::zeros(h, w),
            src_index: t,
            dst_index: t + 1,
        })
        .collect();
    (frames, flows)
}

fn render_rotate(spec: &InteractionSpec, h: usize, w: usize) -> (Vec<Frame>, Vec<FlowField>) {
    let delta = spec.amplitude.to_radians();
    let t_count = spec.frames;
    // 2x supersampled master avoids aliasing under rotation
    let master = texture(h * 2, w * 2, spec.texture_seed);
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let frames = (0..t_count)
        .map(|t| {
            let theta = delta * t as f64;
            let (s, c) = theta.sin_cos();
            Frame::from_grid(&Grid::from_fn(h, w, |x, y| {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let sx = c * dx - s * dy + cx;
                let sy = s * dx + c * dy + cy;
                master.sample((sx * 2.0) as f32, (sy * 2.0) as f32)
            }))
        })
        .collect();
    // linearized rigid-rotation field: d(p) = delta * perp(p - c), which is
    // divergence-free with |d| = r * delta exactly
    let flows = (0..t_count - 1)
        .map(|t| FlowField {
            u: Grid::from_fn(h, w, |_, y| (delta * (y as f64 - cy)) as f32),
            v: Grid::from_fn(h, w, |x, _| (-delta * (x as f64 - cx)) as f32),
            src_index: t,
            dst_index: t + 1,
        })
        .collect();
    (frames, flows)
}

fn render_press(spec: &InteractionSpec, h: usize, w: usize) -> (Vec<Frame>, Vec<FlowField>) {
    let t_count = spec.frames;
    let base = texture(h, w, spec.texture_seed);
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let frames = (0..t_count)
        .map(|t| {
            let radius = spec.amplitude * spec.profile_value(t);
            Frame::from_grid(&Grid::from_fn(h, w, |x, y| {
                let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if radius > 0.0 && r < radius {
                    // bright contact blob with a soft shoulder
                    let shoulder = (1.0 - r / radius).min(1.0);
                    (base.get(x, y) as f64 * 0.3 + 0.7 + 0.2 * shoulder).min(1.0) as f32
                } else {
                    base.get(x, y)
                }
            }))
        })
        .collect();
    // appearance change, not motion: ground-truth flow is zero
    let flows = (0..t_count - 1)
        .map(|t| FlowField::zeros(h, w, t, t + 1))
        .collect();
    (frames, flows)
}
