//! Cubic-spline upsampling of low-resolution Tac3D deformation force fields.
//!
//! Separable natural cubic splines (zero second derivative at the edges)
//! per force component, rows first, then columns. Source knot i maps to
//! target position i·(target−1)/(source−1) so the physical extent of the
//! field is preserved and knot values are reproduced exactly.

use crate::tensorfile::TensorFile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("source grid must be at least 4x4, got {0}x{1}")]
    SourceTooSmall(usize, usize),
    #[error("target {0}x{1} smaller than source {2}x{3}")]
    TargetSmallerThanSource(usize, usize, usize, usize),
}

/// Three-component H×W force field in sensor units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceField {
    pub h: usize,
    pub w: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
}

impl ForceField {
    pub fn new(h: usize, w: usize, fx: Vec<f64>, fy: Vec<f64>, fz: Vec<f64>) -> Self {
        assert!(fx.len() == h * w && fy.len() == h * w && fz.len() == h * w);
        Self { h, w, fx, fy, fz }
    }

    /// Per-pixel force magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.h * self.w)
            .map(|i| (self.fx[i].powi(2) + self.fy[i].powi(2) + self.fz[i].powi(2)).sqrt())
            .collect()
    }

    /// 3-channel f32 TensorFile of shape (H, W, 3).
    pub fn to_tensor(&self) -> TensorFile {
        let mut data = Vec::with_capacity(self.h * self.w * 3);
        for i in 0..self.h * self.w {
            data.push(self.fx[i] as f32);
            data.push(self.fy[i] as f32);
            data.push(self.fz[i] as f32);
        }
        TensorFile::F32 {
            shape: vec![self.h, self.w, 3],
            data,
        }
    }

    pub fn from_tensor(t: &TensorFile) -> Option<Self> {
        match t {
            TensorFile::F32 { shape, data } if shape.len() == 3 && shape[2] == 3 => {
                let (h, w) = (shape[0], shape[1]);
                let mut fx = Vec::with_capacity(h * w);
                let mut fy = Vec::with_capacity(h * w);
                let mut fz = Vec::with_capacity(h * w);
                for chunk in data.chunks_exact(3) {
                    fx.push(chunk[0] as f64);
                    fy.push(chunk[1] as f64);
                    fz.push(chunk[2] as f64);
                }
                Some(Self { h, w, fx, fy, fz })
            }
            _ => None,
        }
    }
}

/// Second derivatives of the natural cubic spline through (0, y_0)..(n−1, y_{n−1}),
/// unit knot spacing. Thomas algorithm on the standard tridiagonal system.
fn natural_spline_m(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let interior = n - 2;
    let mut diag = vec![4.0; interior];
    let mut rhs: Vec<f64> = (1..n - 1)
        .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]))
        .collect();
    // forward elimination (sub- and super-diagonals are all 1)
    for i in 1..interior {
        let f = 1.0 / diag[i - 1];
        diag[i] -= f;
        rhs[i] -= f * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 2] = rhs[interior - 1] / diag[interior - 1];
    for i in (1..n - 2).rev() {
        m[i] = (rhs[i - 1] - m[i + 1]) / diag[i - 1];
    }
    m
}

/// Evaluate the natural spline through `y` (unit spacing) at position `x`.
fn spline_eval(y: &[f64], m: &[f64], x: f64) -> f64 {
    let n = y.len();
    let x = x.clamp(0.0, (n - 1) as f64);
    let i = (x.floor() as usize).min(n - 2);
    let t = x - i as f64;
    let a = y[i];
    let b = y[i + 1] - y[i] - (2.0 * m[i] + m[i + 1]) / 6.0;
    let c = m[i] / 2.0;
    let d = (m[i + 1] - m[i]) / 6.0;
    a + b * t + c * t * t + d * t * t * t
}

fn resample_1d(y: &[f64], target: usize) -> Vec<f64> {
    if target == y.len() {
        return y.to_vec();
    }
    let m = natural_spline_m(y);
    let scale = (y.len() - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|j| spline_eval(y, &m, j as f64 * scale))
        .collect()
}

fn resample_component(src: &[f64], h: usize, w: usize, th: usize, tw: usize) -> Vec<f64> {
    // rows first
    let mut rows = vec![0.0; h * tw];
    for r in 0..h {
        let out = resample_1d(&src[r * w..(r + 1) * w], tw);
        rows[r * tw..(r + 1) * tw].copy_from_slice(&out);
    }
    // then columns
    let mut out = vec![0.0; th * tw];
    let mut col = vec![0.0; h];
    for c in 0..tw {
        for r in 0..h {
            col[r] = rows[r * tw + c];
        }
        let res = resample_1d(&col, th);
        for (r, v) in res.iter().enumerate() {
            out[r * tw + c] = *v;
        }
    }
    out
}

/// Upsample a force field by separable natural cubic splines per component.
pub fn spline_interpolate_field(
    field: &ForceField,
    target_h: usize,
    target_w: usize,
) -> Result<ForceField, SplineError> {
    if field.h < 4 || field.w < 4 {
        return Err(SplineError::SourceTooSmall(field.h, field.w));
    }
    if target_h < field.h || target_w < field.w {
        return Err(SplineError::TargetSmallerThanSource(
            target_h, target_w, field.h, field.w,
        ));
    }
    Ok(ForceField {
        h: target_h,
        w: target_w,
        fx: resample_component(&field.fx, field.h, field.w, target_h, target_w),
        fy: resample_component(&field.fy, field.h, field.w, target_h, target_w),
        fz: resample_component(&field.fz, field.h, field.w, target_h, target_w),
    })
}
