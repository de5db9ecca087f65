//! Single-channel 2D grids with clamped bilinear sampling.
//!
//! Coordinates are (x, y) = (column, row) in pixel units, with (0, 0) at the
//! top-left pixel center. Sampling outside the grid clamps to the nearest
//! edge pixel.

/// Row-major H×W grid of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Grid {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), h * w, "grid payload does not match h*w");
        Self { h, w, data }
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self::new(h, w, vec![0.0; h * w])
    }

    pub fn filled(h: usize, w: usize, value: f32) -> Self {
        Self::new(h, w, vec![value; h * w])
    }

    /// Build a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Self::new(h, w, data)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.w + x] = value;
    }

    /// Bilinear sample at a sub-pixel position, clamping to the grid bounds.
    ///
    /// Integer positions reproduce stored values exactly.
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.w - 1) as f32);
        let y = y.clamp(0.0, (self.h - 1) as f32);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Bilinear resize with endpoint-aligned coordinates: source pixel
    /// (w-1, h-1) maps onto target pixel (tw-1, th-1), so corner values and
    /// linear ramps are preserved.
    pub fn resize_bilinear(&self, th: usize, tw: usize) -> Grid {
        assert!(th >= 1 && tw >= 1);
        if th == self.h && tw == self.w {
            return self.clone();
        }
        let sx = if tw > 1 {
            (self.w - 1) as f32 / (tw - 1) as f32
        } else {
            0.0
        };
        let sy = if th > 1 {
            (self.h - 1) as f32 / (th - 1) as f32
        } else {
            0.0
        };
        Grid::from_fn(th, tw, |x, y| self.sample(x as f32 * sx, y as f32 * sy))
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn mean(&self) -> f32 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() as f32 / self.data.len() as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_at_integer_positions_is_exact() {
        let g = Grid::from_fn(4, 5, |x, y| (y * 5 + x) as f32);
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(g.sample(x as f32, y as f32), g.get(x, y));
            }
        }
    }

    #[test]
    fn sample_clamps_out_of_bounds() {
        let g = Grid::from_fn(3, 3, |x, y| (x + 10 * y) as f32);
        assert_eq!(g.sample(-5.0, -5.0), g.get(0, 0));
        assert_eq!(g.sample(100.0, 100.0), g.get(2, 2));
    }

    #[test]
    fn resize_preserves_ramp_endpoints() {
        // A linear horizontal ramp survives bilinear resampling exactly.
        let g = Grid::from_fn(8, 64, |x, _| x as f32 / 63.0);
        let r = g.resize_bilinear(8, 32);
        assert!((r.get(0, 0) - 0.0).abs() < 1e-6);
        assert!((r.get(31, 0) - 1.0).abs() < 1e-6);
        for x in 0..32 {
            let expect = x as f32 * (63.0 / 31.0) / 63.0;
            assert!((r.get(x, 4) - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn resize_identity_is_exact() {
        let g = Grid::from_fn(6, 7, |x, y| (x * y) as f32 * 0.013);
        assert_eq!(g.resize_bilinear(6, 7), g);
    }
}
