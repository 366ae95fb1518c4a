//! 2-D complex FFT over row-major buffers, built from 1-D plans.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_forward: planner.plan_fft_forward(width),
            row_inverse: planner.plan_fft_inverse(width),
            col_forward: planner.plan_fft_forward(height),
            col_inverse: planner.plan_fft_inverse(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.row_forward, &self.col_forward);
    }

    /// Inverse transform in place, scaled by `1 / (width * height)`.
    pub fn inverse(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.row_inverse, &self.col_inverse);
        let scale = 1.0 / (self.width * self.height) as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = data.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn run(&self, data: &mut [Complex<f64>], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match transform size");
        let scratch_len = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];

        rows.process_with_scratch(data, &mut scratch[..rows.get_inplace_scratch_len()]);

        let mut transposed = vec![Complex::new(0.0, 0.0); w * h];
        transpose(data, &mut transposed, w, h);
        cols.process_with_scratch(&mut transposed, &mut scratch[..cols.get_inplace_scratch_len()]);
        transpose(&transposed, data, h, w);
    }
}

/// `src` is `rows x cols` row-major; `dst` becomes `cols x rows`.
fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], cols: usize, rows: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft() {
        let (w, h) = (6, 4);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let fast = Fft2::new(w, h).forward_real(&data);
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex::from_polar(1.0, phase);
                    }
                }
                assert!((acc - fast[ky * w + kx]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let (w, h) = (8, 16);
        let plan = Fft2::new(w, h);
        let data: Vec<f64> = (0..w * h).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut buf = plan.forward_real(&data);
        plan.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}
