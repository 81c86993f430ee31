//! 2-D FFT over row-major buffers, backed by `rustfft`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward and inverse 2-D transforms for one grid size.
///
/// The forward transform is unnormalized; the inverse divides by `width * height`,
/// so `inverse(forward(x)) == x` and Parseval reads `Σ|x|² = Σ|X|² / (w·h)`.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
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
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        data.iter_mut().for_each(|v| *v *= norm);
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.width * self.height, "buffer does not match FFT plan");
        rows.process(data);
        let mut t = transpose(data, self.width, self.height);
        cols.process(&mut t);
        let back = transpose(&t, self.height, self.width);
        data.copy_from_slice(&back);
    }
}

fn transpose(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::default(); src.len()];
    const BLOCK: usize = 32;
    for by in (0..height).step_by(BLOCK) {
        for bx in (0..width).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(height) {
                for x in bx..(bx + BLOCK).min(width) {
                    dst[x * height + y] = src[y * width + x];
                }
            }
        }
    }
    dst
}

/// Spatial frequency of FFT bin `k` on an `n`-point grid with sample spacing `d`,
/// in the usual order `0, 1, …, n/2 − 1, −n/2, …, −1` (divided by `n·d`).
pub fn frequency(k: usize, n: usize, d: f64) -> f64 {
    let signed = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    signed / (n as f64 * d)
}

pub fn frequencies(n: usize, d: f64) -> Vec<f64> {
    (0..n).map(|k| frequency(k, n, d)).collect()
}
