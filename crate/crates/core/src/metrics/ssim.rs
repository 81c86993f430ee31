//! Structural similarity,
//! `SSIM = (2μ₁μ₂ + c₁)(2σ₁₂ + c₂) / ((μ₁² + μ₂² + c₁)(σ₁² + σ₂² + c₂))`
//! with `c₁ = (K₁L)²`, `c₂ = (K₂L)²`.
//!
//! Moments are population moments. The default window is the whole image, giving one
//! scalar per image pair. The result is not clamped, so anti-correlated images score
//! below zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SsimWindow {
    #[default]
    Global,
    /// Mean over all fully contained square windows of this side length.
    Sliding(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L`.
    pub dynamic_range: f64,
    pub window: SsimWindow,
}

impl SsimParams {
    pub const K1: f64 = 0.01;
    pub const K2: f64 = 0.03;

    pub fn new(k1: f64, k2: f64, dynamic_range: f64, window: SsimWindow) -> Result<Self> {
        if !(k1 > 0.0 && k1 < 1.0 && k2 > 0.0 && k2 < 1.0) {
            return Err(Error::invalid(format!("K1, K2 must lie in (0, 1), got {k1}, {k2}")));
        }
        if !(dynamic_range >= 0.0 && dynamic_range.is_finite()) {
            return Err(Error::invalid("dynamic range must be finite and non-negative"));
        }
        if let SsimWindow::Sliding(side) = window {
            if side < 2 {
                return Err(Error::invalid("sliding window side must be at least 2"));
            }
        }
        Ok(Self { k1, k2, dynamic_range, window })
    }

    /// Default constants with `L = max − min` of the reference image.
    pub fn for_reference(reference: &RealImage) -> Self {
        let (lo, hi) = reference.min_max();
        Self {
            k1: Self::K1,
            k2: Self::K2,
            dynamic_range: hi - lo,
            window: SsimWindow::Global,
        }
    }

    pub fn with_window(self, window: SsimWindow) -> Self {
        Self { window, ..self }
    }

    fn constants(&self) -> (f64, f64) {
        ((self.k1 * self.dynamic_range).powi(2), (self.k2 * self.dynamic_range).powi(2))
    }
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    mu1: f64,
    mu2: f64,
    var1: f64,
    var2: f64,
    cov: f64,
}

fn combine(m: Moments, c1: f64, c2: f64) -> f64 {
    let num_l = 2.0 * m.mu1 * m.mu2 + c1;
    let den_l = m.mu1 * m.mu1 + m.mu2 * m.mu2 + c1;
    let num_s = 2.0 * m.cov + c2;
    let den_s = m.var1 + m.var2 + c2;
    // unstabilized flat/zero inputs: treat 0/0 factors as perfect agreement
    let l = if den_l == 0.0 { 1.0 } else { num_l / den_l };
    let s = if den_s == 0.0 { 1.0 } else { num_s / den_s };
    l * s
}

fn global_moments(a: &[f64], b: &[f64]) -> Moments {
    let n = a.len() as f64;
    let mu1 = a.iter().sum::<f64>() / n;
    let mu2 = b.iter().sum::<f64>() / n;
    let (mut var1, mut var2, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mu1, y - mu2);
        var1 += dx * dx;
        var2 += dy * dy;
        cov += dx * dy;
    }
    Moments { mu1, mu2, var1: var1 / n, var2: var2 / n, cov: cov / n }
}

pub fn ssim(img1: &RealImage, img2: &RealImage, params: &SsimParams) -> Result<f64> {
    img1.ensure_same_dims(img2)?;
    let (c1, c2) = params.constants();
    match params.window {
        SsimWindow::Global => Ok(combine(global_moments(img1.data(), img2.data()), c1, c2)),
        SsimWindow::Sliding(side) => sliding(img1, img2, side, c1, c2),
    }
}

fn sliding(img1: &RealImage, img2: &RealImage, side: usize, c1: f64, c2: f64) -> Result<f64> {
    let (w, h) = img1.dims();
    if side > w || side > h {
        return Err(Error::invalid(format!("window {side} larger than image {w}x{h}")));
    }
    let mut a = vec![0.0; side * side];
    let mut b = vec![0.0; side * side];
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - side {
        for x0 in 0..=w - side {
            for dy in 0..side {
                let row = (y0 + dy) * w + x0;
                a[dy * side..(dy + 1) * side].copy_from_slice(&img1.data()[row..row + side]);
                b[dy * side..(dy + 1) * side].copy_from_slice(&img2.data()[row..row + side]);
            }
            total += combine(global_moments(&a, &b), c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM of real and imaginary parts against a reference field, each with `L` from the
/// corresponding reference part.
pub fn ssim_complex_parts(field: &ComplexField, reference: &ComplexField) -> Result<(f64, f64)> {
    field.ensure_same_dims(reference)?;
    let (rr, ri) = (reference.real(), reference.imag());
    let re = ssim(&field.real(), &rr, &SsimParams::for_reference(&rr))?;
    let im = ssim(&field.imag(), &ri, &SsimParams::for_reference(&ri))?;
    Ok((re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn textured(seed: u64) -> RealImage {
        RealImage::from_fn(16, 12, 1.0, |x, y| {
            let t = (x * 31 + y * 17) as f64 + seed as f64 * 0.77;
            (t * 0.37).sin() + 0.5 * (t * 0.11).cos()
        })
        .unwrap()
    }

    /// Direct two-pass evaluation of the formula.
    fn oracle(a: &RealImage, b: &RealImage, k1: f64, k2: f64, l: f64) -> f64 {
        let n = a.data().len() as f64;
        let m1: f64 = a.data().iter().sum::<f64>() / n;
        let m2: f64 = b.data().iter().sum::<f64>() / n;
        let v1: f64 = a.data().iter().map(|x| (x - m1) * (x - m1)).sum::<f64>() / n;
        let v2: f64 = b.data().iter().map(|x| (x - m2) * (x - m2)).sum::<f64>() / n;
        let c: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - m1) * (y - m2)).sum::<f64>() / n;
        let (c1, c2) = ((k1 * l).powi(2), (k2 * l).powi(2));
        ((2.0 * m1 * m2 + c1) * (2.0 * c + c2)) / ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2))
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let a = textured(1);
        assert_eq!(ssim(&a, &a, &SsimParams::for_reference(&a)).unwrap(), 1.0);
        let p = SsimParams::for_reference(&a).with_window(SsimWindow::Sliding(7));
        assert_eq!(ssim(&a, &a, &p).unwrap(), 1.0);
    }

    #[test]
    fn equal_constants_score_one() {
        let a = RealImage::constant(8, 8, 1.0, 0.4).unwrap();
        assert_eq!(ssim(&a, &a, &SsimParams::for_reference(&a)).unwrap(), 1.0);
    }

    #[test]
    fn full_range_offset_matches_formula() {
        let a = textured(2);
        let p = SsimParams::for_reference(&a);
        let b = a.map(|v| v + p.dynamic_range);
        let got = ssim(&a, &b, &p).unwrap();
        let want = oracle(&a, &b, 0.01, 0.03, p.dynamic_range);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        assert!(got < 1.0);
    }

    #[test]
    fn rejects_mismatched_dims_and_bad_constants() {
        let a = RealImage::constant(8, 8, 1.0, 0.0).unwrap();
        let b = RealImage::constant(9, 8, 1.0, 0.0).unwrap();
        assert!(ssim(&a, &b, &SsimParams::for_reference(&a)).is_err());
        assert!(SsimParams::new(0.0, 0.03, 1.0, SsimWindow::Global).is_err());
        assert!(SsimParams::new(0.01, 1.0, 1.0, SsimWindow::Global).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_matches_oracle(s1 in 0u64..500, s2 in 0u64..500, l in 0.1f64..5.0) {
            let (a, b) = (textured(s1), textured(s2).map(|v| 0.7 * v + 0.2));
            let p = SsimParams::new(0.01, 0.03, l, SsimWindow::Global).unwrap();
            let ab = ssim(&a, &b, &p).unwrap();
            let ba = ssim(&b, &a, &p).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((ab - oracle(&a, &b, 0.01, 0.03, l)).abs() < 1e-12);
            prop_assert_eq!(ssim(&a, &a, &p).unwrap(), 1.0);
        }
    }
}
