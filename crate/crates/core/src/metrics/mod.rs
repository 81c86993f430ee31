//! Reconstruction quality metrics.

pub mod cells;
pub mod scattering;
pub mod ssim;

pub use cells::{
    effective_refractive_volume, measure_cells, phase_integral, segment_cells, subtract_background_phase,
    CellMeasurement, MIN_CELL_PIXELS,
};
pub use scattering::{scattering_ratio, scattering_ratio_with_reference};
pub use ssim::{ssim, ssim_complex_parts, SsimParams, SsimWindow};

use crate::error::Result;
use crate::field::RealImage;

/// Median of `values` (mean of the two middle values for even lengths). Reorders the slice.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Root-mean-square difference.
pub fn rms_difference(a: &RealImage, b: &RealImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let ss: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((ss / a.data().len() as f64).sqrt())
}

/// Peak signal-to-noise ratio in dB, with `peak` the signal's dynamic range.
pub fn psnr(estimate: &RealImage, truth: &RealImage, peak: f64) -> Result<f64> {
    let rms = rms_difference(estimate, truth)?;
    Ok(20.0 * (peak / rms).log10())
}

/// Pearson correlation coefficient.
pub fn pearson(a: &RealImage, b: &RealImage) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (ma, mb) = (a.mean(), b.mean());
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn psnr_of_known_error() {
        let t = RealImage::constant(8, 8, 1.0, 1.0).unwrap();
        let e = t.map(|v| v + 0.01);
        assert!((psnr(&e, &t, 1.0).unwrap() - 40.0).abs() < 1e-9);
    }
}
