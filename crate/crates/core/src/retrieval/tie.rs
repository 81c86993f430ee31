//! Transport-of-intensity phase estimate used to seed the multi-height iteration.
//!
//! Uniform-intensity (Teague) form: `∇²φ = −(k / Ī)·∂I/∂z`, solved spectrally with a
//! Tikhonov-regularized inverse Laplacian.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{frequencies, Fft2};
use crate::field::{ComplexField, RealImage};
use crate::forward::HologramStack;

/// Closest plane separation accepted for the axial derivative, µm.
pub const MIN_SEPARATION: f64 = 1.0;

/// Regularization weight relative to the largest Laplacian eigenvalue.
pub const REGULARIZATION: f64 = 1e-3;

/// `(first, anchor, last)` plane indices for a stack of `len ≥ 3` planes. For eight
/// planes this is the 1st, 7th and 8th heights; shorter stacks use the first,
/// second-to-last and last.
pub fn tie_plane_indices(len: usize) -> Result<(usize, usize, usize)> {
    if len < 3 {
        return Err(Error::invalid(format!("TIE needs at least 3 planes, stack has {len}")));
    }
    Ok((0, len - 2, len - 1))
}

/// Phase whose Laplacian balances the measured axial intensity derivative.
///
/// `dz_intensity` is `∂I/∂z` (per µm), `mean_intensity` the uniform-intensity
/// approximation `Ī`. The zero-frequency component of the result is zero.
pub fn solve_tie(dz_intensity: &RealImage, mean_intensity: f64, wavelength: f64) -> Result<RealImage> {
    if !(mean_intensity > 0.0) {
        return Err(Error::invalid("TIE needs a positive mean intensity"));
    }
    let (w, h) = dz_intensity.dims();
    let pitch = dz_intensity.pitch();
    let fx = frequencies(w, pitch);
    let fy = frequencies(h, pitch);
    let q_max = 4.0 * PI * PI * (fx.iter().map(|f| f * f).fold(0.0, f64::max) + fy.iter().map(|f| f * f).fold(0.0, f64::max));
    let eps = REGULARIZATION * q_max;
    let k = 2.0 * PI / wavelength;
    let scale = k / mean_intensity;

    let fft = Fft2::new(w, h);
    let mut spec: Vec<Complex64> = dz_intensity.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut spec);
    for (j, v) in fy.iter().enumerate() {
        for (i, u) in fx.iter().enumerate() {
            let q = 4.0 * PI * PI * (u * u + v * v);
            // −∇² ↔ q, so φ̂ = scale·Î_z / q, regularized as q / (q² + ε²)
            spec[j * w + i] *= scale * q / (q * q + eps * eps);
        }
    }
    fft.inverse(&mut spec);
    let phase: Vec<f64> = spec.iter().map(|c| c.re).collect();
    if phase.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("TIE phase"));
    }
    RealImage::new(w, h, pitch, phase)
}

/// Initial complex field at the anchor plane: amplitude `sqrt(I_anchor)`, phase from the
/// TIE with `∂I/∂z ≈ (I_last − I_first) / (z_last − z_first)` and `Ī = mean(I_anchor)`.
pub fn tie_initial_phase(stack: &HologramStack) -> Result<ComplexField> {
    let (first, anchor, last) = tie_plane_indices(stack.len())?;
    let planes = stack.planes();
    let dz = planes[last].z - planes[first].z;
    if dz < MIN_SEPARATION {
        return Err(Error::invalid(format!(
            "planes {dz} µm apart give an ill-conditioned axial derivative"
        )));
    }
    let i_first = planes[first].intensity.data();
    let i_last = planes[last].intensity.data();
    let derivative = RealImage::new(
        stack.dims().0,
        stack.dims().1,
        stack.pitch(),
        i_first.iter().zip(i_last).map(|(a, b)| (b - a) / dz).collect(),
    )?;
    let anchor_intensity = &planes[anchor].intensity;
    let phase = solve_tie(&derivative, anchor_intensity.mean(), stack.cfg().wavelength)?;
    ComplexField::from_polar(&anchor_intensity.sqrt(), &phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::OpticalConfig;
    use crate::forward::HologramPlane;

    #[test]
    fn plane_indices() {
        assert_eq!(tie_plane_indices(8).unwrap(), (0, 6, 7));
        assert_eq!(tie_plane_indices(3).unwrap(), (0, 1, 2));
        assert!(tie_plane_indices(2).is_err());
    }

    #[test]
    fn uniform_intensity_gives_zero_phase() {
        let planes = [300.0, 330.0, 390.0]
            .iter()
            .map(|&z| HologramPlane {
                intensity: RealImage::constant(32, 32, 1.12, 1.0).unwrap(),
                z,
            })
            .collect();
        let stack = HologramStack::new(planes, OpticalConfig::default(), (0.0, 0.0)).unwrap();
        let f = tie_initial_phase(&stack).unwrap();
        assert!(f.data().iter().all(|c| c.im == 0.0 && c.re == 1.0));
    }

    #[test]
    fn rejects_close_planes() {
        let planes = [300.0, 300.3, 300.6]
            .iter()
            .map(|&z| HologramPlane {
                intensity: RealImage::constant(16, 16, 1.12, 1.0).unwrap(),
                z,
            })
            .collect();
        let stack = HologramStack::new(planes, OpticalConfig::default(), (0.0, 0.0)).unwrap();
        assert!(tie_initial_phase(&stack).is_err());
    }

    #[test]
    fn inverts_laplacian_of_known_phase() {
        // φ = cos(2πx/L): ∇²φ = −(2π/L)²φ, so ∂I/∂z = (Ī/k)·(2π/L)²·φ
        let (n, pitch, lambda) = (64, 1.0, 0.5);
        let l = n as f64 * pitch / 4.0;
        let g = 2.0 * PI / l;
        let k = 2.0 * PI / lambda;
        let phi = RealImage::from_fn(n, n, pitch, |x, _| (g * x as f64 * pitch).cos()).unwrap();
        let didz = phi.map(|p| g * g * p / k);
        let out = solve_tie(&didz, 1.0, lambda).unwrap();
        // regularization attenuates this mode by q²/(q² + ε²)
        let q = g * g;
        let q_max = 4.0 * PI * PI * 0.5;
        let eps = REGULARIZATION * q_max;
        let gain = q * q / (q * q + eps * eps);
        for (a, b) in out.data().iter().zip(phi.data()) {
            assert!((a - gain * b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
