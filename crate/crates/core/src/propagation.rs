//! Band-limited angular-spectrum free-space propagation.
//!
//! The transfer function is `exp(i·2π·z·(sqrt(1/λ² − fx² − fy²) − 1/λ))`, zero where
//! the radicand is negative. The constant carrier `exp(i·2π·z/λ)` is factored out so a
//! unit plane wave stays exactly `1` at every plane.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{frequencies, Fft2};
use crate::field::{ComplexField, OpticalConfig, RealImage};

/// Largest propagation distance accepted, µm.
pub const MAX_DISTANCE: f64 = 1e5;

const CACHE_LIMIT: usize = 64;

/// Propagation engine for one grid geometry; caches FFT plans and transfer functions.
pub struct Propagator {
    width: usize,
    height: usize,
    pitch: f64,
    wavelength: f64,
    fft: Fft2,
    cache: Mutex<HashMap<u64, Arc<Vec<Complex64>>>>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("pitch", &self.pitch)
            .field("wavelength", &self.wavelength)
            .finish()
    }
}

impl Propagator {
    pub fn new(width: usize, height: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        if !(pitch > 0.0 && wavelength > 0.0 && pitch.is_finite() && wavelength.is_finite()) {
            return Err(Error::invalid("pitch and wavelength must be positive"));
        }
        Ok(Self {
            width,
            height,
            pitch,
            wavelength,
            fft: Fft2::new(width, height),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn for_grid(width: usize, height: usize, pitch: f64, cfg: &OpticalConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(width, height, pitch, cfg.wavelength)
    }

    pub fn for_field(field: &ComplexField, cfg: &OpticalConfig) -> Result<Self> {
        Self::for_grid(field.width(), field.height(), field.pitch(), cfg)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Sampled transfer function for `distance`, in FFT bin order.
    pub fn transfer(&self, distance: f64) -> Arc<Vec<Complex64>> {
        let key = distance.to_bits();
        if let Some(h) = self.cache.lock().expect("transfer cache poisoned").get(&key) {
            return Arc::clone(h);
        }
        let h = Arc::new(self.build_transfer(distance));
        let mut cache = self.cache.lock().expect("transfer cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&h));
        h
    }

    fn build_transfer(&self, distance: f64) -> Vec<Complex64> {
        let fx = frequencies(self.width, self.pitch);
        let fy = frequencies(self.height, self.pitch);
        let inv_lambda = 1.0 / self.wavelength;
        let inv_lambda_sq = inv_lambda * inv_lambda;
        let mut h = Vec::with_capacity(self.width * self.height);
        for &v in &fy {
            for &u in &fx {
                let f2 = u * u + v * v;
                let radicand = inv_lambda_sq - f2;
                if radicand < 0.0 {
                    h.push(Complex64::new(0.0, 0.0));
                } else {
                    // sqrt(1/λ² − f²) − 1/λ without cancellation
                    let kz_excess = -f2 / (inv_lambda + radicand.sqrt());
                    h.push(Complex64::from_polar(1.0, 2.0 * PI * distance * kz_excess));
                }
            }
        }
        h
    }

    /// Propagate `field` by a signed `distance` (µm).
    pub fn propagate(&self, field: &ComplexField, distance: f64) -> Result<ComplexField> {
        if field.dims() != self.dims() || field.pitch() != self.pitch {
            return Err(Error::invalid(format!(
                "field {}x{} @ {} µm does not match propagator {}x{} @ {} µm",
                field.width(),
                field.height(),
                field.pitch(),
                self.width,
                self.height,
                self.pitch
            )));
        }
        check_distance(distance)?;
        field.ensure_finite("propagation input")?;
        if distance == 0.0 {
            return Ok(field.clone());
        }
        let h = self.transfer(distance);
        let mut data = field.data().to_vec();
        self.fft.forward(&mut data);
        data.iter_mut().zip(h.iter()).for_each(|(d, h)| *d *= h);
        self.fft.inverse(&mut data);
        ComplexField::new(self.width, self.height, self.pitch, data)
    }
}

impl Propagator {
    /// Propagate a precomputed forward spectrum without touching the transfer cache.
    /// Used by scans that visit many distinct distances once each.
    pub(crate) fn propagate_spectrum(&self, spectrum: &[Complex64], distance: f64) -> Result<ComplexField> {
        check_distance(distance)?;
        let h = self.build_transfer(distance);
        let mut data: Vec<Complex64> = spectrum.iter().zip(&h).map(|(s, h)| s * h).collect();
        self.fft.inverse(&mut data);
        ComplexField::new(self.width, self.height, self.pitch, data)
    }
}

fn check_distance(distance: f64) -> Result<()> {
    if !distance.is_finite() || distance.abs() >= MAX_DISTANCE {
        return Err(Error::invalid(format!(
            "propagation distance {distance} µm outside (−{MAX_DISTANCE}, {MAX_DISTANCE})"
        )));
    }
    Ok(())
}

/// One-shot propagation without padding (periodic boundary).
pub fn propagate(field: &ComplexField, distance: f64, cfg: &OpticalConfig) -> Result<ComplexField> {
    Propagator::for_field(field, cfg)?.propagate(field, distance)
}

/// Propagation on a grid zero-padded by an integer `pad` factor, cropped back to the
/// original window. `pad == 1` is equivalent to [`propagate`].
pub fn propagate_padded(
    field: &ComplexField,
    distance: f64,
    cfg: &OpticalConfig,
    pad: usize,
) -> Result<ComplexField> {
    if pad == 0 {
        return Err(Error::invalid("pad factor must be at least 1"));
    }
    if pad == 1 {
        return propagate(field, distance, cfg);
    }
    let (w, h) = field.dims();
    let (pw, ph) = (w * pad, h * pad);
    let (ox, oy) = ((pw - w) / 2, (ph - h) / 2);
    let mut big = vec![Complex64::new(0.0, 0.0); pw * ph];
    for y in 0..h {
        big[(y + oy) * pw + ox..(y + oy) * pw + ox + w]
            .copy_from_slice(&field.data()[y * w..(y + 1) * w]);
    }
    let big = ComplexField::new(pw, ph, field.pitch(), big)?;
    propagate(&big, distance, cfg)?.crop(ox, oy, w, h)
}

/// Back-propagate a single hologram by the nominal sample-to-sensor distance, treating
/// `sqrt(intensity)` as a zero-phase field. The result carries the twin image.
pub fn backpropagate_hologram(intensity: &RealImage, cfg: &OpticalConfig) -> Result<ComplexField> {
    backpropagate_to(intensity, cfg.z2, cfg)
}

/// As [`backpropagate_hologram`] with an explicit distance (µm, ≥ 0).
pub fn backpropagate_to(intensity: &RealImage, distance: f64, cfg: &OpticalConfig) -> Result<ComplexField> {
    check_intensity(intensity)?;
    let field = ComplexField::from_amplitude(&intensity.sqrt());
    propagate(&field, -distance, cfg)
}

pub(crate) fn check_intensity(intensity: &RealImage) -> Result<()> {
    if !intensity.is_finite() {
        return Err(Error::NonFinite("intensity image"));
    }
    if intensity.data().iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("intensity contains negative samples"));
    }
    Ok(())
}

/// Sub-pixel lateral resampling by Fourier shift: `out(x, y) = in(x + dx, y + dy)`.
///
/// Integer-pixel shifts reproduce a periodic roll up to rounding.
pub fn fourier_shift(field: &ComplexField, dx: f64, dy: f64) -> Result<ComplexField> {
    if dx == 0.0 && dy == 0.0 {
        return Ok(field.clone());
    }
    let (w, h) = field.dims();
    let fx = frequencies(w, field.pitch());
    let fy = frequencies(h, field.pitch());
    let fft = Fft2::new(w, h);
    let mut data = field.data().to_vec();
    fft.forward(&mut data);
    for (j, &v) in fy.iter().enumerate() {
        for (i, &u) in fx.iter().enumerate() {
            data[j * w + i] *= Complex64::from_polar(1.0, 2.0 * PI * (u * dx + v * dy));
        }
    }
    fft.inverse(&mut data);
    ComplexField::new(w, h, field.pitch(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OpticalConfig {
        OpticalConfig::new(0.53, 300.0, 1.0).unwrap()
    }

    fn smooth_field(n: usize, pitch: f64) -> ComplexField {
        let c = n as f64 / 2.0;
        ComplexField::from_fn(n, n, pitch, |x, y| {
            let r2 = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)) / 40.0;
            Complex64::from_polar(1.0 - 0.3 * (-r2).exp(), 0.8 * (-r2 / 2.0).exp())
        })
        .unwrap()
    }

    #[test]
    fn zero_distance_is_bit_identical() {
        let f = smooth_field(32, 1.12);
        assert_eq!(propagate(&f, 0.0, &cfg()).unwrap(), f);
    }

    #[test]
    fn rejects_non_finite_and_far_distances() {
        let mut f = smooth_field(16, 1.12);
        assert!(propagate(&f, 1e5, &cfg()).is_err());
        assert!(propagate(&f, f64::NAN, &cfg()).is_err());
        f.data_mut()[3] = Complex64::new(f64::NAN, 0.0);
        let err = propagate(&f, 10.0, &cfg()).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn plane_wave_is_invariant() {
        let f = ComplexField::constant(32, 32, 1.12, Complex64::new(0.7, 0.0)).unwrap();
        let out = propagate(&f, 450.0, &cfg()).unwrap();
        for c in out.data() {
            assert!((c - Complex64::new(0.7, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn evanescent_band_is_zeroed() {
        // pitch 0.2 µm resolves frequencies beyond 1/λ
        let p = Propagator::new(16, 16, 0.2, 0.53).unwrap();
        let h = p.transfer(10.0);
        let fx = frequencies(16, 0.2);
        let nyq = 8; // fx = −2.5 cycles/µm > 1/λ
        assert!(fx[nyq].abs() > 1.0 / 0.53);
        assert_eq!(h[nyq], Complex64::new(0.0, 0.0));
        assert!((h[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fourier_shift_by_whole_pixel_matches_roll() {
        let f = smooth_field(16, 1.0).map(|c| c * Complex64::new(1.0, 0.3));
        let shifted = fourier_shift(&f, 1.0, 0.0).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let expect = f.get((x + 1) % 16, y);
                assert!((shifted.get(x, y) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn backpropagate_rejects_negative_intensity() {
        let mut img = RealImage::constant(16, 16, 1.12, 1.0).unwrap();
        img.data_mut()[0] = -0.1;
        assert!(backpropagate_hologram(&img, &cfg()).is_err());
    }

    #[test]
    fn backpropagate_plane_wave_and_zero_distance() {
        let img = RealImage::constant(16, 16, 1.12, 0.64).unwrap();
        let out = backpropagate_hologram(&img, &cfg()).unwrap();
        for c in out.data() {
            assert!((c.norm() - 0.8).abs() < 1e-12);
            assert!(c.arg().abs() < 1e-12);
        }
        let textured = RealImage::from_fn(16, 16, 1.12, |x, y| 1.0 + 0.1 * ((x * y) % 5) as f64).unwrap();
        let out = backpropagate_to(&textured, 0.0, &cfg()).unwrap();
        assert_eq!(out.amplitude(), textured.sqrt());
    }
}
