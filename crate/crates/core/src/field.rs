//! Sampled 2-D optical fields and real-valued images on a physical grid.
//!
//! Samples are row-major, `data[y * width + x]`. Lengths are in micrometres.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted grid side, in pixels.
pub const MIN_SIDE: usize = 8;

fn check_grid(width: usize, height: usize, pitch: f64, len: usize) -> Result<()> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::invalid(format!(
            "grid {width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::invalid(format!("pixel pitch must be positive, got {pitch}")));
    }
    if len != width * height {
        return Err(Error::invalid(format!(
            "sample count {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// Complex optical field sampled on a square-pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    pitch: f64,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, pitch: f64, data: Vec<Complex64>) -> Result<Self> {
        check_grid(width, height, pitch, data.len())?;
        Ok(Self {
            width,
            height,
            pitch,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, pitch: f64, value: Complex64) -> Result<Self> {
        Self::new(width, height, pitch, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pitch: f64,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, pitch, data)
    }

    /// Zero-phase field whose amplitude is the given image.
    pub fn from_amplitude(amplitude: &RealImage) -> Self {
        Self {
            width: amplitude.width,
            height: amplitude.height,
            pitch: amplitude.pitch,
            data: amplitude.data.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        }
    }

    pub fn from_polar(amplitude: &RealImage, phase: &RealImage) -> Result<Self> {
        amplitude.ensure_same_dims(phase)?;
        let data = amplitude
            .data
            .iter()
            .zip(&phase.data)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect();
        Self::new(amplitude.width, amplitude.height, amplitude.pitch, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn ensure_same_dims(&self, other: &ComplexField) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    fn real_view(&self, f: impl Fn(&Complex64) -> f64) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            pitch: self.pitch,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn amplitude(&self) -> RealImage {
        self.real_view(|c| c.norm())
    }

    pub fn phase(&self) -> RealImage {
        self.real_view(|c| c.arg())
    }

    pub fn intensity(&self) -> RealImage {
        self.real_view(|c| c.norm_sqr())
    }

    pub fn real(&self) -> RealImage {
        self.real_view(|c| c.re)
    }

    pub fn imag(&self) -> RealImage {
        self.real_view(|c| c.im)
    }

    /// Sum of |u|² over all samples.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            data: self.data.iter().map(|&c| f(c)).collect(),
            ..*self
        }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexField {
        self.map(|c| c * factor)
    }

    /// ‖self − reference‖₂ / ‖reference‖₂.
    pub fn relative_l2(&self, reference: &ComplexField) -> Result<f64> {
        self.ensure_same_dims(reference)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.data.iter().zip(&reference.data) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        Ok((num / den).sqrt())
    }

    /// Copy of a rectangular window.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<ComplexField> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + width]);
        }
        ComplexField::new(width, height, self.pitch, data)
    }

    /// Values rounded through `f32`, i.e. exactly what the CFLD container stores.
    pub fn quantized_f32(&self) -> ComplexField {
        self.map(|c| Complex64::new(c.re as f32 as f64, c.im as f32 as f64))
    }

}

/// Real-valued image on the same grid conventions as [`ComplexField`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    pitch: f64,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, pitch: f64, data: Vec<f64>) -> Result<Self> {
        check_grid(width, height, pitch, data.len())?;
        Ok(Self {
            width,
            height,
            pitch,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, pitch: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pitch, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pitch: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, pitch, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn with_pitch(mut self, pitch: f64) -> Result<Self> {
        check_grid(self.width, self.height, pitch, self.data.len())?;
        self.pitch = pitch;
        Ok(self)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            pitch: self.pitch,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let var = self.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / self.data.len() as f64;
        var.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_dims(&self, other: &RealImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<RealImage> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + width]);
        }
        RealImage::new(width, height, self.pitch, data)
    }

    /// Periodic translation: `out(x, y) = self(x + dx, y + dy)`.
    pub fn roll(&self, dx: isize, dy: isize) -> RealImage {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..h {
            let sy = (y + dy).rem_euclid(h) as usize;
            for x in 0..w {
                let sx = (x + dx).rem_euclid(w) as usize;
                data.push(self.data[sy * self.width + sx]);
            }
        }
        RealImage { data, ..*self }
    }

    pub fn sqrt(&self) -> RealImage {
        self.map(f64::sqrt)
    }
}

/// Boolean pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Mask {
        Mask {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask {
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
            ..self.clone()
        }
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    pub(crate) fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}

/// Illumination and geometry shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    /// Illumination wavelength, µm.
    pub wavelength: f64,
    /// Nominal sample-to-sensor distance, µm.
    pub z2: f64,
    /// Background refractive index.
    #[serde(default = "default_n0")]
    pub n0: f64,
}

fn default_n0() -> f64 {
    1.0
}

impl OpticalConfig {
    pub fn new(wavelength: f64, z2: f64, n0: f64) -> Result<Self> {
        let cfg = Self { wavelength, z2, n0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.z2.is_finite() && self.z2 > 0.0) {
            return Err(Error::invalid(format!("z2 must be positive, got {}", self.z2)));
        }
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::invalid(format!("n0 must be positive, got {}", self.n0)));
        }
        Ok(())
    }

    pub fn with_z2(self, z2: f64) -> Self {
        Self { z2, ..self }
    }
}

impl Default for OpticalConfig {
    /// 530 nm illumination, 300 µm gap, air.
    fn default() -> Self {
        Self {
            wavelength: 0.53,
            z2: 300.0,
            n0: 1.0,
        }
    }
}
