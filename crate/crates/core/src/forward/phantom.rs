//! Procedural transmission phantoms: cell smears, Voronoi tissue and rasterized text.
//!
//! Every generator is a pure function of its spec and seed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::{glyph, GLYPH_H, GLYPH_W};
use crate::error::{Error, Result};
use crate::fft::{frequencies, Fft2};
use crate::field::{ComplexField, Mask, RealImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    CellLike,
    TissueLike,
    Text,
}

/// Complex transmission `t(x, y)` with `|t| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    transmission: ComplexField,
    kind: PhantomKind,
    /// Pixels that belong to an object; empty for free space.
    support: Mask,
}

impl Phantom {
    pub fn new(transmission: ComplexField, kind: PhantomKind) -> Result<Self> {
        transmission.ensure_finite("phantom transmission")?;
        if let Some(c) = transmission.data().iter().find(|c| c.norm() > 1.0 + 1e-12) {
            return Err(Error::invalid(format!("transmission modulus {} exceeds 1", c.norm())));
        }
        let (w, h) = transmission.dims();
        let support = Mask::new(
            w,
            h,
            transmission.data().iter().map(|c| (c - 1.0).norm() > 1e-9).collect(),
        )?;
        Ok(Self {
            transmission,
            kind,
            support,
        })
    }

    /// Empty field, `t ≡ 1`.
    pub fn free_space(width: usize, height: usize, pitch: f64) -> Result<Self> {
        Self::new(
            ComplexField::constant(width, height, pitch, Complex64::new(1.0, 0.0))?,
            PhantomKind::CellLike,
        )
    }

    pub fn transmission(&self) -> &ComplexField {
        &self.transmission
    }

    pub fn kind(&self) -> PhantomKind {
        self.kind
    }

    pub fn support(&self) -> &Mask {
        &self.support
    }

    pub fn dims(&self) -> (usize, usize) {
        self.transmission.dims()
    }

    pub fn pitch(&self) -> f64 {
        self.transmission.pitch()
    }

    /// RMS of `|t − 1|`, the scattered-to-reference ratio for a unit reference wave.
    pub fn scattering_strength(&self) -> f64 {
        let d = self.transmission.data();
        (d.iter().map(|c| (c - 1.0).norm_sqr()).sum::<f64>() / d.len() as f64).sqrt()
    }
}

/// Disk-shaped cells on an empty background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSpec {
    /// Diameter range, µm.
    pub diameter: (f64, f64),
    /// Peak phase range, rad.
    pub phase: (f64, f64),
    /// Peak amplitude drop inside a cell, in `[0, 1]`.
    pub absorption: f64,
    /// Width of the soft cell boundary, µm.
    pub edge: f64,
    /// Fixed number of cells. Ignored when `target_scattering` is set.
    pub count: usize,
    /// Keep adding cells until the scattering strength reaches this value.
    pub target_scattering: Option<f64>,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            diameter: (6.0, 10.0),
            phase: (1.0, 3.0),
            absorption: 0.1,
            edge: 1.0,
            count: 40,
            target_scattering: None,
        }
    }
}

/// Voronoi-textured tissue section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TissueSpec {
    /// Mean cell spacing, µm.
    pub cell_size: f64,
    pub phase: (f64, f64),
    pub amplitude: (f64, f64),
    /// Amplitude multiplier applied on cell boundaries.
    pub boundary_amplitude: f64,
    /// Boundary half-width, µm.
    pub boundary_width: f64,
    /// Gaussian smoothing of the maps, µm.
    pub smoothing: f64,
}

impl Default for TissueSpec {
    fn default() -> Self {
        Self {
            cell_size: 12.0,
            phase: (0.2, 1.2),
            amplitude: (0.7, 1.0),
            boundary_amplitude: 0.8,
            boundary_width: 0.8,
            smoothing: 0.8,
        }
    }
}

/// Absorbing text, centered in the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextSpec {
    pub text: String,
    /// Size of one font cell, µm.
    pub stroke: f64,
    /// Transmission amplitude of the ink.
    pub ink_amplitude: f64,
    /// Phase delay of the ink, rad.
    pub ink_phase: f64,
}

impl Default for TextSpec {
    fn default() -> Self {
        Self {
            text: "HOLO".into(),
            stroke: 4.0,
            ink_amplitude: 0.3,
            ink_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhantomSpec {
    CellLike(CellSpec),
    TissueLike(TissueSpec),
    Text(TextSpec),
    FreeSpace,
}

impl PhantomSpec {
    pub fn generate(&self, width: usize, height: usize, pitch: f64, seed: u64) -> Result<Phantom> {
        match self {
            PhantomSpec::CellLike(s) => cells(s, width, height, pitch, seed),
            PhantomSpec::TissueLike(s) => tissue(s, width, height, pitch, seed),
            PhantomSpec::Text(s) => text(s, width, height, pitch),
            PhantomSpec::FreeSpace => Phantom::free_space(width, height, pitch),
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.0 <= r.1) {
        return Err(Error::invalid(format!("{name} range {r:?} is not ordered")));
    }
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.random_range(r.0..r.1)
    }
}

/// Generate a cell smear. Cells never overlap; placement uses periodic distances so the
/// phantom tiles seamlessly, matching the periodic propagation model.
pub fn cells(spec: &CellSpec, width: usize, height: usize, pitch: f64, seed: u64) -> Result<Phantom> {
    check_range("diameter", spec.diameter)?;
    check_range("phase", spec.phase)?;
    if spec.diameter.0 <= 0.0 || !(0.0..=1.0).contains(&spec.absorption) || spec.edge <= 0.0 {
        return Err(Error::invalid("cell spec: diameter and edge must be positive, absorption in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lx, ly) = (width as f64 * pitch, height as f64 * pitch);
    let mut profile = vec![0.0f64; width * height];
    let mut phase = vec![0.0f64; width * height];
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let n = width * height;
    let mut sum_sq = 0.0;
    let done = |placed: usize, sum_sq: f64| match spec.target_scattering {
        Some(target) => (sum_sq / n as f64).sqrt() >= target,
        None => placed >= spec.count,
    };
    let wrap = |d: f64, l: f64| d - l * (d / l).round();
    let mut attempts = 0usize;
    while !done(placed.len(), sum_sq) {
        attempts += 1;
        if attempts > 200_000 {
            return Err(Error::invalid("cell spec: could not place cells without overlap"));
        }
        let cx = rng.random_range(0.0..lx);
        let cy = rng.random_range(0.0..ly);
        let d = sample(&mut rng, spec.diameter);
        let peak = sample(&mut rng, spec.phase);
        let r_outer = d / 2.0 + spec.edge / 2.0;
        let clear = placed.iter().all(|&(px, py, pr)| {
            let (dx, dy) = (wrap(cx - px, lx), wrap(cy - py, ly));
            (dx * dx + dy * dy).sqrt() > r_outer + pr
        });
        if !clear {
            continue;
        }
        placed.push((cx, cy, r_outer));
        let reach = (r_outer / pitch).ceil() as isize + 1;
        let (ix, iy) = ((cx / pitch) as isize, (cy / pitch) as isize);
        for oy in -reach..=reach {
            for ox in -reach..=reach {
                let px = (ix + ox).rem_euclid(width as isize) as usize;
                let py = (iy + oy).rem_euclid(height as isize) as usize;
                let dx = wrap((px as f64 + 0.5) * pitch - cx, lx);
                let dy = wrap((py as f64 + 0.5) * pitch - cy, ly);
                let r = (dx * dx + dy * dy).sqrt();
                let p = ((d / 2.0 - r) / spec.edge + 0.5).clamp(0.0, 1.0);
                if p > 0.0 {
                    let i = py * width + px;
                    let before = cell_transmission(profile[i], phase[i], spec.absorption);
                    profile[i] = p;
                    phase[i] = peak * p;
                    let after = cell_transmission(profile[i], phase[i], spec.absorption);
                    sum_sq += (after - 1.0).norm_sqr() - (before - 1.0).norm_sqr();
                }
            }
        }
    }
    let data = profile
        .iter()
        .zip(&phase)
        .map(|(&p, &ph)| cell_transmission(p, ph, spec.absorption))
        .collect();
    Phantom::new(ComplexField::new(width, height, pitch, data)?, PhantomKind::CellLike)
}

fn cell_transmission(profile: f64, phase: f64, absorption: f64) -> Complex64 {
    Complex64::from_polar(1.0 - absorption * profile, phase)
}

/// Generate a Voronoi tissue section with darkened cell boundaries.
pub fn tissue(spec: &TissueSpec, width: usize, height: usize, pitch: f64, seed: u64) -> Result<Phantom> {
    check_range("phase", spec.phase)?;
    check_range("amplitude", spec.amplitude)?;
    if spec.cell_size <= 0.0 || spec.amplitude.0 < 0.0 || spec.amplitude.1 > 1.0 {
        return Err(Error::invalid("tissue spec: cell size positive, amplitudes in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lx, ly) = (width as f64 * pitch, height as f64 * pitch);
    let count = ((lx * ly) / (spec.cell_size * spec.cell_size)).ceil().max(1.0) as usize;
    let seeds: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.0..lx),
                rng.random_range(0.0..ly),
                sample(&mut rng, spec.phase),
                sample(&mut rng, spec.amplitude),
            )
        })
        .collect();
    let wrap = |d: f64, l: f64| d - l * (d / l).round();
    let mut amp = vec![0.0; width * height];
    let mut phs = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let (px, py) = ((x as f64 + 0.5) * pitch, (y as f64 + 0.5) * pitch);
            let (mut d1, mut d2, mut best) = (f64::INFINITY, f64::INFINITY, 0);
            for (k, s) in seeds.iter().enumerate() {
                let (dx, dy) = (wrap(px - s.0, lx), wrap(py - s.1, ly));
                let d = (dx * dx + dy * dy).sqrt();
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    best = k;
                } else if d < d2 {
                    d2 = d;
                }
            }
            let i = y * width + x;
            let boundary = (d2 - d1) / 2.0 < spec.boundary_width;
            amp[i] = seeds[best].3 * if boundary { spec.boundary_amplitude } else { 1.0 };
            phs[i] = seeds[best].2;
        }
    }
    let sigma = spec.smoothing / pitch;
    let amp = gaussian_blur(&RealImage::new(width, height, pitch, amp)?, sigma);
    let phs = gaussian_blur(&RealImage::new(width, height, pitch, phs)?, sigma);
    let amp = amp.map(|a| a.clamp(0.0, 1.0));
    Phantom::new(ComplexField::from_polar(&amp, &phs)?, PhantomKind::TissueLike)
}

/// Rasterize `spec.text` with the built-in 5×7 font, one glyph cell per `stroke` µm.
pub fn text(spec: &TextSpec, width: usize, height: usize, pitch: f64) -> Result<Phantom> {
    if !(0.0..=1.0).contains(&spec.ink_amplitude) || spec.stroke <= 0.0 {
        return Err(Error::invalid("text spec: ink amplitude in [0, 1], stroke positive"));
    }
    let glyphs: Vec<[u8; GLYPH_H]> = spec
        .text
        .chars()
        .map(|c| glyph(c).ok_or_else(|| Error::invalid(format!("no glyph for {c:?}"))))
        .collect::<Result<_>>()?;
    let cols = glyphs.len() * (GLYPH_W + 1);
    let (tw, th) = (cols as f64 * spec.stroke, GLYPH_H as f64 * spec.stroke);
    let (lx, ly) = (width as f64 * pitch, height as f64 * pitch);
    if tw > lx || th > ly {
        return Err(Error::invalid("text does not fit in the frame"));
    }
    let (x0, y0) = ((lx - tw) / 2.0, (ly - th) / 2.0);
    let ink = Complex64::from_polar(spec.ink_amplitude, spec.ink_phase);
    let t = ComplexField::from_fn(width, height, pitch, |x, y| {
        let (px, py) = ((x as f64 + 0.5) * pitch - x0, (y as f64 + 0.5) * pitch - y0);
        if px < 0.0 || py < 0.0 || px >= tw || py >= th {
            return Complex64::new(1.0, 0.0);
        }
        let col = (px / spec.stroke) as usize;
        let row = (py / spec.stroke) as usize;
        let (g, gx) = (col / (GLYPH_W + 1), col % (GLYPH_W + 1));
        if gx < GLYPH_W && glyphs[g][row] >> (GLYPH_W - 1 - gx) & 1 == 1 {
            ink
        } else {
            Complex64::new(1.0, 0.0)
        }
    })?;
    Phantom::new(t, PhantomKind::Text)
}

/// Periodic Gaussian blur with standard deviation `sigma` in pixels.
pub(crate) fn gaussian_blur(image: &RealImage, sigma: f64) -> RealImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let (w, h) = image.dims();
    let fft = Fft2::new(w, h);
    let mut data: Vec<Complex64> = image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut data);
    let fx = frequencies(w, 1.0);
    let fy = frequencies(h, 1.0);
    for (j, v) in fy.iter().enumerate() {
        for (i, u) in fx.iter().enumerate() {
            data[j * w + i] *= (-2.0 * PI * PI * sigma * sigma * (u * u + v * v)).exp();
        }
    }
    fft.inverse(&mut data);
    RealImage::new(w, h, image.pitch(), data.iter().map(|c| c.re).collect())
        .expect("blur preserves the grid")
}
