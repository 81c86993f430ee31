//! In-line hologram synthesis: `I = |A + a|²` with a unit, zero-phase reference `A`.

mod font;
pub mod phantom;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{OpticalConfig, RealImage};
use crate::propagation::{check_intensity, fourier_shift, Propagator};

pub use phantom::{CellSpec, Phantom, PhantomKind, PhantomSpec, TextSpec, TissueSpec};

/// Sensor offsets relative to the first height, µm: 1st…8th heights.
pub const STANDARD_HEIGHT_OFFSETS: [f64; 8] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 180.0];

/// Absolute sensor distances for the standard eight-height schedule.
pub fn standard_heights(z2: f64) -> Vec<f64> {
    STANDARD_HEIGHT_OFFSETS.iter().map(|o| z2 + o).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HologramPlane {
    pub intensity: RealImage,
    /// Sample-to-sensor distance of this plane, µm.
    pub z: f64,
}

/// Co-registered holograms at increasing sample-to-sensor distances.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramStack {
    planes: Vec<HologramPlane>,
    cfg: OpticalConfig,
    /// Lateral sensor offset `(dx, dy)`, µm.
    shift: (f64, f64),
}

impl HologramStack {
    pub fn new(planes: Vec<HologramPlane>, cfg: OpticalConfig, shift: (f64, f64)) -> Result<Self> {
        cfg.validate()?;
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("hologram stack has no planes"))?;
        let dims = first.intensity.dims();
        let pitch = first.intensity.pitch();
        for (i, p) in planes.iter().enumerate() {
            if p.intensity.dims() != dims || p.intensity.pitch() != pitch {
                return Err(Error::invalid(format!("plane {i} has a different grid")));
            }
            check_intensity(&p.intensity)?;
            if !(p.z.is_finite() && p.z > 0.0) {
                return Err(Error::invalid(format!("plane {i} has non-positive z = {}", p.z)));
            }
            if i > 0 && p.z <= planes[i - 1].z {
                return Err(Error::invalid(format!(
                    "plane distances must be strictly increasing (plane {i}: {} after {})",
                    p.z,
                    planes[i - 1].z
                )));
            }
        }
        Ok(Self { planes, cfg, shift })
    }

    pub fn planes(&self) -> &[HologramPlane] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn cfg(&self) -> &OpticalConfig {
        &self.cfg
    }

    pub fn shift(&self) -> (f64, f64) {
        self.shift
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].intensity.dims()
    }

    pub fn pitch(&self) -> f64 {
        self.planes[0].intensity.pitch()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.z).collect()
    }

    /// The first `k` planes (the `N_holo = k` measurement set).
    pub fn truncated(&self, k: usize) -> Result<HologramStack> {
        if k == 0 || k > self.planes.len() {
            return Err(Error::invalid(format!(
                "cannot take {k} planes from a stack of {}",
                self.planes.len()
            )));
        }
        Ok(HologramStack {
            planes: self.planes[..k].to_vec(),
            ..self.clone()
        })
    }

    /// Same measurements with every distance moved so the first plane sits at `z_first`.
    pub fn rebased(&self, z_first: f64) -> Result<HologramStack> {
        let offset = z_first - self.planes[0].z;
        let planes = self
            .planes
            .iter()
            .map(|p| HologramPlane {
                intensity: p.intensity.clone(),
                z: p.z + offset,
            })
            .collect();
        HologramStack::new(planes, self.cfg.with_z2(z_first), self.shift)
    }
}

fn check_z(z: f64) -> Result<()> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("hologram distance must be positive, got {z}")));
    }
    Ok(())
}

/// Hologram of `phantom` recorded `z` µm downstream.
pub fn synthesize_hologram(phantom: &Phantom, z: f64, cfg: &OpticalConfig) -> Result<RealImage> {
    check_z(z)?;
    let prop = Propagator::for_field(phantom.transmission(), cfg)?;
    Ok(prop.propagate(phantom.transmission(), z)?.intensity())
}

/// One hologram per height, sampled on a sensor grid offset laterally by `shift` (µm).
pub fn synthesize_stack(
    phantom: &Phantom,
    heights: &[f64],
    cfg: &OpticalConfig,
    shift: (f64, f64),
) -> Result<HologramStack> {
    if heights.is_empty() {
        return Err(Error::invalid("no heights given"));
    }
    for w in heights.windows(2) {
        if w[1] == w[0] {
            return Err(Error::invalid(format!("duplicate height {}", w[0])));
        }
        if w[1] < w[0] {
            return Err(Error::invalid("heights must be sorted ascending"));
        }
    }
    heights.iter().try_for_each(|&z| check_z(z))?;
    let t = phantom.transmission();
    let prop = Propagator::for_field(t, cfg)?;
    let shifted = fourier_shift(t, shift.0, shift.1)?;
    let planes = heights
        .iter()
        .map(|&z| {
            Ok(HologramPlane {
                intensity: prop.propagate(&shifted, z)?.intensity(),
                z,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HologramStack::new(planes, *cfg, shift)
}

/// Pixel-aperture integration: `k × k` block mean.
pub fn sensor_downsample(image: &RealImage, k: usize) -> Result<RealImage> {
    let (w, h) = image.dims();
    if k == 0 || w % k != 0 || h % k != 0 {
        return Err(Error::invalid(format!("factor {k} does not divide {w}x{h}")));
    }
    if k == 1 {
        return Ok(image.clone());
    }
    let (lw, lh) = (w / k, h / k);
    let norm = 1.0 / (k * k) as f64;
    let src = image.data();
    let mut out = vec![0.0; lw * lh];
    for (j, row) in out.chunks_mut(lw).enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for y in j * k..(j + 1) * k {
                acc += src[y * w + i * k..y * w + (i + 1) * k].iter().sum::<f64>();
            }
            *v = acc * norm;
        }
    }
    RealImage::new(lw, lh, image.pitch() * k as f64, out)
}

/// Optional detection noise. The default is noise-free.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Mean photon count for unit intensity; enables Poisson shot noise.
    pub photons: Option<f64>,
    /// Standard deviation of additive Gaussian read noise, in intensity units.
    pub read_sigma: f64,
}

impl NoiseModel {
    pub fn is_clean(&self) -> bool {
        self.photons.is_none() && self.read_sigma == 0.0
    }

    /// Noisy copy of `image`, clamped at zero.
    pub fn apply(&self, image: &RealImage, seed: u64) -> Result<RealImage> {
        if self.is_clean() {
            return Ok(image.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let read = Normal::new(0.0, self.read_sigma.max(0.0))
            .map_err(|e| Error::invalid(format!("read noise: {e}")))?;
        let mut out = image.clone();
        for v in out.data_mut() {
            if let Some(n) = self.photons {
                if !(n > 0.0) {
                    return Err(Error::invalid("photon count must be positive"));
                }
                let mean = (*v * n).max(0.0);
                *v = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::invalid(format!("shot noise: {e}")))?
                        .sample(&mut rng)
                        / n
                } else {
                    0.0
                };
            }
            if self.read_sigma > 0.0 {
                *v = (*v + read.sample(&mut rng)).max(0.0);
            }
        }
        Ok(out)
    }
}

/// Scattered wave at distance `z`: `a = propagate(A·(t − 1), z)` with `A = 1`.
pub fn scattered_wave(phantom: &Phantom, z: f64, cfg: &OpticalConfig) -> Result<crate::ComplexField> {
    let t = phantom.transmission();
    let prop = Propagator::for_field(t, cfg)?;
    prop.propagate(&t.map(|c| c - Complex64::new(1.0, 0.0)), z)
}
