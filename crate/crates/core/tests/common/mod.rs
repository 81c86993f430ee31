//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use holoforge_core::forward::phantom::{cells, text, CellSpec, TextSpec};
use holoforge_core::forward::Phantom;
use holoforge_core::{Complex64, ComplexField, RealImage};

pub const LAMBDA: f64 = 0.53;
pub const PITCH: f64 = 1.12;

/// Centered Gaussian point emitter with `sigma` in pixels.
pub fn gaussian_emitter(n: usize, pitch: f64, sigma: f64) -> ComplexField {
    let c = n as f64 / 2.0;
    ComplexField::from_fn(n, n, pitch, |x, y| {
        let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
        Complex64::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
    })
    .unwrap()
}

/// Direct Rayleigh–Sommerfeld (first kind) summation over the source grid,
/// `h = z·e^{ikr}·(1 − ikr) / (2π r³)` times the pixel area, with the axial carrier
/// `e^{ikz}` removed to match the propagator's convention.
pub fn rayleigh_sommerfeld(src: &ComplexField, z: f64, wavelength: f64) -> ComplexField {
    let (w, h) = src.dims();
    let p = src.pitch();
    let k = 2.0 * PI / wavelength;
    let area = p * p;
    let carrier = Complex64::from_polar(1.0, -k * z);
    let sources: Vec<(f64, f64, Complex64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| (x as f64 * p, y as f64 * p, src.get(x, y)))
        .filter(|s| s.2.norm() > 1e-14)
        .collect();
    ComplexField::from_fn(w, h, p, |x, y| {
        let (ox, oy) = (x as f64 * p, y as f64 * p);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(sx, sy, u) in &sources {
            let r = ((ox - sx).powi(2) + (oy - sy).powi(2) + z * z).sqrt();
            let kern = Complex64::new(1.0, -k * r) * Complex64::from_polar(z / (2.0 * PI * r * r * r), k * r);
            acc += u * kern;
        }
        acc * area * carrier
    })
    .unwrap()
}

/// Deterministic smooth complex field (a few random-phase Fourier modes).
pub fn smooth_field(n: usize, pitch: f64, seed: u64) -> ComplexField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|i| {
            let t = (seed as f64 + 1.0) * (i as f64 + 1.0);
            (
                ((t * 0.618).fract() * 16.0).floor() - 8.0,
                ((t * 0.414).fract() * 16.0).floor() - 8.0,
                0.05 + 0.1 * (t * 0.732).fract(),
                2.0 * PI * (t * 0.577).fract(),
            )
        })
        .collect();
    ComplexField::from_fn(n, n, pitch, |x, y| {
        let mut v = Complex64::new(1.0, 0.0);
        for &(u, w, a, ph) in &modes {
            let arg = 2.0 * PI * (u * x as f64 + w * y as f64) / n as f64 + ph;
            v += Complex64::from_polar(a, arg);
        }
        v
    })
    .unwrap()
}

/// Dense cell smear with scattering strength ≈ 0.3.
pub fn dense_phantom(n: usize, seed: u64) -> Phantom {
    let spec = CellSpec {
        target_scattering: Some(0.3),
        ..CellSpec::default()
    };
    cells(&spec, n, n, PITCH, seed).unwrap()
}

/// Absorbing text: amplitude contrast gives an unbiased focus criterion.
pub fn text_phantom(n: usize) -> Phantom {
    let spec = TextSpec {
        text: "HOLO 42".into(),
        stroke: 5.0,
        ..TextSpec::default()
    };
    text(&spec, n, n, PITCH).unwrap()
}

pub fn real_part(f: &ComplexField) -> RealImage {
    f.real()
}

/// Shift-and-add prediction for a full `k×k` shift grid with full pixel apertures: the
/// truth convolved with the box autocorrelation, divided by `k⁴` (periodic).
pub fn box_autocorrelation_filter(hr: &RealImage, k: usize) -> RealImage {
    let (w, h) = hr.dims();
    RealImage::from_fn(w, h, hr.pitch(), |x, y| {
        let mut acc = 0.0;
        for a in 0..k {
            for a2 in 0..k {
                for b in 0..k {
                    for b2 in 0..k {
                        acc += hr.get((x + w + b2 - b) % w, (y + h + a2 - a) % h);
                    }
                }
            }
        }
        acc / (k * k * k * k) as f64
    })
    .unwrap()
}
