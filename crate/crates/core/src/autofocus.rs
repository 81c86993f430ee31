//! Sample-to-sensor distance estimation from a single hologram.
//!
//! The criterion is the mean absolute axial derivative of the back-propagated magnitude,
//! `mean |∂|u_z|/∂z|`, estimated by a central difference. It is smallest at focus.
//! A coarse scan locates the basin; golden-section search refines it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, OpticalConfig, RealImage};
use crate::propagation::{check_intensity, Propagator};

/// Central-difference half step, µm.
pub const DIFFERENCE_STEP: f64 = 0.5;
/// Golden-section termination width, µm.
pub const REFINE_TOLERANCE: f64 = 0.01;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseScan {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for CoarseScan {
    fn default() -> Self {
        Self {
            start: 100.0,
            stop: 800.0,
            step: 10.0,
        }
    }
}

impl CoarseScan {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let scan = Self { start, stop, step };
        scan.validate()?;
        Ok(scan)
    }

    fn validate(&self) -> Result<()> {
        if !(self.start > DIFFERENCE_STEP && self.stop > self.start && self.step > 0.0) {
            return Err(Error::invalid(format!(
                "coarse scan ({}, {}, {}) must satisfy {DIFFERENCE_STEP} < start < stop, step > 0",
                self.start, self.stop, self.step
            )));
        }
        if self.points().len() < 3 {
            return Err(Error::invalid("coarse scan needs at least three samples"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocusScanResult {
    pub z_best: f64,
    /// `(z, score)` over the coarse grid.
    pub criterion_curve: Vec<(f64, f64)>,
    /// Golden-section brackets `(lo, hi)`, starting with the initial one.
    pub refinement_history: Vec<(f64, f64)>,
    /// Set when the criterion was not unimodal around the coarse minimum.
    pub warning: Option<String>,
}

impl FocusScanResult {
    pub fn final_bracket_width(&self) -> f64 {
        self.refinement_history.last().map_or(f64::INFINITY, |(a, b)| b - a)
    }
}

/// Focus criterion bound to one sensor-plane wave; the forward spectrum is computed once.
pub struct FocusCriterion {
    prop: Propagator,
    spectrum: Vec<Complex64>,
}

impl FocusCriterion {
    /// Back-propagate `sqrt(intensity)` as a zero-phase wave.
    pub fn from_intensity(intensity: &RealImage, cfg: &OpticalConfig) -> Result<Self> {
        check_intensity(intensity)?;
        Self::from_field(&ComplexField::from_amplitude(&intensity.sqrt()), cfg)
    }

    /// Use a complex sensor-plane wave, e.g. a phase-recovered field.
    pub fn from_field(field: &ComplexField, cfg: &OpticalConfig) -> Result<Self> {
        field.ensure_finite("autofocus input")?;
        let prop = Propagator::for_field(field, cfg)?;
        let mut spectrum = field.data().to_vec();
        prop.fft().forward(&mut spectrum);
        Ok(Self { prop, spectrum })
    }

    pub fn score(&self, z: f64) -> Result<f64> {
        if !(z > DIFFERENCE_STEP) {
            return Err(Error::invalid(format!("focus distance {z} µm must exceed {DIFFERENCE_STEP} µm")));
        }
        let near = self.prop.propagate_spectrum(&self.spectrum, -(z - DIFFERENCE_STEP))?;
        let far = self.prop.propagate_spectrum(&self.spectrum, -(z + DIFFERENCE_STEP))?;
        let n = near.data().len() as f64;
        let sum: f64 = near
            .data()
            .iter()
            .zip(far.data())
            .map(|(a, b)| (b.norm() - a.norm()).abs())
            .sum();
        let score = sum / n / (2.0 * DIFFERENCE_STEP);
        if !score.is_finite() {
            return Err(Error::NonFinite("focus criterion"));
        }
        Ok(score)
    }
}

pub fn focus_criterion(intensity: &RealImage, z: f64, cfg: &OpticalConfig) -> Result<f64> {
    FocusCriterion::from_intensity(intensity, cfg)?.score(z)
}

/// Number of golden-section probes needed to shrink `width` below `tol`.
pub fn golden_iterations(width: f64, tol: f64) -> usize {
    ((width / tol).ln() / (1.0 / INV_PHI).ln()).ceil().max(0.0) as usize
}

/// Search interval `(lo, hi)`, µm.
pub type Bracket = (f64, f64);

/// Minimize `f` on `[lo, hi]` until the bracket is narrower than `tol`.
/// Returns the final midpoint, its score, and every bracket visited.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64, Vec<Bracket>)> {
    let (mut a, mut b) = (lo, hi);
    let mut history = vec![(a, b)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a >= tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        history.push((a, b));
    }
    let mid = 0.5 * (a + b);
    Ok((mid, f(mid)?, history))
}

pub fn autofocus(intensity: &RealImage, cfg: &OpticalConfig, coarse: &CoarseScan) -> Result<FocusScanResult> {
    let c = FocusCriterion::from_intensity(intensity, cfg)?;
    scan_and_refine(|z| c.score(z), coarse)
}

/// Autofocus on a complex sensor-plane wave.
pub fn autofocus_field(field: &ComplexField, cfg: &OpticalConfig, coarse: &CoarseScan) -> Result<FocusScanResult> {
    let c = FocusCriterion::from_field(field, cfg)?;
    scan_and_refine(|z| c.score(z), coarse)
}

/// Re-estimate the distance after multi-height recovery: the recovered object field is
/// re-propagated to the sensor and autofocus is re-run on that intensity, scanning
/// `±half_width` µm around the current estimate in `step` increments.
pub fn refine_after_recovery(
    object_field: &ComplexField,
    cfg: &OpticalConfig,
    half_width: f64,
    step: f64,
) -> Result<FocusScanResult> {
    let sensor = Propagator::for_field(object_field, cfg)?.propagate(object_field, cfg.z2)?;
    let scan = CoarseScan::new(
        (cfg.z2 - half_width).max(DIFFERENCE_STEP + step),
        cfg.z2 + half_width,
        step,
    )?;
    autofocus(&sensor.intensity(), cfg, &scan)
}

/// Coarse scan of `score` followed by golden-section refinement between the neighbors
/// of the coarse minimum.
pub fn scan_and_refine(score: impl Fn(f64) -> Result<f64> + Sync, coarse: &CoarseScan) -> Result<FocusScanResult> {
    coarse.validate()?;
    let zs = coarse.points();
    let scores: Vec<f64> = zs
        .par_iter()
        .map(|&z| score(z))
        .collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = zs.iter().copied().zip(scores.iter().copied()).collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("scan has samples");

    let mut warning = None;
    if best == 0 || best == zs.len() - 1 {
        warning = Some(format!(
            "criterion minimum at scan edge z = {} µm; true focus may lie outside the range",
            zs[best]
        ));
    }
    let lo = zs[best.saturating_sub(1)];
    let hi = zs[(best + 1).min(zs.len() - 1)];
    let (z_ref, s_ref, history) = golden_section(&score, lo, hi, REFINE_TOLERANCE)?;

    let z_best = if s_ref <= scores[best] {
        z_ref
    } else {
        warning.get_or_insert_with(|| {
            format!(
                "criterion not unimodal in [{lo}, {hi}] µm; returning coarse minimum {} µm",
                zs[best]
            )
        });
        zs[best]
    };
    if warning.is_some() {
        log::warn!("autofocus: {}", warning.as_deref().unwrap_or_default());
    }
    Ok(FocusScanResult {
        z_best,
        criterion_curve: curve,
        refinement_history: history,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::phantom::{text, TextSpec};
    use crate::forward::synthesize_hologram;
    use crate::forward::Phantom;

    fn cfg(z2: f64) -> OpticalConfig {
        OpticalConfig::new(0.53, z2, 1.0).unwrap()
    }

    fn hologram(z2: f64) -> RealImage {
        let p = text(&TextSpec::default(), 128, 128, 1.12).unwrap();
        synthesize_hologram(&p, z2, &cfg(z2)).unwrap()
    }

    #[test]
    fn criterion_is_continuous() {
        let holo = hologram(300.0);
        let c = FocusCriterion::from_intensity(&holo, &cfg(300.0)).unwrap();
        let (a, b) = (c.score(350.0).unwrap(), c.score(350.01).unwrap());
        assert!((a - b).abs() < 1e-3 * a, "{a} {b}");
        assert!(c.score(0.2).is_err());
    }

    #[test]
    fn coarse_argmin_near_synthesis_distance() {
        let holo = hologram(400.0);
        let r = autofocus(&holo, &cfg(400.0), &CoarseScan::default()).unwrap();
        let (z, _) = r
            .criterion_curve
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!((z - 400.0).abs() <= 10.0, "{z}");
        assert!((r.z_best - 400.0).abs() <= 1.0, "{}", r.z_best);
        assert!(r.warning.is_none());
    }

    #[test]
    fn free_space_curve_is_flat() {
        let p = Phantom::free_space(64, 64, 1.12).unwrap();
        let holo = synthesize_hologram(&p, 300.0, &cfg(300.0)).unwrap();
        let r = autofocus(&holo, &cfg(300.0), &CoarseScan::default()).unwrap();
        assert!(r.criterion_curve.iter().all(|(_, s)| s.abs() < 1e-12));
    }

    #[test]
    fn golden_section_iteration_count() {
        let (z, _, hist) = golden_section(|x| Ok((x - 3.3).powi(2)), 0.0, 20.0, 0.01).unwrap();
        assert_eq!(hist.len() - 1, golden_iterations(20.0, 0.01));
        assert_eq!(golden_iterations(20.0, 0.01), 16);
        for w in hist.windows(2) {
            let ratio = (w[1].1 - w[1].0) / (w[0].1 - w[0].0);
            assert!((ratio - INV_PHI).abs() < 1e-9);
        }
        assert!((z - 3.3).abs() < 0.01);
    }

    #[test]
    fn whole_pixel_translation_does_not_move_focus() {
        let holo = hologram(500.0);
        let a = autofocus(&holo, &cfg(500.0), &CoarseScan::default()).unwrap();
        let b = autofocus(&holo.roll(7, -3), &cfg(500.0), &CoarseScan::default()).unwrap();
        assert!((a.z_best - b.z_best).abs() < 0.05);
    }

    #[test]
    fn edge_minimum_warns() {
        let r = scan_and_refine(|z| Ok((z - 300.0).abs()), &CoarseScan::new(400.0, 600.0, 10.0).unwrap()).unwrap();
        assert!(r.warning.is_some());
        assert!(r.z_best >= 400.0 && r.z_best <= 410.0);
    }

    #[test]
    fn non_unimodal_bracket_returns_coarse_minimum() {
        // isolated dip on a coarse sample, invisible to the refinement probes
        let f = |z: f64| Ok(if (z - 200.0).abs() < 1e-6 { 0.0 } else { 1.0 + (z - 196.0).abs() * 1e-3 });
        let r = scan_and_refine(f, &CoarseScan::new(100.0, 300.0, 10.0).unwrap()).unwrap();
        assert_eq!(r.z_best, 200.0);
        assert!(r.warning.is_some());
    }

    #[test]
    fn smooth_synthetic_criterion_is_refined() {
        let r = scan_and_refine(|z| Ok((z - 512.345).powi(2)), &CoarseScan::default()).unwrap();
        assert!((r.z_best - 512.345).abs() < 0.01);
        assert!(r.final_bracket_width() < REFINE_TOLERANCE);
        assert_eq!(r.refinement_history.len() - 1, 16);
    }

    #[test]
    fn rejects_bad_scan() {
        assert!(CoarseScan::new(100.0, 50.0, 10.0).is_err());
        assert!(CoarseScan::new(100.0, 110.0, 10.0).is_err());
        assert!(CoarseScan::new(0.1, 110.0, 10.0).is_err());
    }
}
