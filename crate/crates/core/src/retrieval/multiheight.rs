//! Multi-height iterative phase recovery by amplitude averaging.
//!
//! Starting from the TIE estimate at the second-to-last plane, the field is refocused to
//! each plane in turn (last, …, first for the default order). At every plane the
//! amplitude becomes the mean of the current amplitude and `sqrt(I)`, and the phase
//! is kept. One pass over all planes is one iteration. After the final iteration the
//! field is propagated back to the sample plane.

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::tie::{tie_initial_phase, tie_plane_indices};
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};
use crate::forward::{HologramPlane, HologramStack};
use crate::propagation::Propagator;

pub const DEFAULT_ITERATIONS: usize = 50;

/// Order in which planes are revisited within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneOrder {
    /// Farthest plane first, then towards the sample.
    #[default]
    Descending,
    Ascending,
}

/// Stop when the normalized residual improved by less than `tolerance` over `window`
/// consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyExit {
    pub tolerance: f64,
    pub window: usize,
}

impl Default for EarlyExit {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions {
    pub iterations: usize,
    pub use_tie: bool,
    pub order: PlaneOrder,
    pub early_exit: Option<EarlyExit>,
    /// Override the sample-to-first-plane distance (µm); plane separations are kept.
    pub sample_distance: Option<f64>,
    /// Rotate the result so the reference wave has zero phase.
    pub normalize_reference: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            use_tie: true,
            order: PlaneOrder::Descending,
            early_exit: Some(EarlyExit::default()),
            sample_distance: None,
            normalize_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Recovered transmission at the sample plane.
    pub object_field: ComplexField,
    pub iterations_run: usize,
    /// RMS of `|u| − sqrt(I)` over all planes of each iteration, before the update.
    pub per_iteration_residual: Vec<f64>,
    pub heights_used: Vec<f64>,
    /// Distance the field was propagated back to reach the sample plane, µm.
    pub sample_distance: f64,
    pub warnings: Vec<String>,
}

impl ReconstructionResult {
    /// Residuals divided by the mean measured amplitude.
    pub fn normalized_residuals(&self, stack: &HologramStack) -> Vec<f64> {
        let scale = mean_amplitude(stack);
        self.per_iteration_residual.iter().map(|r| r / scale).collect()
    }
}

fn mean_amplitude(stack: &HologramStack) -> f64 {
    let sum: f64 = stack.planes().iter().map(|p| p.intensity.sqrt().mean()).sum();
    sum / stack.len() as f64
}

/// Replace the amplitude by the mean of the current amplitude and `sqrt(intensity)`,
/// keeping the phase. Where the field is exactly zero the phase is taken as zero.
pub fn amplitude_update(field: &ComplexField, intensity: &RealImage) -> Result<ComplexField> {
    if field.dims() != intensity.dims() {
        return Err(Error::DimensionMismatch {
            expected: field.dims(),
            actual: intensity.dims(),
        });
    }
    let data = field
        .data()
        .iter()
        .zip(intensity.data())
        .map(|(&u, &i)| {
            let a = u.norm();
            let target = 0.5 * (a + i.sqrt());
            if a > 0.0 {
                u * (target / a)
            } else {
                Complex64::new(target, 0.0)
            }
        })
        .collect();
    ComplexField::new(field.width(), field.height(), field.pitch(), data)
}

fn rms_mismatch(field: &ComplexField, intensity: &RealImage) -> f64 {
    let n = field.data().len() as f64;
    let ss: f64 = field
        .data()
        .iter()
        .zip(intensity.data())
        .map(|(u, &i)| (u.norm() - i.sqrt()).powi(2))
        .sum();
    (ss / n).sqrt()
}

/// Refocus `field` from `from_z` to `plane.z` and apply the amplitude update there.
/// Returns the updated field and the RMS amplitude mismatch before the update.
pub fn iterate_once(
    prop: &Propagator,
    field: &ComplexField,
    from_z: f64,
    plane: &HologramPlane,
) -> Result<(ComplexField, f64)> {
    let moved = prop.propagate(field, plane.z - from_z)?;
    let residual = rms_mismatch(&moved, &plane.intensity);
    Ok((amplitude_update(&moved, &plane.intensity)?, residual))
}

/// Remove the global phase so the reference wave sits at zero phase.
///
/// The reference phase is the median of the wrapped phase, measured around the phase
/// of the mean field; the background dominates the median for sparse-to-moderately
/// dense specimens.
pub fn normalize_reference_phase(field: &ComplexField) -> ComplexField {
    let mean: Complex64 = field.data().iter().sum::<Complex64>() / field.data().len() as f64;
    let center = if mean.norm() > 0.0 { mean.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -center);
    let mut phases: Vec<f64> = field
        .data()
        .iter()
        .filter(|c| c.norm() > 0.0)
        .map(|c| (c * rot).arg())
        .collect();
    if phases.is_empty() {
        return field.clone();
    }
    let median = crate::metrics::median(&mut phases);
    field.scale(Complex64::from_polar(1.0, -(center + median)))
}

fn visit_order(len: usize, order: PlaneOrder) -> Vec<usize> {
    match order {
        PlaneOrder::Descending => (0..len).rev().collect(),
        PlaneOrder::Ascending => (0..len).collect(),
    }
}

/// Multi-height phase recovery over every plane in `stack`.
pub fn multiheight_recover(stack: &HologramStack, opts: &RecoveryOptions) -> Result<ReconstructionResult> {
    let stack = match opts.sample_distance {
        Some(z) => stack.rebased(z)?,
        None => stack.clone(),
    };
    let planes = stack.planes();
    let mut warnings = Vec::new();
    if planes.len() < 2 {
        let msg = "single-plane stack: recovery reduces to back-propagation".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    let (w, h) = stack.dims();
    let prop = Propagator::for_grid(w, h, stack.pitch(), stack.cfg())?;
    let order = visit_order(planes.len(), opts.order);

    let tie_ready = opts.use_tie && planes.len() >= 3;
    if opts.use_tie && !tie_ready {
        debug!("TIE initialization skipped for {} planes", planes.len());
    }
    let (mut field, mut z) = if tie_ready {
        let (_, anchor, _) = tie_plane_indices(planes.len())?;
        (tie_initial_phase(&stack)?, planes[anchor].z)
    } else {
        let start = &planes[order[0]];
        (ComplexField::from_amplitude(&start.intensity.sqrt()), start.z)
    };

    let scale = mean_amplitude(&stack);
    let mut residuals: Vec<f64> = Vec::with_capacity(opts.iterations);
    for iter in 0..opts.iterations {
        let mut ss = 0.0;
        for &idx in &order {
            let (next, r) = iterate_once(&prop, &field, z, &planes[idx])?;
            field = next;
            z = planes[idx].z;
            ss += r * r;
        }
        field.ensure_finite("multi-height iterate")?;
        let r = (ss / order.len() as f64).sqrt();
        if iter >= 5 && residuals.last().is_some_and(|&prev| r > prev * (1.0 + 1e-9)) {
            debug!("residual rose at iteration {iter}: {r:.3e}");
        }
        residuals.push(r);
        if let Some(exit) = opts.early_exit {
            let n = residuals.len();
            if exit.window > 0 && n > exit.window {
                let gain = (residuals[n - 1 - exit.window] - residuals[n - 1]) / scale;
                if gain < exit.tolerance {
                    debug!("early exit after {n} iterations");
                    break;
                }
            }
        }
    }

    let sample_distance = z;
    let mut object = prop.propagate(&field, -sample_distance)?;
    if opts.normalize_reference {
        object = normalize_reference_phase(&object);
    }
    object.ensure_finite("recovered object")?;
    Ok(ReconstructionResult {
        object_field: object,
        iterations_run: residuals.len(),
        per_iteration_residual: residuals,
        heights_used: stack.heights(),
        sample_distance,
        warnings,
    })
}
