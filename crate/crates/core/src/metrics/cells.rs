//! Per-cell phase integral and effective refractive volume.
//!
//! `p = |Σ_S φ|·Δx²` (rad·µm²) and `Ṽ = p·λ / 2π` (µm³ = fL).

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::Serialize;

use super::median;
use crate::error::{Error, Result};
use crate::field::{Mask, RealImage};

/// Components smaller than this are discarded by [`segment_cells`].
pub const MIN_CELL_PIXELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellMeasurement {
    pub cell_id: usize,
    /// µm².
    pub area: f64,
    /// rad·µm².
    pub phase_integral: f64,
    /// fL.
    pub effective_refractive_volume: f64,
}

pub fn phase_integral(phase: &RealImage, mask: &Mask, pitch: f64) -> Result<f64> {
    mask.ensure_dims(phase.dims())?;
    if mask.is_empty() {
        return Err(Error::invalid("phase integral over an empty mask"));
    }
    let sum: f64 = phase
        .data()
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .map(|(v, _)| v)
        .sum();
    Ok(sum.abs() * pitch * pitch)
}

pub fn effective_refractive_volume(phase_integral: f64, wavelength: f64) -> Result<f64> {
    if !(phase_integral >= 0.0) {
        return Err(Error::invalid(format!("phase integral must be non-negative, got {phase_integral}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    Ok(phase_integral * wavelength / (2.0 * PI))
}

/// Subtract the median phase of `background` from every pixel.
pub fn subtract_background_phase(phase: &RealImage, background: &Mask) -> Result<RealImage> {
    background.ensure_dims(phase.dims())?;
    let mut values: Vec<f64> = phase
        .data()
        .iter()
        .zip(background.bits())
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .collect();
    if values.is_empty() {
        return Err(Error::invalid("background region is empty"));
    }
    let reference = median(&mut values);
    Ok(phase.map(|v| v - reference))
}

/// 8-connected components of `{φ > threshold}`, in raster order of their first pixel.
pub fn segment_cells(phase: &RealImage, threshold: f64) -> Vec<Mask> {
    let (w, h) = phase.dims();
    let above: Vec<bool> = phase.data().iter().map(|&v| v > threshold).collect();
    let mut label = vec![usize::MAX; w * h];
    let mut masks = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !above[start] || label[start] != usize::MAX {
            continue;
        }
        let id = masks.len();
        let mut members = Vec::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if above[j] && label[j] == usize::MAX {
                        label[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        let mut mask = Mask::empty(w, h);
        for i in members {
            mask.set(i % w, i / w, true);
        }
        masks.push(mask);
    }
    masks.into_iter().filter(|m| m.count() >= MIN_CELL_PIXELS).collect()
}

/// Segment, reference to the cell-free background and measure every cell.
///
/// The background is everything outside the thresholded region. Phase must already be
/// roughly flattened so the threshold separates cells from background.
pub fn measure_cells(phase: &RealImage, threshold: f64, wavelength: f64) -> Result<Vec<CellMeasurement>> {
    let pitch = phase.pitch();
    let initial = segment_cells(phase, threshold);
    let (w, h) = phase.dims();
    let occupied = initial.iter().fold(Mask::empty(w, h), |acc, m| acc.union(m));
    let background = occupied.complement();
    let flat = if background.is_empty() {
        phase.clone()
    } else {
        subtract_background_phase(phase, &background)?
    };
    initial
        .iter()
        .enumerate()
        .map(|(id, mask)| {
            let p = phase_integral(&flat, mask, pitch)?;
            Ok(CellMeasurement {
                cell_id: id,
                area: mask.count() as f64 * pitch * pitch,
                phase_integral: p,
                effective_refractive_volume: effective_refractive_volume(p, wavelength)?,
            })
        })
        .collect()
}
