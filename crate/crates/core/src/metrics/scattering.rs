//! Scattering-strength ratio `R = ⟨|ũ − 1|²⟩^½` with `ũ = u / A`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Mask};

/// `A` is the mean of `u` over the object-free `background`; the RMS runs over
/// `analysis` (the whole field when `None`).
pub fn scattering_ratio(u: &ComplexField, background: &Mask, analysis: Option<&Mask>) -> Result<f64> {
    background.ensure_dims(u.dims())?;
    let (sum, n) = u
        .data()
        .iter()
        .zip(background.bits())
        .filter(|(_, &m)| m)
        .fold((Complex64::new(0.0, 0.0), 0usize), |(s, n), (c, _)| (s + c, n + 1));
    if n == 0 {
        return Err(Error::invalid("background region is empty"));
    }
    scattering_ratio_with_reference(u, sum / n as f64, analysis)
}

/// As [`scattering_ratio`] with a known reference wave `A`.
pub fn scattering_ratio_with_reference(u: &ComplexField, reference: Complex64, analysis: Option<&Mask>) -> Result<f64> {
    if reference.norm() < 1e-9 {
        return Err(Error::invalid(format!("reference amplitude {} is too small", reference.norm())));
    }
    if let Some(m) = analysis {
        m.ensure_dims(u.dims())?;
    }
    let one = Complex64::new(1.0, 0.0);
    let mut ss = 0.0;
    let mut n = 0usize;
    for (i, c) in u.data().iter().enumerate() {
        if analysis.is_none_or(|m| m.bits()[i]) {
            ss += (c / reference - one).norm_sqr();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("analysis region is empty"));
    }
    Ok((ss / n as f64).sqrt())
}
