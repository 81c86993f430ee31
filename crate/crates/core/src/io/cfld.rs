//! CFLD container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset 0   b"CFLD"
//! offset 4   u32 width  (M)
//! offset 8   u32 height (N)
//! offset 12  u32 reserved (written as 0)
//! offset 16  M·N × (f32 re, f32 im), row-major
//! ```
//!
//! Real images use the same container with `im ≡ 0`. The header carries no pitch, so
//! readers take it from the surrounding manifest.

use std::path::Path;

use num_complex::Complex64;

use super::write_bytes;
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

pub const MAGIC: &[u8; 4] = b"CFLD";
pub const HEADER_LEN: usize = 16;

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "CFLD",
        reason: reason.into(),
    }
}

pub fn encode(field: &ComplexField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for c in field.data() {
        out.extend_from_slice(&(c.re as f32).to_le_bytes());
        out.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    out
}

pub fn encode_real(image: &RealImage) -> Vec<u8> {
    encode(&ComplexField::from_amplitude(image))
}

pub fn decode(bytes: &[u8], pitch: f64) -> Result<ComplexField> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (width, height) = (word(4), word(8));
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err("dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "{width}x{height} needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    ComplexField::new(width, height, pitch, data)
}

/// Decode as a real image; any nonzero imaginary sample is an error.
pub fn decode_real(bytes: &[u8], pitch: f64) -> Result<RealImage> {
    let field = decode(bytes, pitch)?;
    if field.data().iter().any(|c| c.im != 0.0) {
        return Err(format_err("expected a real image but found imaginary samples"));
    }
    Ok(field.real())
}

pub fn write(path: &Path, field: &ComplexField) -> Result<()> {
    write_bytes(path, &encode(field))
}

pub fn write_real(path: &Path, image: &RealImage) -> Result<()> {
    write_bytes(path, &encode_real(image))
}

pub fn read(path: &Path, pitch: f64) -> Result<ComplexField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, pitch)
}

pub fn read_real(path: &Path, pitch: f64) -> Result<RealImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_real(&bytes, pitch)
}
