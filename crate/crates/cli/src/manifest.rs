//! JSON manifests that tie CFLD files together. Paths are relative to the manifest.

use std::path::{Path, PathBuf};

use holoforge_core::forward::{HologramPlane, HologramStack};
use holoforge_core::io::{cfld, sha256_hex};
use holoforge_core::psr::{ShiftedFrame, ShiftedFrameSet};
use holoforge_core::{OpticalConfig, RealImage};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneEntry {
    pub z: f64,
    pub cfld: String,
    pub sha256: String,
    pub pgm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackManifest {
    pub format_version: u32,
    pub optical: OpticalConfig,
    pub pitch: f64,
    pub shift: (f64, f64),
    pub planes: Vec<PlaneEntry>,
    /// Ground-truth transmission, when the stack was simulated.
    pub truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub cfld: String,
    /// Sensor shift, µm.
    pub dx: f64,
    pub dy: f64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesManifest {
    pub format_version: u32,
    pub factor: usize,
    pub lr_pitch: f64,
    pub aperture: Option<usize>,
    pub frames: Vec<FrameEntry>,
    /// High-resolution hologram the frames were sampled from.
    pub truth: Option<String>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Read a CFLD file, checking its hash when one is recorded.
fn read_checked(path: &Path, sha256: Option<&str>) -> CliResult<Vec<u8>> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    if let Some(expected) = sha256 {
        if sha256_hex(&bytes) != expected {
            return Err(CliError::Validation(format!("{} does not match its recorded hash", path.display())));
        }
    }
    Ok(bytes)
}

impl StackManifest {
    pub fn load(path: &Path) -> CliResult<(Self, HologramStack)> {
        let m: StackManifest = read_json(path)?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::Validation(format!("unsupported stack format {}", m.format_version)));
        }
        let dir = base(path);
        let planes = m
            .planes
            .iter()
            .map(|p| {
                let bytes = read_checked(&dir.join(&p.cfld), Some(&p.sha256))?;
                Ok(HologramPlane {
                    intensity: cfld::decode_real(&bytes, m.pitch)?,
                    z: p.z,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let stack = HologramStack::new(planes, m.optical, m.shift)?;
        Ok((m, stack))
    }

    pub fn truth_path(&self, manifest: &Path) -> Option<PathBuf> {
        self.truth.as_ref().map(|t| base(manifest).join(t))
    }
}

impl FramesManifest {
    pub fn load(path: &Path) -> CliResult<(Self, ShiftedFrameSet)> {
        let m: FramesManifest = read_json(path)?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::Validation(format!("unsupported frames format {}", m.format_version)));
        }
        let dir = base(path);
        let frames = m
            .frames
            .iter()
            .map(|f| {
                let bytes = read_checked(&dir.join(&f.cfld), Some(&f.sha256))?;
                Ok(ShiftedFrame {
                    image: cfld::decode_real(&bytes, m.lr_pitch)?,
                    dx: f.dx,
                    dy: f.dy,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let set = ShiftedFrameSet {
            frames,
            lr_pitch: m.lr_pitch,
            factor: m.factor,
        };
        Ok((m, set))
    }

    pub fn read_truth(&self, manifest: &Path) -> CliResult<Option<RealImage>> {
        let Some(t) = &self.truth else { return Ok(None) };
        let pitch = self.lr_pitch / self.factor as f64;
        let bytes = read_checked(&base(manifest).join(t), None)?;
        Ok(Some(cfld::decode_real(&bytes, pitch)?))
    }
}
