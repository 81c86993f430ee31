//! Run configuration. Every physical quantity is in µm.

use std::path::{Path, PathBuf};

use holoforge_core::autofocus::CoarseScan;
use holoforge_core::forward::{standard_heights, CellSpec, NoiseModel, PhantomSpec};
use holoforge_core::io::sha256_hex;
use holoforge_core::retrieval::{PlaneOrder, RecoveryOptions, DEFAULT_ITERATIONS};
use holoforge_core::OpticalConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub optical: OpticalConfig,
    /// Sensor pixel pitch.
    pub pitch: f64,
    /// Frame side length in pixels.
    pub size: usize,
    /// Absolute sensor heights; the standard eight-height schedule from `optical.z2` when absent.
    pub heights: Option<Vec<f64>>,
    /// Lateral sensor offset applied to the whole stack.
    pub shift: (f64, f64),
    pub phantom: PhantomSpec,
    pub noise: NoiseModel,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Zero-padding factor for single-hologram back-propagation; 1 keeps periodic boundaries.
    pub pad_factor: usize,
    pub recovery: RecoverySection,
    pub autofocus: CoarseScan,
    pub psr: PsrSection,
    pub dataset: DatasetSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            optical: OpticalConfig::default(),
            pitch: 1.12,
            size: 256,
            heights: None,
            shift: (0.0, 0.0),
            phantom: PhantomSpec::CellLike(CellSpec {
                target_scattering: Some(0.3),
                ..CellSpec::default()
            }),
            noise: NoiseModel::default(),
            seed: 0,
            output_dir: None,
            pad_factor: 1,
            recovery: RecoverySection::default(),
            autofocus: CoarseScan::default(),
            psr: PsrSection::default(),
            dataset: DatasetSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverySection {
    pub iterations: usize,
    pub use_tie: bool,
    pub order: PlaneOrder,
    /// Disable to always run the full iteration count.
    pub early_exit: bool,
}

impl Default for RecoverySection {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            use_tie: true,
            order: PlaneOrder::Descending,
            early_exit: true,
        }
    }
}

impl RecoverySection {
    pub fn options(&self) -> RecoveryOptions {
        RecoveryOptions {
            iterations: self.iterations,
            use_tie: self.use_tie,
            order: self.order,
            early_exit: if self.early_exit { RecoveryOptions::default().early_exit } else { None },
            ..RecoveryOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsrSection {
    pub factor: usize,
    /// Pixel aperture in HR pixels; the full LR pixel when absent.
    pub aperture: Option<usize>,
}

impl Default for PsrSection {
    fn default() -> Self {
        Self { factor: 3, aperture: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub phantoms: usize,
    pub tiles: usize,
    /// Tile overlap in pixels; the nearest exact partition to the scaled overlap when absent.
    pub overlap: Option<usize>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            phantoms: 6,
            tiles: 5,
            overlap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub range: (f64, f64),
    pub step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            range: (-20.0, 20.0),
            step: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.optical.validate()?;
        let bad = |m: String| Err(CliError::Validation(m));
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return bad(format!("pitch must be positive, got {}", self.pitch));
        }
        if self.size < 8 {
            return bad(format!("size must be at least 8, got {}", self.size));
        }
        if self.pad_factor == 0 {
            return bad("pad_factor must be at least 1".into());
        }
        if self.psr.factor == 0 {
            return bad("psr.factor must be at least 1".into());
        }
        if self.dataset.phantoms == 0 || self.dataset.tiles == 0 {
            return bad("dataset needs at least one phantom and one tile".into());
        }
        if !(self.sweep.step > 0.0) || self.sweep.range.1 < self.sweep.range.0 {
            return bad("sweep needs step > 0 and an ordered range".into());
        }
        let heights = self.heights();
        if heights.is_empty() {
            return bad("heights must not be empty".into());
        }
        if heights.windows(2).any(|w| w[1] <= w[0]) || heights[0] <= 0.0 {
            return bad("heights must be positive and strictly increasing".into());
        }
        Ok(())
    }

    pub fn heights(&self) -> Vec<f64> {
        self.heights.clone().unwrap_or_else(|| standard_heights(self.optical.z2))
    }

    /// SHA-256 of the canonical JSON form, after command-line overrides.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Seed for the detection noise of plane `k`, decorrelated from the phantom seed.
    pub fn noise_seed(&self, k: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k as u64 + 1)
    }
}
