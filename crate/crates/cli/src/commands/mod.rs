//! One module per subcommand, plus the scene synthesis they share.

pub mod export;
pub mod focus;
pub mod metrics;
pub mod psr;
pub mod reconstruct;
pub mod simulate;
pub mod sweep;

use holoforge_core::forward::{synthesize_stack, HologramPlane, HologramStack, Phantom};
use holoforge_core::{Complex64, ComplexField};

use crate::config::RunConfig;
use crate::error::CliResult;

/// The configured phantom and its (optionally noisy) hologram stack.
pub struct Scene {
    pub phantom: Phantom,
    pub stack: HologramStack,
}

pub fn scene(cfg: &RunConfig) -> CliResult<Scene> {
    let n = cfg.size;
    let phantom = cfg.phantom.generate(n, n, cfg.pitch, cfg.seed)?;
    let heights = cfg.heights();
    let clean = if cfg.pad_factor > 1 {
        padded_stack(&phantom, cfg, &heights)?
    } else {
        synthesize_stack(&phantom, &heights, &cfg.optical, cfg.shift)?
    };
    let stack = if cfg.noise.is_clean() {
        clean
    } else {
        let planes = clean
            .planes()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Ok(HologramPlane {
                    intensity: cfg.noise.apply(&p.intensity, cfg.noise_seed(k))?,
                    z: p.z,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        HologramStack::new(planes, cfg.optical, cfg.shift)?
    };
    Ok(Scene { phantom, stack })
}

/// Embed the phantom in free space (`t = 1`) on a grid `pad` times larger, synthesize,
/// and crop every plane back to the original window. Avoids periodic wrap of the
/// diffraction pattern at the frame edges.
fn padded_stack(phantom: &Phantom, cfg: &RunConfig, heights: &[f64]) -> CliResult<HologramStack> {
    let (w, h) = phantom.dims();
    let (pw, ph) = (w * cfg.pad_factor, h * cfg.pad_factor);
    let (ox, oy) = ((pw - w) / 2, (ph - h) / 2);
    let t = phantom.transmission();
    let big = ComplexField::from_fn(pw, ph, t.pitch(), |x, y| {
        if (ox..ox + w).contains(&x) && (oy..oy + h).contains(&y) {
            t.get(x - ox, y - oy)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })?;
    let big = Phantom::new(big, phantom.kind())?;
    let stack = synthesize_stack(&big, heights, &cfg.optical, cfg.shift)?;
    let planes = stack
        .planes()
        .iter()
        .map(|p| {
            Ok(HologramPlane {
                intensity: p.intensity.crop(ox, oy, w, h)?,
                z: p.z,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(HologramStack::new(planes, cfg.optical, cfg.shift)?)
}
