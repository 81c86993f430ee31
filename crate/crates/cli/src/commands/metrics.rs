use std::path::{Path, PathBuf};

use holoforge_core::io::cfld;
use holoforge_core::metrics::{measure_cells, ssim_complex_parts};

use crate::error::CliResult;
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct MetricsArgs {
    /// Complex CFLD fields to evaluate.
    #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Reference field for SSIM of the real and imaginary parts.
    #[arg(long, value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Phase threshold (rad) separating cells from background.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

fn label(path: &Path) -> String {
    path.file_name().unwrap_or(path.as_os_str()).to_string_lossy().into_owned()
}

pub fn run(ctx: &Context, args: &MetricsArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let reference = match &args.reference {
        Some(p) => {
            let r = cfld::read(p, cfg.pitch)?;
            r.ensure_finite("reference field")?;
            Some(r)
        }
        None => None,
    };
    let (dir, _) = ctx.out_target("csv");
    let mut out = ctx.outputs(&dir)?;
    let mut images = Vec::new();
    let mut cells = Vec::new();
    for path in &args.input {
        let field = cfld::read(path, cfg.pitch)?;
        field.ensure_finite("input field")?;
        let name = label(path);
        let (re, im) = match &reference {
            Some(r) => {
                let (re, im) = ssim_complex_parts(&field, r)?;
                (num(re), num(im))
            }
            None => (String::new(), String::new()),
        };
        let measured = measure_cells(&field.phase(), args.threshold, cfg.optical.wavelength)?;
        images.push(vec![name.clone(), re, im, measured.len().to_string()]);
        for m in measured {
            cells.push(vec![
                name.clone(),
                m.cell_id.to_string(),
                num(m.area),
                num(m.phase_integral),
                num(m.effective_refractive_volume),
            ]);
        }
    }
    out.csv("metrics.csv", &["input", "ssim_real", "ssim_imag", "cells"], &images)?;
    out.csv(
        "cells.csv",
        &["input", "cell_id", "area_um2", "phase_integral_rad_um2", "effective_refractive_volume_um3"],
        &cells,
    )?;
    out.finish()?;
    Ok(())
}
