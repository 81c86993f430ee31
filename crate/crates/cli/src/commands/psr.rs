use std::path::PathBuf;

use holoforge_core::metrics::psnr;
use holoforge_core::psr::{psr_fuse, PsrOptions};

use crate::error::{CliError, CliResult};
use crate::manifest::FramesManifest;
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct PsrArgs {
    /// Frames manifest written by `simulate --psr-frames`.
    #[arg(long, value_name = "PATH")]
    pub frames: PathBuf,
    /// Expected upsampling factor; must agree with the manifest.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Pixel aperture in HR pixels; overrides the manifest.
    #[arg(long)]
    pub aperture: Option<usize>,
}

pub fn run(ctx: &Context, args: &PsrArgs) -> CliResult<()> {
    let (manifest, set) = FramesManifest::load(&args.frames)?;
    if let Some(k) = args.factor {
        if k != manifest.factor {
            return Err(CliError::Validation(format!(
                "--factor {k} disagrees with the manifest factor {}",
                manifest.factor
            )));
        }
    }
    let opts = PsrOptions {
        aperture: args.aperture.or(manifest.aperture),
    };
    let (dir, name) = ctx.out_target("pgm");
    let mut out = ctx.outputs(&dir)?;
    let fused = psr_fuse(&set, &opts)?;
    let name = name.unwrap_or_else(|| "hr.pgm".into());
    out.intensity_render(&name, &fused.image)?;
    out.real(&format!("{}.cfld", name.trim_end_matches(".pgm")), &fused.image)?;

    let db = match manifest.read_truth(&args.frames)? {
        Some(truth) if truth.dims() == fused.image.dims() => {
            let (lo, hi) = truth.min_max();
            num(psnr(&fused.image, &truth, hi - lo)?)
        }
        _ => String::new(),
    };
    out.csv(
        "psr.csv",
        &["factor", "frames", "filled_pixels", "psnr_db"],
        &[vec![
            set.factor.to_string(),
            set.frames.len().to_string(),
            fused.filled.to_string(),
            db,
        ]],
    )?;
    out.finish()?;
    Ok(())
}
