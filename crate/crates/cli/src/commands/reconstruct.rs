use std::path::PathBuf;

use holoforge_core::autofocus::refine_after_recovery;
use holoforge_core::io::cfld;
use holoforge_core::metrics::ssim_complex_parts;
use holoforge_core::retrieval::multiheight_recover;

use crate::error::{CliError, CliResult};
use crate::manifest::StackManifest;
use crate::output::num;
use crate::Context;

/// Half-width and step of the post-recovery focus scan, µm.
const REFINE_HALF_WIDTH: f64 = 10.0;
const REFINE_STEP: f64 = 1.0;

#[derive(Debug, Clone, clap::Args)]
pub struct ReconstructArgs {
    /// Stack manifest written by `simulate`.
    #[arg(long, value_name = "PATH")]
    pub stack: PathBuf,
    /// Use only the first K planes.
    #[arg(long, value_name = "K")]
    pub nholo: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Initialize the phase from the transport-of-intensity equation.
    #[arg(long, overrides_with = "no_tie")]
    pub tie: bool,
    #[arg(long, overrides_with = "tie")]
    pub no_tie: bool,
    /// Per-iteration residual table (default: residuals.csv in the output directory).
    #[arg(long, value_name = "PATH")]
    pub residuals: Option<PathBuf>,
    /// Re-estimate the sample distance on the recovered field after convergence.
    #[arg(long)]
    pub refine_focus: bool,
}

pub fn run(ctx: &Context, args: &ReconstructArgs) -> CliResult<()> {
    let (manifest, mut stack) = StackManifest::load(&args.stack)?;
    if let Some(k) = args.nholo {
        if k == 0 || k > stack.len() {
            return Err(CliError::Validation(format!(
                "--nholo {k} is outside 1..={}",
                stack.len()
            )));
        }
        stack = stack.truncated(k)?;
    }
    let mut opts = ctx.config.recovery.options();
    if let Some(n) = args.iterations {
        opts.iterations = n;
    }
    if args.tie {
        opts.use_tie = true;
    }
    if args.no_tie {
        opts.use_tie = false;
    }

    let (dir, name) = ctx.out_target("cfld");
    let mut out = ctx.outputs(&dir)?;
    let rec = multiheight_recover(&stack, &opts)?;
    let object = &rec.object_field;
    let object_name = name.unwrap_or_else(|| "object.cfld".into());
    out.field(&object_name, object)?;
    let stem = object_name.trim_end_matches(".cfld").to_string();
    out.renders(&stem, object)?;

    let normalized = rec.normalized_residuals(&stack);
    let rows: Vec<Vec<String>> = rec
        .per_iteration_residual
        .iter()
        .zip(&normalized)
        .enumerate()
        .map(|(i, (r, n))| vec![(i + 1).to_string(), num(*r), num(*n)])
        .collect();
    let header = ["iteration", "residual", "normalized_residual"];
    match &args.residuals {
        Some(path) => out.csv_at(path, &header, &rows)?,
        None => out.csv("residuals.csv", &header, &rows)?,
    };

    let (mut ssim_re, mut ssim_im) = (String::new(), String::new());
    if let Some(path) = manifest.truth_path(&args.stack) {
        let truth = cfld::read(&path, stack.pitch())?;
        if truth.dims() == object.dims() {
            let (re, im) = ssim_complex_parts(object, &truth)?;
            ssim_re = num(re);
            ssim_im = num(im);
        }
    }
    out.csv(
        "reconstruction.csv",
        &[
            "nholo",
            "iterations_run",
            "sample_distance_um",
            "final_residual",
            "ssim_real_truth",
            "ssim_imag_truth",
        ],
        &[vec![
            stack.len().to_string(),
            rec.iterations_run.to_string(),
            num(rec.sample_distance),
            rec.per_iteration_residual.last().map(|r| num(*r)).unwrap_or_default(),
            ssim_re,
            ssim_im,
        ]],
    )?;

    if args.refine_focus {
        let cfg = stack.cfg().with_z2(rec.sample_distance);
        let focus = refine_after_recovery(object, &cfg, REFINE_HALF_WIDTH, REFINE_STEP)?;
        out.csv(
            "focus_refined.csv",
            &["z_before_um", "z_best_um", "bracket_width_um"],
            &[vec![num(rec.sample_distance), num(focus.z_best), num(focus.final_bracket_width())]],
        )?;
    }
    out.finish()?;
    Ok(())
}
