use holoforge_core::dataset::defocus_sweep;
use holoforge_core::metrics::{ssim, ssim_complex_parts, SsimParams};
use holoforge_core::retrieval::multiheight_recover;

use crate::commands::scene;
use crate::error::{CliError, CliResult};
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct SweepArgs {
    /// Sweep the back-propagation distance of one hologram instead of the plane count.
    #[arg(long)]
    pub defocus: bool,
    /// Largest plane count in the height sweep.
    #[arg(long, value_name = "K")]
    pub nholo: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

pub fn run(ctx: &Context, args: &SweepArgs) -> CliResult<()> {
    if args.defocus {
        defocus(ctx)
    } else {
        heights(ctx, args)
    }
}

/// Recover with the first 1..=K planes and score each result against the K-plane one
/// (whose own score is 1 by construction) and against the truth.
fn heights(ctx: &Context, args: &SweepArgs) -> CliResult<()> {
    let s = scene(&ctx.config)?;
    let max = args.nholo.unwrap_or(s.stack.len());
    if max == 0 || max > s.stack.len() {
        return Err(CliError::Validation(format!("--nholo {max} is outside 1..={}", s.stack.len())));
    }
    let mut opts = ctx.config.recovery.options();
    if let Some(n) = args.iterations {
        opts.iterations = n;
    }
    let (dir, _) = ctx.out_target("csv");
    let mut out = ctx.outputs(&dir)?;
    let results = (1..=max)
        .map(|k| Ok(multiheight_recover(&s.stack.truncated(k)?, &opts)?))
        .collect::<CliResult<Vec<_>>>()?;
    let reference = &results[max - 1].object_field;
    let truth = s.phantom.transmission();
    let truth_re = truth.real();
    let params = SsimParams::for_reference(&truth_re);
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let k = i + 1;
        let (re, im) = ssim_complex_parts(&r.object_field, reference)?;
        let vs_truth = ssim(&r.object_field.real(), &truth_re, &params)?;
        rows.push(vec![k.to_string(), num(re), num(im), num(vs_truth), r.iterations_run.to_string()]);
        out.field(&format!("nholo/k{k}.cfld"), &r.object_field)?;
        out.renders(&format!("nholo/k{k}"), &r.object_field)?;
    }
    out.csv(
        "nholo_sweep.csv",
        &["nholo", "ssim_real", "ssim_imag", "ssim_real_truth", "iterations_run"],
        &rows,
    )?;
    out.finish()?;
    Ok(())
}

/// Back-propagate the first plane to `z + dz` over the configured range and score each
/// input against the in-focus one.
fn defocus(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let s = scene(cfg)?;
    let plane = &s.stack.planes()[0];
    let optical = cfg.optical.with_z2(plane.z);
    let inputs = defocus_sweep(&plane.intensity, &optical, cfg.sweep.range, cfg.sweep.step)?;
    let focus = inputs
        .iter()
        .find(|(dz, _)| *dz == 0.0)
        .map(|(_, f)| f.clone())
        .ok_or_else(|| CliError::Validation("sweep range does not include dz = 0".into()))?;

    let (dir, _) = ctx.out_target("csv");
    let mut out = ctx.outputs(&dir)?;
    let mut rows = Vec::new();
    for (i, (dz, field)) in inputs.iter().enumerate() {
        let name = format!("defocus/dz{i:02}.cfld");
        out.field(&name, field)?;
        let (re, im) = ssim_complex_parts(field, &focus)?;
        rows.push(vec![num(*dz), num(re), num(im), name]);
    }
    out.renders("defocus/in_focus", &focus)?;
    out.csv("defocus.csv", &["dz_um", "ssim_real", "ssim_imag", "input"], &rows)?;
    out.finish()?;
    Ok(())
}
