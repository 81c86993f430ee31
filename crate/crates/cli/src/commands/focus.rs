use std::path::PathBuf;

use holoforge_core::autofocus::{autofocus, CoarseScan};
use holoforge_core::io::cfld;

use crate::commands::scene;
use crate::error::{CliError, CliResult};
use crate::manifest::StackManifest;
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct AutofocusArgs {
    /// Take the hologram from a stack manifest.
    #[arg(long, value_name = "PATH", conflicts_with = "hologram")]
    pub stack: Option<PathBuf>,
    /// Plane of `--stack` to focus.
    #[arg(long, default_value_t = 0)]
    pub plane: usize,
    /// Real CFLD hologram at the configured pitch.
    #[arg(long, value_name = "PATH")]
    pub hologram: Option<PathBuf>,
    /// Coarse scan start, µm.
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

pub fn run(ctx: &Context, args: &AutofocusArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    // without an explicit hologram, focus the first plane of the configured scene
    let (intensity, optical) = if let Some(path) = &args.stack {
        let (_, stack) = StackManifest::load(path)?;
        let plane = stack.planes().get(args.plane).ok_or_else(|| {
            CliError::Validation(format!("--plane {} is outside a {}-plane stack", args.plane, stack.len()))
        })?;
        (plane.intensity.clone(), *stack.cfg())
    } else if let Some(path) = &args.hologram {
        (cfld::read_real(path, cfg.pitch)?, cfg.optical)
    } else {
        let s = scene(cfg)?;
        (s.stack.planes()[0].intensity.clone(), cfg.optical)
    };
    let d = cfg.autofocus;
    let scan = CoarseScan::new(
        args.start.unwrap_or(d.start),
        args.stop.unwrap_or(d.stop),
        args.step.unwrap_or(d.step),
    )?;

    let (dir, _) = ctx.out_target("csv");
    let mut out = ctx.outputs(&dir)?;
    let r = autofocus(&intensity, &optical, &scan)?;
    let curve: Vec<Vec<String>> = r.criterion_curve.iter().map(|(z, c)| vec![num(*z), num(*c)]).collect();
    out.csv("focus_curve.csv", &["z_um", "criterion"], &curve)?;
    let history: Vec<Vec<String>> = r
        .refinement_history
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| vec![i.to_string(), num(*lo), num(*hi)])
        .collect();
    out.csv("focus_refinement.csv", &["iteration", "lo_um", "hi_um"], &history)?;
    out.csv(
        "focus.csv",
        &["z_best_um", "bracket_width_um", "warning"],
        &[vec![num(r.z_best), num(r.final_bracket_width()), r.warning.clone().unwrap_or_default()]],
    )?;
    out.finish()?;
    println!("z_best = {:.3} um", r.z_best);
    Ok(())
}
