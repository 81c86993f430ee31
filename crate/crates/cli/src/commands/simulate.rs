use holoforge_core::forward::synthesize_hologram;
use holoforge_core::psr::{full_grid, simulate_frames, PsrOptions};

use crate::commands::scene;
use crate::error::CliResult;
use crate::manifest::{FrameEntry, FramesManifest, PlaneEntry, StackManifest, FORMAT_VERSION};
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct SimulateArgs {
    /// Also sample sub-pixel shifted low-resolution frames for `psr`.
    #[arg(long)]
    pub psr_frames: bool,
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let (dir, name) = ctx.out_target("json");
    let mut out = ctx.outputs(&dir)?;
    let s = scene(cfg)?;
    log::info!("phantom scattering strength {:.3}", s.phantom.scattering_strength());

    let mut planes = Vec::new();
    let mut rows = Vec::new();
    for (k, p) in s.stack.planes().iter().enumerate() {
        let cfld = format!("planes/h{k}.cfld");
        let pgm = format!("planes/h{k}.pgm");
        let sha256 = out.real(&cfld, &p.intensity)?;
        out.intensity_render(&pgm, &p.intensity)?;
        let (lo, hi) = p.intensity.min_max();
        rows.push(vec![k.to_string(), num(p.z), num(p.intensity.mean()), num(lo), num(hi)]);
        planes.push(PlaneEntry { z: p.z, cfld, sha256, pgm });
    }
    out.field("truth/transmission.cfld", s.phantom.transmission())?;
    out.renders("truth/transmission", s.phantom.transmission())?;
    out.csv("planes.csv", &["plane", "z_um", "mean", "min", "max"], &rows)?;
    let manifest = StackManifest {
        format_version: FORMAT_VERSION,
        optical: cfg.optical,
        pitch: cfg.pitch,
        shift: cfg.shift,
        planes,
        truth: Some("truth/transmission.cfld".into()),
    };
    out.json(name.as_deref().unwrap_or("stack.json"), &manifest)?;

    if args.psr_frames {
        write_frames(ctx, &mut out)?;
    }
    out.finish()?;
    Ok(())
}

/// HR hologram at `pitch / factor` over the same field of view, and one LR frame per
/// sub-pixel offset of the full `factor × factor` grid.
fn write_frames(ctx: &Context, out: &mut crate::output::Outputs) -> CliResult<()> {
    let cfg = &ctx.config;
    let k = cfg.psr.factor;
    let n = cfg.size * k;
    let hr_pitch = cfg.pitch / k as f64;
    let phantom = cfg.phantom.generate(n, n, hr_pitch, cfg.seed)?;
    let hr = synthesize_hologram(&phantom, cfg.optical.z2, &cfg.optical)?;
    let opts = PsrOptions { aperture: cfg.psr.aperture };
    let set = simulate_frames(&hr, k, &full_grid(k), &opts)?;
    let mut frames = Vec::new();
    for (i, f) in set.frames.iter().enumerate() {
        let cfld = format!("f{i:02}.cfld");
        let sha256 = out.real(&format!("frames/{cfld}"), &f.image)?;
        frames.push(FrameEntry { cfld, dx: f.dx, dy: f.dy, sha256 });
    }
    out.real("frames/hr_truth.cfld", &hr)?;
    out.intensity_render("frames/hr_truth.pgm", &hr)?;
    let manifest = FramesManifest {
        format_version: FORMAT_VERSION,
        factor: k,
        lr_pitch: set.lr_pitch,
        aperture: cfg.psr.aperture,
        frames,
        truth: Some("hr_truth.cfld".into()),
    };
    out.json("frames/frames.json", &manifest)?;
    Ok(())
}
