use holoforge_core::dataset::{feasible_overlap, make_pairs, TileSpec, MANIFEST_NAME};

use crate::error::{CliError, CliResult};
use crate::output::num;
use crate::Context;

#[derive(Debug, Clone, clap::Args)]
pub struct ExportArgs {
    /// Number of phantoms (seeds `seed`, `seed + 1`, ...).
    #[arg(long)]
    pub phantoms: Option<usize>,
    /// Tiles per side.
    #[arg(long)]
    pub tiles: Option<usize>,
    /// Tile overlap in pixels.
    #[arg(long)]
    pub overlap: Option<usize>,
}

pub fn run(ctx: &Context, args: &ExportArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let count = args.phantoms.unwrap_or(cfg.dataset.phantoms);
    let tiles = args.tiles.unwrap_or(cfg.dataset.tiles);
    if count == 0 || tiles == 0 {
        return Err(CliError::Validation("need at least one phantom and one tile".into()));
    }
    let overlap = match args.overlap.or(cfg.dataset.overlap) {
        Some(o) => o,
        None => feasible_overlap(cfg.size, tiles).ok_or_else(|| {
            CliError::Validation(format!("no exact {tiles}x{tiles} tiling of a {} px frame", cfg.size))
        })?,
    };
    let n = cfg.size;
    let phantoms = (0..count as u64)
        .map(|i| cfg.phantom.generate(n, n, cfg.pitch, cfg.seed.wrapping_add(i)))
        .collect::<holoforge_core::Result<Vec<_>>>()?;

    let (dir, _) = ctx.out_target("json");
    let mut out = ctx.outputs(&dir)?;
    let archive = make_pairs(
        &phantoms,
        &cfg.optical,
        &cfg.heights(),
        TileSpec { count_per_side: tiles, overlap },
        &cfg.recovery.options(),
        &dir,
    )?;
    let m = archive.manifest();
    out.record(&dir.join(MANIFEST_NAME))?;
    for p in &m.phantoms {
        out.record(&dir.join(&p.hologram.path))?;
    }
    for p in &m.pairs {
        out.record(&dir.join(&p.input.path))?;
        out.record(&dir.join(&p.target.path))?;
    }
    let splits: std::collections::HashMap<&str, String> =
        m.pairs.iter().map(|p| (p.id.as_str(), format!("{:?}", p.split).to_lowercase())).collect();
    let rows: Vec<Vec<String>> = archive
        .forward_consistency()?
        .into_iter()
        .map(|(id, rms)| vec![splits[id.as_str()].clone(), id, num(rms)])
        .collect();
    out.csv("consistency.csv", &["split", "pair", "rms"], &rows)?;
    out.finish()?;
    println!("{} pairs written to {}", m.pairs.len(), dir.display());
    Ok(())
}
