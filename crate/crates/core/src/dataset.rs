//! Paired training data: tiled (single-hologram back-propagation, multi-height
//! reconstruction) fields written as a `TrainingPairArchive`, plus defocus sweeps.
//!
//! Archive layout under `root`:
//!
//! ```text
//! manifest.json
//! phantoms/pNNN/hologram.cfld      sensor intensity at z2 (real)
//! pairs/pNNN_tRR_CC/input.cfld     back-propagated hologram tile
//! pairs/pNNN_tRR_CC/target.cfld    multi-height reconstruction tile
//! ```
//!
//! Paths in the manifest are relative to `root` and use `/`. Every file carries its
//! SHA-256.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, OpticalConfig, RealImage};
use crate::forward::{synthesize_stack, Phantom};
use crate::io::{cfld, sha256_file, sha256_hex, write_bytes};
use crate::propagation::{backpropagate_hologram, backpropagate_to, Propagator};
use crate::retrieval::{multiheight_recover, RecoveryOptions};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

/// Ratio of overlap to frame width used when scaling the tiling to other frame sizes.
pub const OVERLAP_FRACTION: f64 = 400.0 / 1392.0;

/// Overlap in pixels that keeps [`OVERLAP_FRACTION`] for a `width`-pixel frame.
pub fn scaled_overlap(width: usize) -> usize {
    (width as f64 * OVERLAP_FRACTION).round() as usize
}

/// Overlap closest to [`scaled_overlap`] for which `count` tiles partition `width`
/// exactly. Ties go to the larger overlap.
pub fn feasible_overlap(width: usize, count: usize) -> Option<usize> {
    if count <= 1 {
        return Some(0);
    }
    let target = width as f64 * OVERLAP_FRACTION;
    (0..width)
        .filter(|&o| TileGeometry::new((width, width), count, o).is_ok())
        .min_by(|&a, &b| {
            let (da, db) = ((a as f64 - target).abs(), (b as f64 - target).abs());
            da.total_cmp(&db).then(b.cmp(&a))
        })
}

/// `count × count` tiles of `size` pixels with `overlap` pixels shared by neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileGeometry {
    pub count_per_side: usize,
    pub overlap: usize,
    pub tile_size: usize,
    pub frame: (usize, usize),
}

impl TileGeometry {
    /// Geometry for a `width × height` frame. The tile size `(W + (n − 1)·o) / n` must be a
    /// whole number on both axes, and the frame must be square.
    pub fn new(frame: (usize, usize), count_per_side: usize, overlap: usize) -> Result<Self> {
        let (w, h) = frame;
        if count_per_side == 0 {
            return Err(Error::invalid("tile count must be at least 1"));
        }
        if w != h {
            return Err(Error::invalid(format!("tiling needs a square frame, got {w}x{h}")));
        }
        let n = count_per_side;
        let span = w + (n - 1) * overlap;
        if !span.is_multiple_of(n) {
            return Err(Error::invalid(format!(
                "{n} tiles with overlap {overlap} do not partition {w} px evenly"
            )));
        }
        let size = span / n;
        if n > 1 && size <= overlap {
            return Err(Error::invalid(format!("overlap {overlap} leaves no stride for {size}-px tiles")));
        }
        Ok(Self {
            count_per_side: n,
            overlap,
            tile_size: size,
            frame,
        })
    }

    pub fn stride(&self) -> usize {
        self.tile_size - self.overlap
    }

    pub fn len(&self) -> usize {
        self.count_per_side * self.count_per_side
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Top-left pixel of tile `(row, col)`.
    pub fn origin(&self, row: usize, col: usize) -> (usize, usize) {
        (col * self.stride(), row * self.stride())
    }

    /// Tiles in row-major order as `(row, col)`.
    pub fn tiles(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.count_per_side;
        (0..n).flat_map(move |r| (0..n).map(move |c| (r, c)))
    }

    /// Tile index along one axis that owns pixel `p` when overlaps are split at their middle.
    fn owner(&self, p: usize) -> usize {
        let half = self.overlap / 2;
        if p < half || self.count_per_side == 1 {
            0
        } else {
            ((p - half) / self.stride()).min(self.count_per_side - 1)
        }
    }

    fn check_frame(&self, dims: (usize, usize)) -> Result<()> {
        if dims != self.frame {
            return Err(Error::DimensionMismatch {
                expected: self.frame,
                actual: dims,
            });
        }
        Ok(())
    }

    pub fn split_field(&self, field: &ComplexField) -> Result<Vec<ComplexField>> {
        self.check_frame(field.dims())?;
        self.tiles()
            .map(|(r, c)| {
                let (x, y) = self.origin(r, c);
                field.crop(x, y, self.tile_size, self.tile_size)
            })
            .collect()
    }

    pub fn split_image(&self, image: &RealImage) -> Result<Vec<RealImage>> {
        self.check_frame(image.dims())?;
        self.tiles()
            .map(|(r, c)| {
                let (x, y) = self.origin(r, c);
                image.crop(x, y, self.tile_size, self.tile_size)
            })
            .collect()
    }

    /// Inverse of [`split_field`](Self::split_field): overlaps are cropped at their middle.
    pub fn reassemble(&self, tiles: &[ComplexField]) -> Result<ComplexField> {
        if tiles.len() != self.len() {
            return Err(Error::invalid(format!("expected {} tiles, got {}", self.len(), tiles.len())));
        }
        for t in tiles {
            if t.dims() != (self.tile_size, self.tile_size) {
                return Err(Error::DimensionMismatch {
                    expected: (self.tile_size, self.tile_size),
                    actual: t.dims(),
                });
            }
        }
        let (w, h) = self.frame;
        let n = self.count_per_side;
        ComplexField::from_fn(w, h, tiles[0].pitch(), |x, y| {
            let (r, c) = (self.owner(y), self.owner(x));
            let (ox, oy) = self.origin(r, c);
            tiles[r * n + c].get(x - ox, y - oy)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// 4:1:1 assignment by phantom index, in order.
pub fn split_for(index: usize, total: usize) -> Split {
    let val = (total as f64 / 6.0).round() as usize;
    let test = (total as f64 / 6.0).round() as usize;
    let train = total.saturating_sub(val + test).max(1.min(total));
    if index < train {
        Split::Train
    } else if index < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomEntry {
    pub index: usize,
    pub split: Split,
    pub hologram: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub id: String,
    pub phantom: usize,
    pub split: Split,
    pub tile: (usize, usize),
    pub origin: (usize, usize),
    pub input: FileRef,
    pub target: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: String,
    pub optical: OpticalConfig,
    pub pitch: f64,
    pub heights: Vec<f64>,
    pub iterations: usize,
    pub tile: TileGeometry,
    pub phantoms: Vec<PhantomEntry>,
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSpec {
    pub count_per_side: usize,
    pub overlap: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingPairArchive {
    root: PathBuf,
    manifest: Manifest,
}

struct PhantomProducts {
    hologram: RealImage,
    input: ComplexField,
    target: ComplexField,
}

fn products(phantom: &Phantom, cfg: &OpticalConfig, heights: &[f64], opts: &RecoveryOptions) -> Result<PhantomProducts> {
    let stack = synthesize_stack(phantom, heights, cfg, (0.0, 0.0))?;
    let first = &stack.planes()[0];
    let plane_cfg = cfg.with_z2(first.z);
    let input = backpropagate_hologram(&first.intensity, &plane_cfg)?;
    let target = multiheight_recover(&stack, opts)?.object_field;
    Ok(PhantomProducts {
        hologram: first.intensity.clone(),
        input,
        target,
    })
}

fn write_file(root: &Path, rel: String, bytes: &[u8]) -> Result<FileRef> {
    write_bytes(&root.join(&rel), bytes)?;
    Ok(FileRef {
        path: rel,
        sha256: sha256_hex(bytes),
    })
}

/// Synthesize, reconstruct, tile and write every phantom to `root`.
///
/// Inputs back-propagate the first (lowest) plane; targets are multi-height recoveries
/// over all `heights`. Phantoms are processed in parallel, files are written in order.
pub fn make_pairs(
    phantoms: &[Phantom],
    cfg: &OpticalConfig,
    heights: &[f64],
    tile: TileSpec,
    opts: &RecoveryOptions,
    root: &Path,
) -> Result<TrainingPairArchive> {
    if phantoms.is_empty() {
        return Err(Error::invalid("at least one phantom is required"));
    }
    cfg.validate()?;
    let dims = phantoms[0].dims();
    let pitch = phantoms[0].pitch();
    for p in phantoms {
        if p.dims() != dims || p.pitch() != pitch {
            return Err(Error::invalid("all phantoms must share one grid"));
        }
    }
    let geometry = TileGeometry::new(dims, tile.count_per_side, tile.overlap)?;

    let results: Vec<PhantomProducts> = phantoms
        .par_iter()
        .map(|p| products(p, cfg, heights, opts))
        .collect::<Result<_>>()?;

    let total = phantoms.len();
    let mut phantom_entries = Vec::with_capacity(total);
    let mut pairs = Vec::with_capacity(total * geometry.len());
    for (index, prod) in results.iter().enumerate() {
        let split = split_for(index, total);
        let hologram = write_file(root, format!("phantoms/p{index:03}/hologram.cfld"), &cfld::encode_real(&prod.hologram))?;
        phantom_entries.push(PhantomEntry { index, split, hologram });
        let inputs = geometry.split_field(&prod.input)?;
        let targets = geometry.split_field(&prod.target)?;
        for (((r, c), input), target) in geometry.tiles().zip(&inputs).zip(&targets) {
            let id = format!("p{index:03}_t{r:02}_{c:02}");
            pairs.push(PairEntry {
                input: write_file(root, format!("pairs/{id}/input.cfld"), &cfld::encode(input))?,
                target: write_file(root, format!("pairs/{id}/target.cfld"), &cfld::encode(target))?,
                id,
                phantom: index,
                split,
                tile: (r, c),
                origin: geometry.origin(r, c),
            });
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        generator: format!("holoforge-core {}", env!("CARGO_PKG_VERSION")),
        optical: *cfg,
        pitch,
        heights: heights.to_vec(),
        iterations: opts.iterations,
        tile: geometry,
        phantoms: phantom_entries,
        pairs,
    };
    write_bytes(&root.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(TrainingPairArchive {
        root: root.to_path_buf(),
        manifest,
    })
}

impl TrainingPairArchive {
    /// Read the manifest and verify every referenced file's hash and dimensions.
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Format {
                format: "archive manifest",
                reason: format!("unsupported format version {}", manifest.format_version),
            });
        }
        let archive = Self {
            root: root.to_path_buf(),
            manifest,
        };
        archive.verify()?;
        Ok(archive)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn geometry(&self) -> &TileGeometry {
        &self.manifest.tile
    }

    fn check_hash(&self, file: &FileRef) -> Result<PathBuf> {
        let path = self.root.join(&file.path);
        let actual = sha256_file(&path)?;
        if actual != file.sha256 {
            return Err(Error::Integrity {
                path,
                reason: format!("sha256 {actual} does not match manifest {}", file.sha256),
            });
        }
        Ok(path)
    }

    fn verify(&self) -> Result<()> {
        let m = &self.manifest;
        let mut split_of = std::collections::HashMap::new();
        for p in &m.phantoms {
            self.check_hash(&p.hologram)?;
            split_of.insert(p.index, p.split);
        }
        let side = m.tile.tile_size;
        for pair in &m.pairs {
            if split_of.get(&pair.phantom) != Some(&pair.split) {
                return Err(Error::Integrity {
                    path: self.root.join(MANIFEST_NAME),
                    reason: format!("pair {} split disagrees with its phantom", pair.id),
                });
            }
            for f in [&pair.input, &pair.target] {
                let path = self.check_hash(f)?;
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let field = cfld::decode(&bytes, m.pitch)?;
                if field.dims() != (side, side) {
                    return Err(Error::DimensionMismatch {
                        expected: (side, side),
                        actual: field.dims(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn read_pair(&self, pair: &PairEntry) -> Result<(ComplexField, ComplexField)> {
        let pitch = self.manifest.pitch;
        Ok((
            cfld::read(&self.root.join(&pair.input.path), pitch)?,
            cfld::read(&self.root.join(&pair.target.path), pitch)?,
        ))
    }

    pub fn read_hologram(&self, phantom: usize) -> Result<RealImage> {
        let entry = self
            .manifest
            .phantoms
            .iter()
            .find(|p| p.index == phantom)
            .ok_or_else(|| Error::invalid(format!("no phantom {phantom} in archive")))?;
        cfld::read_real(&self.root.join(&entry.hologram.path), self.manifest.pitch)
    }

    pub fn pairs_for(&self, phantom: usize) -> Vec<&PairEntry> {
        self.manifest.pairs.iter().filter(|p| p.phantom == phantom).collect()
    }

    /// Forward consistency of every target tile: the phantom's targets are reassembled
    /// into the full frame, propagated to the first plane and squared, and each tile
    /// region is compared with the stored hologram. Returns `(pair id, RMS)`.
    ///
    /// Tiles are evaluated in frame context because an isolated crop lacks the
    /// neighboring content that diffracts into its border.
    pub fn forward_consistency(&self) -> Result<Vec<(String, f64)>> {
        let m = &self.manifest;
        let geometry = &m.tile;
        let z = m.heights.first().copied().unwrap_or(m.optical.z2);
        let mut out = Vec::with_capacity(m.pairs.len());
        for p in &m.phantoms {
            let entries = self.pairs_for(p.index);
            let mut tiles = vec![None; geometry.len()];
            for e in &entries {
                tiles[e.tile.0 * geometry.count_per_side + e.tile.1] = Some(self.read_pair(e)?.1);
            }
            let tiles: Vec<ComplexField> = tiles
                .into_iter()
                .map(|t| t.ok_or_else(|| Error::invalid(format!("phantom {} is missing tiles", p.index))))
                .collect::<Result<_>>()?;
            let target = geometry.reassemble(&tiles)?;
            let sensor = Propagator::for_field(&target, &m.optical)?.propagate(&target, z)?.intensity();
            let hologram = self.read_hologram(p.index)?;
            let (s, h) = (geometry.split_image(&sensor)?, geometry.split_image(&hologram)?);
            for e in &entries {
                let i = e.tile.0 * geometry.count_per_side + e.tile.1;
                out.push((e.id.clone(), crate::metrics::rms_difference(&s[i], &h[i])?));
            }
        }
        Ok(out)
    }
}

/// Back-propagations of one hologram to `z2 + dz` for `dz` in `[lo, hi]` every `step` µm.
pub fn defocus_sweep(
    hologram: &RealImage,
    cfg: &OpticalConfig,
    range: (f64, f64),
    step: f64,
) -> Result<Vec<(f64, ComplexField)>> {
    if !(step > 0.0) || !(range.1 >= range.0) {
        return Err(Error::invalid("defocus sweep needs step > 0 and an ordered range"));
    }
    let n = ((range.1 - range.0) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dz = range.0 + i as f64 * step;
            if dz.abs() < step * 1e-9 {
                dz = 0.0;
            }
            let field = if dz == 0.0 {
                backpropagate_hologram(hologram, cfg)?
            } else {
                backpropagate_to(hologram, cfg.z2 + dz, cfg)?
            };
            Ok((dz, field))
        })
        .collect()
}
