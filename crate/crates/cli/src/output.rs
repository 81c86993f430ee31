//! Artifact writing. Every file a command produces goes through [`Outputs`], which
//! records its hash for the provenance record written last.

use std::path::{Path, PathBuf};

use holoforge_core::io::pgm::Pgm;
use holoforge_core::io::{cfld, sha256_file, sha256_hex};
use holoforge_core::{ComplexField, RealImage};
use serde::Serialize;

use crate::error::CliResult;
use crate::render::{render_field, render_intensity16, Channel};

pub const PROVENANCE_NAME: &str = "provenance.json";

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub artifacts: Vec<Artifact>,
}

pub struct Outputs {
    dir: PathBuf,
    provenance: Provenance,
}

impl Outputs {
    pub fn new(dir: &Path, subcommand: &str, config_sha256: String, seed: u64, threads: usize) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance: Provenance {
                tool: "holoforge",
                version: env!("CARGO_PKG_VERSION"),
                subcommand: subcommand.to_string(),
                config_sha256,
                seed,
                threads,
                artifacts: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Resolve `name` against the output directory unless it is already a path of its own.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn label(&self, path: &Path) -> String {
        path.strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn push(&mut self, path: &Path, sha256: String) {
        let label = self.label(path);
        self.provenance.artifacts.retain(|a| a.path != label);
        self.provenance.artifacts.push(Artifact { path: label, sha256 });
    }

    pub fn bytes_at(&mut self, path: &Path, bytes: &[u8]) -> CliResult<String> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        let hash = sha256_hex(bytes);
        self.push(path, hash.clone());
        Ok(hash)
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<String> {
        self.bytes_at(&self.path(name), bytes)
    }

    /// Register a file some other component already wrote.
    pub fn record(&mut self, path: &Path) -> CliResult<()> {
        let hash = sha256_file(path)?;
        self.push(path, hash);
        Ok(())
    }

    pub fn field(&mut self, name: &str, field: &ComplexField) -> CliResult<String> {
        self.bytes(name, &cfld::encode(field))
    }

    pub fn real(&mut self, name: &str, image: &RealImage) -> CliResult<String> {
        self.bytes(name, &cfld::encode_real(image))
    }

    pub fn pgm(&mut self, name: &str, image: &Pgm) -> CliResult<String> {
        self.bytes(name, &image.encode())
    }

    /// One 8-bit rendering per channel: `<stem>_<channel>.pgm`.
    pub fn renders(&mut self, stem: &str, field: &ComplexField) -> CliResult<()> {
        for ch in Channel::ALL {
            self.pgm(&format!("{stem}_{}.pgm", ch.name()), &render_field(field, ch))?;
        }
        Ok(())
    }

    pub fn intensity_render(&mut self, name: &str, image: &RealImage) -> CliResult<String> {
        self.pgm(name, &render_intensity16(image).0)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<String> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.bytes(name, &text)
    }

    pub fn csv_at(&mut self, path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.bytes_at(path, &bytes)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
        self.csv_at(&self.path(name), header, rows)
    }

    /// Write the provenance record. Artifacts are listed in path order.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.provenance.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let path = self.path(PROVENANCE_NAME);
        let mut text = serde_json::to_vec_pretty(&self.provenance)?;
        text.push(b'\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form, so identical values print identically.
pub fn num(v: f64) -> String {
    format!("{v}")
}
