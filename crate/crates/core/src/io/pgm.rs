//! Binary PGM (P5) images, 8- or 16-bit.

use std::path::Path;

use super::write_bytes;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pgm {
    Gray8 { width: usize, height: usize, pixels: Vec<u8> },
    Gray16 { width: usize, height: usize, pixels: Vec<u16> },
}

impl Pgm {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Pgm::Gray8 { width, height, .. } | Pgm::Gray16 { width, height, .. } => (*width, *height),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Pgm::Gray8 { width, height, pixels } => {
                let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
                out.extend_from_slice(pixels);
                out
            }
            Pgm::Gray16 { width, height, pixels } => {
                let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
                for p in pixels {
                    out.extend_from_slice(&p.to_be_bytes());
                }
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Pgm> {
        let err = |r: &str| Error::Format {
            format: "PGM",
            reason: r.to_string(),
        };
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated header"));
            }
            tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ASCII header"))?);
        }
        if tokens[0] != "P5" {
            return Err(err("not a binary PGM"));
        }
        let parse = |t: &str| t.parse::<usize>().map_err(|_| err("bad header number"));
        let (width, height, maxval) = (parse(tokens[1])?, parse(tokens[2])?, parse(tokens[3])?);
        pos += 1; // single whitespace after maxval
        let body = bytes.get(pos..).ok_or_else(|| err("missing raster"))?;
        match maxval {
            1..=255 => {
                if body.len() != width * height {
                    return Err(err("raster length mismatch"));
                }
                Ok(Pgm::Gray8 { width, height, pixels: body.to_vec() })
            }
            256..=65535 => {
                if body.len() != 2 * width * height {
                    return Err(err("raster length mismatch"));
                }
                let pixels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
                Ok(Pgm::Gray16 { width, height, pixels })
            }
            _ => Err(err("unsupported maxval")),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Pgm> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Pgm::decode(&bytes)
    }
}
