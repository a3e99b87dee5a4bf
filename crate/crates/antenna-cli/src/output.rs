//! Deterministic output files: CSV with a fixed numeric format, binary PGM
//! images, and a checksum manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{CliError, CliResult};

/// One output file, rendered fully in memory so the manifest can hash it.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Floats in CSVs carry 12 significant digits, decimal point, no locale.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn csv<I, R>(header: &str, rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: AsRef<str>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row.as_ref());
        out.push('\n');
    }
    out.into_bytes()
}

/// Binary 16-bit PGM (P5), max-normalized; big-endian sample bytes.
pub fn pgm_16bit(pixels: &[f64], width: usize) -> Vec<u8> {
    let height = pixels.len() / width;
    let peak = pixels.iter().cloned().fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(64 + pixels.len() * 2);
    out.extend_from_slice(format!("P5\n{width} {height}\n65535\n").as_bytes());
    for &v in pixels {
        let q = if peak > 0.0 {
            ((v / peak) * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn key_value_text(pairs: &[(&str, String)]) -> Vec<u8> {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.into_bytes()
}

/// Write every artifact plus `manifest.txt` listing name, size and SHA-256;
/// identical artifacts always produce an identical manifest.
pub fn write_outputs(artifacts: &[Artifact], out_dir: &str) -> CliResult<PathBuf> {
    let dir = Path::new(out_dir);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut entries: Vec<(String, usize, String)> = Vec::new();
    for artifact in artifacts {
        let path = dir.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        let digest = Sha256::digest(&artifact.bytes);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        entries.push((artifact.name.clone(), artifact.bytes.len(), hex));
    }
    entries.sort();
    let mut manifest = String::new();
    for (name, size, hex) in &entries {
        let _ = writeln!(manifest, "{hex}  {size}  {name}");
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest.as_bytes())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
