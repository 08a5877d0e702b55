//! Output plumbing: atomic writes, CSV formatting, digests, and the binary
//! field-file format.
//!
//! Field file layout (all integers little-endian):
//! magic `"MBRW"` (4 bytes), format version `u32`, then `k`, `n`, `w`, `seed`
//! as 64-bit fields, followed by `w + 1` layers of `n²` little-endian `f64`
//! values, row-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use mbrw::field::FieldSample;
use mbrw::grid::GridSpec;
use mbrw::kernel::KernelParams;

pub const FIELD_MAGIC: &[u8; 4] = b"MBRW";
pub const FIELD_FORMAT_VERSION: u32 = 1;

/// Write a file through a temp sibling and an atomic rename, so no output is
/// ever observed partially written.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// UTF-8 CSV with a header row and '.' decimal separator.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Serialize a sampled field to the binary format.
pub fn encode_field(field: &FieldSample, master_seed: u64) -> Vec<u8> {
    let n = field.grid().n();
    let w = field.w();
    let mut out = Vec::with_capacity(4 + 4 + 32 + (w as usize + 1) * n * n * 8);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(field.params().k as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(w as u64).to_le_bytes());
    out.extend_from_slice(&master_seed.to_le_bytes());
    for j in 0..=w {
        for &v in field.layer(j) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decoded header and layers of a field file.
pub struct DecodedField {
    pub k: u64,
    pub n: u64,
    pub w: u64,
    pub seed: u64,
    pub layers: Vec<Vec<f64>>,
}

pub fn decode_field(bytes: &[u8]) -> Result<DecodedField> {
    if bytes.len() < 40 || &bytes[0..4] != FIELD_MAGIC {
        bail!("not a field file: bad magic");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FIELD_FORMAT_VERSION {
        bail!("unsupported field format version {version}");
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let (k, n, w, seed) = (word(0), word(1), word(2), word(3));
    let cells = (n * n) as usize;
    let expected = 40 + (w as usize + 1) * cells * 8;
    if bytes.len() != expected {
        bail!(
            "field file truncated: {} bytes, expected {expected}",
            bytes.len()
        );
    }
    let mut layers = Vec::with_capacity(w as usize + 1);
    let mut off = 40;
    for _ in 0..=w {
        let mut layer = Vec::with_capacity(cells);
        for _ in 0..cells {
            layer.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        layers.push(layer);
    }
    Ok(DecodedField {
        k,
        n,
        w,
        seed,
        layers,
    })
}

/// Sample a field and return its binary encoding.
pub fn sample_field_bytes(
    k: u32,
    n: usize,
    w: Option<u32>,
    master_seed: u64,
) -> Result<(Vec<u8>, PathBuf)> {
    let grid = GridSpec::new(n)?;
    let params = KernelParams::new(k, 0.0)?;
    let field = FieldSample::sample(params, grid, w, mbrw::rng::RngSeed::new(master_seed, 0))?;
    let bytes = encode_field(&field, master_seed);
    Ok((bytes, PathBuf::new()))
}
