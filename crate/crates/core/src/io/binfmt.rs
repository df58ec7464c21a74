//! Little-endian tensor containers: 4-byte magic, u32 dims, then f32 payload.

use std::path::Path;

use crate::error::{Error, Result};

pub const ADC_MAGIC: &[u8; 4] = b"ADC4";
pub const SPECTRUM_MAGIC: &[u8; 4] = b"SPC4";

pub fn encode(magic: &[u8; 4], dims: &[usize], payload: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + 4 * payload.len());
    out.extend_from_slice(magic);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a container holding `n_dims` dims and checks the payload length.
/// The payload length is the product of dims times the per-entry float count
/// implied by the bytes (1 for real, 2 for complex).
pub fn decode(bytes: &[u8], magic: &[u8; 4], n_dims: usize) -> std::result::Result<(Vec<usize>, Vec<f32>), String> {
    let header = 4 + 4 * n_dims;
    if bytes.len() < header {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != magic {
        return Err(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        ));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let cells: usize = dims.iter().product();
    let body = &bytes[header..];
    let per_cell = if magic == ADC_MAGIC { 2 } else { 1 };
    if body.len() != 4 * per_cell * cells {
        return Err(format!(
            "payload is {} bytes, dims {:?} need {}",
            body.len(),
            dims,
            4 * per_cell * cells
        ));
    }
    let floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, floats))
}

pub fn decode_file(path: &Path, magic: &[u8; 4], n_dims: usize) -> Result<(Vec<usize>, Vec<f32>)> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    decode(&bytes, magic, n_dims).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
