//! Run outputs: 16-bit PGM images, CSV tables and the JSON manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::imaging::{ImageGrid, Peak};

/// Writes a binary 16-bit PGM (P5, big-endian), scaling `[0, max]` to `[0, 65535]`.
pub fn write_pgm(image: &ImageGrid, path: &Path) -> Result<()> {
    let (rows, cols) = image.values.dim();
    let max = image.max();
    let mut bytes = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for v in image.values.iter() {
        let q = if max > 0.0 { (v.max(0.0) / max * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reads back a file written by [`write_pgm`]: `(cols, rows, samples)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path)?;
    let bad = || crate::error::Error::InvalidArgument(format!("{} is not a 16-bit P5 image", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad());
    }
    let cols: usize = fields[1].parse().map_err(|_| bad())?;
    let rows: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos..pos + 2 * rows * cols).ok_or_else(bad)?;
    Ok((cols, rows, data.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

#[derive(Debug, Serialize)]
struct PeakRow {
    rank: usize,
    row: usize,
    col: usize,
    x: f64,
    y: f64,
    value: f64,
}

pub fn write_peaks_csv(peaks: &[Peak], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (rank, p) in peaks.iter().enumerate() {
        w.serialize(PeakRow { rank, row: p.index.0, col: p.index.1, x: p.position[0], y: p.position[1], value: p.value })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(value)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Length scales and validity numbers implied by the optics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub ell_c_in: f64,
    pub ell_c_out: f64,
    pub screen_l_c: f64,
    pub image_pixel: f64,
    pub grid_pitch: f64,
    pub camera_pixels: usize,
    pub return_wavenumber: f64,
    pub stationary_phase: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: String,
    /// SHA-256 of `config.resolved.json`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub derived: Option<DerivedQuantities>,
    pub status: RunStatus,
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn pgm_round_trip_scales_to_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = ImageGrid { values: Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64), pitch: 0.5 };
        write_pgm(&img, &path).unwrap();
        let (cols, rows, data) = read_pgm(&path).unwrap();
        assert_eq!((cols, rows), (4, 3));
        assert_eq!(data[0], 0);
        assert_eq!(data[11], 65535);
        assert_eq!(data[5], (5.0f64 / 11.0 * 65535.0).round() as u16);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
