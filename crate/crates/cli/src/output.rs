//! Artifact encoding: 16-bit PGM images, profile and width CSVs, JSON, and
//! the hashed file list that ends up in `run.json`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{GraymapHeader, PnmEncoder, SampleEncoding};
use image::ExtendedColorType;
use mpov_core::analysis::RadialProfile;
use mpov_core::{ComplexField, IntensityImage};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Binary 16-bit PGM, top row at `+y`.
fn encode_pgm(nx: usize, ny: usize, mut level: impl FnMut(usize, usize) -> u16) -> CliResult<Vec<u8>> {
    let samples: Vec<u16> = (0..ny).rev().flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| level(i, j)).collect();
    let header = GraymapHeader {
        encoding: SampleEncoding::Binary,
        width: nx as u32,
        height: ny as u32,
        maxwhite: u16::MAX as u32,
    };
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_header(header.into())
        .encode(&samples[..], nx as u32, ny as u32, ExtendedColorType::L16)
        .map_err(|source| CliError::Image {
            path: "<pgm encoder>".into(),
            source,
        })?;
    Ok(out)
}

/// Peak-normalized intensity image. Returns the bytes and the peak value
/// that maps to full scale (zero for an all-dark image).
pub fn intensity_pgm(image: &IntensityImage) -> CliResult<(Vec<u8>, f64)> {
    let g = image.grid();
    let peak = image.max();
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let bytes = encode_pgm(g.nx(), g.ny(), |i, j| (image.at(i, j) * scale).round() as u16)?;
    Ok((bytes, peak))
}

/// Phase in `(-pi, pi]` mapped linearly onto the full 16-bit range.
pub fn phase_pgm(field: &ComplexField) -> CliResult<Vec<u8>> {
    let g = field.grid();
    encode_pgm(g.nx(), g.ny(), |i, j| {
        let phase = field.at(i, j).arg();
        ((phase + PI) / (2.0 * PI) * 65535.0).round() as u16
    })
}

#[derive(Serialize)]
struct ProfileRow {
    r_m: f64,
    mean_intensity: f64,
    bin_count: usize,
}

pub fn profile_csv(profile: &RadialProfile) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for ((&r_m, &mean_intensity), &bin_count) in profile
        .bin_centers()
        .iter()
        .zip(profile.mean_intensity())
        .zip(profile.bin_count())
    {
        w.serialize(ProfileRow {
            r_m,
            mean_intensity,
            bin_count,
        })
        .map_err(|source| CliError::Csv {
            path: "<profile>".into(),
            source,
        })?;
    }
    w.into_inner().map_err(|e| CliError::io("<profile>", e.into_error()))
}

#[derive(Serialize, serde::Deserialize)]
pub struct WidthRow {
    pub t_s: f64,
    pub w_m: f64,
}

pub fn widths_csv(rows: &[WidthRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|source| CliError::Csv {
            path: "<widths>".into(),
            source,
        })?;
    }
    w.into_inner().map_err(|e| CliError::io("<widths>", e.into_error()))
}

/// Read `(t, w)` samples from a CSV with `t_s` and `w_m` columns.
pub fn read_widths_csv(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let csv_err = |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader
        .deserialize::<WidthRow>()
        .map(|row| row.map(|r| (r.t_s, r.w_m)).map_err(csv_err))
        .collect()
}

pub fn json_bytes(value: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    /// Intensity that maps to full scale in a peak-normalized image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
}

/// Writes files under one directory and keeps a hashed record of each.
pub struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl ArtifactWriter {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(root.display().to_string(), e))?;
        Ok(ArtifactWriter {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    pub fn write(&mut self, name: &str, bytes: &[u8], normalization: Option<f64>) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))?;
        self.entries.push(OutputEntry {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
            normalization,
        });
        Ok(())
    }

    /// Written but not listed; used for the manifest itself.
    pub fn write_unrecorded(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display().to_string(), e))
    }
}
