//! Little-endian binary arrays with JSON sidecars (`<file>.json`).

use crate::error::{GeoError, Result};
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, InteriorField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const VERSION: &str = concat!("geoxray ", env!("CARGO_PKG_VERSION"));

/// `data.bin` -> `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_f64_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(GeoError::Format(format!("{}: length not a multiple of 8", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Sidecar of a real or complex node table on `[-radius, radius]^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSidecar {
    pub nx: usize,
    pub ny: usize,
    pub radius: f64,
    /// Matrix rank for connection tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

pub fn read_real_table(path: &Path) -> Result<(TableSidecar, Vec<f64>)> {
    let side: TableSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let values = read_f64_le(path)?;
    if values.len() != side.nx * side.ny {
        return Err(GeoError::Format(format!(
            "{}: expected {} values, found {}",
            path.display(),
            side.nx * side.ny,
            values.len()
        )));
    }
    Ok((side, values))
}

fn complex_to_reals(data: &[Complex64]) -> Vec<f64> {
    data.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn reals_to_complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    FanBeam(FanBeamGrid),
    Disk(DiskGrid),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub version: String,
    /// Array shape, last axis is the channel (complex entries interleaved re, im).
    pub shape: Vec<usize>,
    pub grid: GridSpec,
    pub n: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn save_boundary(path: &Path, f: &BoundaryField, config: &serde_json::Value) -> Result<()> {
    write_f64_le(path, &complex_to_reals(&f.data))?;
    let side = FieldSidecar {
        version: VERSION.into(),
        shape: vec![f.grid.n_beta, f.grid.n_omega, f.nch],
        grid: GridSpec::FanBeam(f.grid),
        n: f.nch,
        config: config.clone(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn load_boundary(path: &Path) -> Result<BoundaryField> {
    let side: FieldSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let GridSpec::FanBeam(grid) = side.grid else {
        return Err(GeoError::Format("sidecar does not describe boundary data".into()));
    };
    let data = reals_to_complex(&read_f64_le(path)?);
    if data.len() != grid.len() * side.n {
        return Err(GeoError::Format("boundary data length does not match its sidecar".into()));
    }
    Ok(BoundaryField { grid, nch: side.n, data })
}

/// Saves the interior (non-ghost) part of a field.
pub fn save_interior(path: &Path, f: &InteriorField, config: &serde_json::Value) -> Result<()> {
    let g = f.grid;
    let mut vals = Vec::with_capacity(g.n * g.n * f.nch);
    for j in 0..g.n {
        for i in 0..g.n {
            let k = g.index(i + crate::grid::PAD, j + crate::grid::PAD);
            if g.in_mask(k) {
                vals.extend_from_slice(f.node(k));
            } else {
                vals.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(f.nch));
            }
        }
    }
    write_f64_le(path, &complex_to_reals(&vals))?;
    let side = FieldSidecar {
        version: VERSION.into(),
        shape: vec![g.n, g.n, f.nch],
        grid: GridSpec::Disk(g),
        n: f.nch,
        config: config.clone(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Binary PGM (P5) of the min-max normalised magnitude of channel 0 (y up); `comment`
/// lines go into the header.
pub fn write_pgm(path: &Path, f: &InteriorField, comment: &[String]) -> Result<()> {
    let g = f.grid;
    let mut mags = vec![0.0; g.n * g.n];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..g.n {
        for i in 0..g.n {
            let k = g.index(i + crate::grid::PAD, j + crate::grid::PAD);
            if g.in_mask(k) {
                let m = f.node(k)[0].norm();
                mags[(g.n - 1 - j) * g.n + i] = m;
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut header = String::from("P5\n");
    for c in comment {
        header.push_str("# ");
        header.push_str(&c.replace(['\n', '\r'], " "));
        header.push('\n');
    }
    header.push_str(&format!("{} {}\n255\n", g.n, g.n));
    let mut bytes = header.into_bytes();
    for j in 0..g.n {
        for i in 0..g.n {
            let k = g.index(i + crate::grid::PAD, g.n - 1 - j + crate::grid::PAD);
            let v = if g.in_mask(k) { ((mags[j * g.n + i] - lo) / span * 255.0).round() } else { 0.0 };
            bytes.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}
