//! Maps on disk: a CSV grid of scores (one line per window row) next to a JSON
//! sidecar holding the geometry and normalization state.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EegMap, EegMapError, Trimap, TrimapLabel};
use crate::imaging::io::{write_gray, write_map_gray};
use crate::imaging::GridGeometry;
use crate::scalar::Real;

const SIDECAR_FORMAT: &str = "eegseg-map";
const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    geometry: GridGeometry,
    normalized: bool,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn map_to_csv<F: Real>(map: &EegMap<F>) -> String {
    let cols = map.geometry.cols;
    let mut out = String::new();
    for row in map.scores.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes `csv` and its sidecar.
pub fn save_map<F: Real>(map: &EegMap<F>, csv: impl AsRef<Path>) -> Result<(), EegMapError> {
    let csv = csv.as_ref();
    std::fs::write(csv, map_to_csv(map))?;
    let sidecar = Sidecar {
        format: SIDECAR_FORMAT.into(),
        version: SIDECAR_VERSION,
        geometry: map.geometry,
        normalized: map.normalized,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(csv), json + "\n")?;
    Ok(())
}

pub fn load_map<F: Real>(csv: impl AsRef<Path>) -> Result<EegMap<F>, EegMapError> {
    let csv = csv.as_ref();
    let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv))?)
        .map_err(|e| EegMapError::Format(e.to_string()))?;
    if sidecar.format != SIDECAR_FORMAT || sidecar.version != SIDECAR_VERSION {
        return Err(EegMapError::Format(format!(
            "unsupported sidecar {} v{}",
            sidecar.format, sidecar.version
        )));
    }
    let text = std::fs::read_to_string(csv)?;
    let mut scores = Vec::with_capacity(sidecar.geometry.window_count());
    for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != sidecar.geometry.cols {
            return Err(EegMapError::Format(format!(
                "row {r} has {} values, expected {}",
                row.len(),
                sidecar.geometry.cols
            )));
        }
        for cell in row {
            let v = F::from_str_radix(cell.trim(), 10)
                .map_err(|_| EegMapError::Format(format!("bad score {cell:?}")))?;
            scores.push(v);
        }
    }
    let mut map = EegMap::new(sidecar.geometry, scores)?;
    map.normalized = sidecar.normalized;
    Ok(map)
}

/// Grayscale rendering at pixel resolution, stretched to the full 8-bit range.
pub fn render_map<F: Real>(map: &EegMap<F>, path: impl AsRef<Path>) -> Result<(), EegMapError> {
    write_map_gray(&map.rasterize(), path)?;
    Ok(())
}

/// Trimap rendering: definite background 0, probable background 128, probable foreground 255.
pub fn render_trimap(trimap: &Trimap, path: impl AsRef<Path>) -> Result<(), EegMapError> {
    let levels: Vec<u8> = trimap
        .labels()
        .iter()
        .map(|l| match l {
            TrimapLabel::DefiniteBackground => 0,
            TrimapLabel::ProbableBackground => 128,
            TrimapLabel::ProbableForeground => 255,
        })
        .collect();
    write_gray(trimap.width(), trimap.height(), &levels, path)?;
    Ok(())
}
