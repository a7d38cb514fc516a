//! Grid file pair: `<name>.json` header plus `<name>.raw` little-endian payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{Geometry, Grid, LabelGrid, Mask, VolumeGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Volume,
    Labels,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub kind: GridKind,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub dtype: String,
    #[serde(default)]
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridFile {
    Volume(VolumeGrid),
    Labels(LabelGrid),
    Mask(Mask),
}

impl GridFile {
    pub fn into_volume(self) -> Result<VolumeGrid> {
        match self {
            GridFile::Volume(v) => Ok(v),
            _ => Err(Error::Header("expected a volume grid".into())),
        }
    }

    pub fn into_labels(self) -> Result<LabelGrid> {
        match self {
            GridFile::Labels(l) => Ok(l),
            _ => Err(Error::Header("expected a label grid".into())),
        }
    }

    pub fn into_mask(self) -> Result<Mask> {
        match self {
            GridFile::Mask(m) => Ok(m),
            GridFile::Labels(l) => Ok(l.binarize()),
            _ => Err(Error::Header("expected a mask grid".into())),
        }
    }
}

/// Both paths of a pair given either the `.json`, the `.raw` or the bare stem.
fn pair_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut raw = stem.into_os_string();
    raw.push(".raw");
    (json.into(), raw.into())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_pair(path: &Path, header: &GridHeader, payload: &[u8]) -> Result<()> {
    let (json, raw) = pair_paths(path);
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    write_atomic(&raw, payload)?;
    write_atomic(&json, text.as_bytes())
}

fn header_for(kind: GridKind, geom: &Geometry, dtype: &str, normalized: bool) -> GridHeader {
    GridHeader {
        kind,
        dims: geom.dims,
        spacing: geom.spacing,
        origin: geom.origin,
        dtype: dtype.into(),
        normalized,
    }
}

pub fn save_volume(path: impl AsRef<Path>, volume: &VolumeGrid) -> Result<()> {
    let header = header_for(
        GridKind::Volume,
        volume.geometry(),
        "f32",
        volume.normalized,
    );
    let payload: Vec<u8> = volume
        .grid
        .data()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write_pair(path.as_ref(), &header, &payload)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelGrid) -> Result<()> {
    let header = header_for(GridKind::Labels, labels.geometry(), "u8", false);
    write_pair(path.as_ref(), &header, labels.grid().data())
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let header = header_for(GridKind::Mask, mask.geometry(), "u8", false);
    let payload: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    write_pair(path.as_ref(), &header, &payload)
}

/// Reads a grid pair; the header decides whether a volume, label or mask grid comes back.
pub fn load_grid(path: impl AsRef<Path>) -> Result<GridFile> {
    let (json, raw) = pair_paths(path.as_ref());
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let header: GridHeader = serde_json::from_str(&text)
        .map_err(|e| Error::Header(format!("{}: {e}", json.display())))?;
    let geom = Geometry::new(header.dims, header.spacing, header.origin)
        .map_err(|e| Error::Header(e.to_string()))?;
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let width = match (header.kind, header.dtype.as_str()) {
        (GridKind::Volume, "f32") => 4,
        (GridKind::Labels | GridKind::Mask, "u8") => 1,
        (kind, dtype) => {
            return Err(Error::Header(format!(
                "dtype {dtype} not valid for {kind:?}"
            )));
        }
    };
    let expected = geom.len() * width;
    if bytes.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: bytes.len(),
        });
    }
    Ok(match header.kind {
        GridKind::Volume => {
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            GridFile::Volume(VolumeGrid {
                grid: Grid::from_vec(geom, data)?,
                normalized: header.normalized,
            })
        }
        GridKind::Labels => GridFile::Labels(LabelGrid::new(Grid::from_vec(geom, bytes)?)?),
        GridKind::Mask => {
            if let Some(&bad) = bytes.iter().find(|&&b| b > 1) {
                return Err(Error::LabelCode(bad));
            }
            GridFile::Mask(Grid::from_vec(
                geom,
                bytes.into_iter().map(|b| b == 1).collect(),
            )?)
        }
    })
}
