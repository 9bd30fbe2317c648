//! PGM (P2/P5, 8-bit) map images with a JSON metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CellIndex, CellState, GridError, OccupancyGrid};
use crate::geometry::Pose2D;

const FREE_PIXEL: u8 = 254;
const OCCUPIED_PIXEL: u8 = 0;
const UNKNOWN_PIXEL: u8 = 205;

#[derive(Debug, Error)]
pub enum MapLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic number {0:?}: expected P2 or P5")]
    BadMagic(String),
    #[error("missing header field `{0}`")]
    MissingHeaderField(&'static str),
    #[error("invalid header field `{field}`: {value:?}")]
    BadHeaderField { field: &'static str, value: String },
    #[error("maxval {0} is not an 8-bit value (1..=255)")]
    UnsupportedMaxval(u32),
    #[error("pixel count mismatch: header declares {expected}, found {got}")]
    PixelCountMismatch { expected: usize, got: usize },
    #[error("pixel value {value} exceeds maxval {maxval}")]
    PixelOutOfRange { value: u32, maxval: u32 },
    #[error("metadata: {0}")]
    MetadataJson(#[from] serde_json::Error),
    #[error("metadata field `{field}`: {message}")]
    Metadata { field: &'static str, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Map sidecar. Field names follow the usual map-server convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub resolution: f64,
    pub origin: [f64; 3],
    #[serde(default = "default_occupied_thresh")]
    pub occupied_thresh: f64,
    #[serde(default = "default_free_thresh")]
    pub free_thresh: f64,
}

fn default_occupied_thresh() -> f64 {
    0.5
}

fn default_free_thresh() -> f64 {
    0.9
}

impl MapMetadata {
    pub fn for_grid(map: &OccupancyGrid) -> Self {
        let o = map.origin();
        Self {
            resolution: map.resolution(),
            origin: [o.x, o.y, o.theta],
            occupied_thresh: default_occupied_thresh(),
            free_thresh: default_free_thresh(),
        }
    }

    fn validate(&self) -> Result<(), MapLoadError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(MapLoadError::Metadata {
                field: "resolution",
                message: format!("must be positive, got {}", self.resolution),
            });
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(MapLoadError::Metadata { field: "origin", message: "must be finite".into() });
        }
        for (field, v) in [("occupied_thresh", self.occupied_thresh), ("free_thresh", self.free_thresh)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MapLoadError::Metadata { field, message: format!("must lie in [0, 1], got {v}") });
            }
        }
        if self.occupied_thresh > self.free_thresh {
            return Err(MapLoadError::Metadata {
                field: "occupied_thresh",
                message: "must not exceed free_thresh".into(),
            });
        }
        Ok(())
    }

    /// Tri-level classification of a pixel against the thresholds.
    pub fn classify(&self, value: u8, maxval: u8) -> CellState {
        let v = f64::from(value) / f64::from(maxval);
        if v < self.occupied_thresh {
            CellState::Occupied
        } else if v > self.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

/// Decoded 8-bit greyscale image, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

pub fn parse_metadata(text: &str) -> Result<MapMetadata, MapLoadError> {
    let meta: MapMetadata = serde_json::from_str(text)?;
    meta.validate()?;
    Ok(meta)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            None
        } else {
            std::str::from_utf8(&self.bytes[start..self.pos]).ok()
        }
    }

    fn number(&mut self, field: &'static str) -> Result<u32, MapLoadError> {
        let tok = self.token().ok_or(MapLoadError::MissingHeaderField(field))?;
        tok.parse().map_err(|_| MapLoadError::BadHeaderField { field, value: tok.to_string() })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm, MapLoadError> {
    let mut rd = HeaderReader { bytes, pos: 0 };
    let magic = rd.token().ok_or(MapLoadError::MissingHeaderField("magic"))?;
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        other => return Err(MapLoadError::BadMagic(other.to_string())),
    };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    if width == 0 {
        return Err(MapLoadError::BadHeaderField { field: "width", value: "0".into() });
    }
    if height == 0 {
        return Err(MapLoadError::BadHeaderField { field: "height", value: "0".into() });
    }
    let maxval = rd.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(MapLoadError::UnsupportedMaxval(maxval));
    }
    let expected = width * height;

    let pixels: Vec<u8> = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let data = bytes.get(rd.pos + 1..).unwrap_or(&[]);
        if data.len() != expected {
            return Err(MapLoadError::PixelCountMismatch { expected, got: data.len() });
        }
        data.to_vec()
    } else {
        let mut values = Vec::with_capacity(expected);
        while let Some(tok) = rd.token() {
            let v: u32 =
                tok.parse().map_err(|_| MapLoadError::BadHeaderField { field: "pixel", value: tok.to_string() })?;
            values.push(v);
        }
        if values.len() != expected {
            return Err(MapLoadError::PixelCountMismatch { expected, got: values.len() });
        }
        values.into_iter().map(|v| if v > 255 { 255 } else { v as u8 }).collect()
    };
    if let Some(&v) = pixels.iter().find(|&&v| u32::from(v) > maxval) {
        return Err(MapLoadError::PixelOutOfRange { value: u32::from(v), maxval });
    }
    Ok(Pgm { width, height, maxval: maxval as u8, pixels })
}

/// Builds a grid from a decoded image. Image row 0 is the top of the map.
pub fn grid_from_pgm(pgm: &Pgm, meta: &MapMetadata) -> Result<OccupancyGrid, MapLoadError> {
    let mut cells = vec![CellState::Unknown; pgm.width * pgm.height];
    for row in 0..pgm.height {
        let iy = pgm.height - 1 - row;
        for ix in 0..pgm.width {
            cells[iy * pgm.width + ix] = meta.classify(pgm.pixels[row * pgm.width + ix], pgm.maxval);
        }
    }
    Ok(OccupancyGrid::new(pgm.width, pgm.height, meta.resolution, Pose2D::from(meta.origin), cells)?)
}

fn read(path: &Path) -> Result<Vec<u8>, MapLoadError> {
    fs::read(path).map_err(|source| MapLoadError::Io { path: path.to_path_buf(), source })
}

pub fn load_map(image: &Path, metadata: &Path) -> Result<OccupancyGrid, MapLoadError> {
    let meta_bytes = read(metadata)?;
    let meta = parse_metadata(&String::from_utf8_lossy(&meta_bytes))?;
    let pgm = parse_pgm(&read(image)?)?;
    grid_from_pgm(&pgm, &meta)
}

/// Binary P5 encoding of a grid.
pub fn write_pgm(map: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    for row in 0..map.height() {
        let iy = map.height() - 1 - row;
        for ix in 0..map.width() {
            out.push(match map.get(CellIndex::new(ix, iy)) {
                CellState::Free => FREE_PIXEL,
                CellState::Occupied => OCCUPIED_PIXEL,
                CellState::Unknown => UNKNOWN_PIXEL,
            });
        }
    }
    out
}

pub fn save_map(map: &OccupancyGrid, image: &Path, metadata: &Path) -> std::io::Result<()> {
    fs::write(image, write_pgm(map))?;
    let meta = serde_json::to_string_pretty(&MapMetadata::for_grid(map))?;
    fs::write(metadata, meta + "\n")
}
