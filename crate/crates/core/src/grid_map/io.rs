//! Map and field files.
//!
//! Maps use the common robotics convention: a binary graymap (P5, one byte
//! per cell, top row first; 0 occupied, 254 free, 205 unknown) next to a YAML
//! sidecar carrying `image`, `resolution` and `origin`. Graymaps written by
//! other tools are classified with the sidecar's thresholds.
//!
//! Exported fields are a 16-byte little-endian header
//! `{ b"EDT", policy: u8, width: u32, height: u32, r_max: f32 }` followed by
//! row-major values: `f32` for fp32, `u8` codes for the quantized policies.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CellState, DistanceField, FieldValues, NumericPolicy, OccupancyGrid};
use crate::error::{Error, Result};

pub const PGM_OCCUPIED: u8 = 0;
pub const PGM_FREE: u8 = 254;
pub const PGM_UNKNOWN: u8 = 205;

pub const FIELD_MAGIC: &[u8; 3] = b"EDT";
pub const FIELD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMetadata {
    pub image: String,
    pub resolution: f64,
    /// `[x, y, yaw]` of the lower-left corner of the map.
    pub origin: Vec<f64>,
    #[serde(default)]
    pub negate: i32,
    #[serde(default = "default_occupied_thresh")]
    pub occupied_thresh: f64,
    #[serde(default = "default_free_thresh")]
    pub free_thresh: f64,
}

fn default_occupied_thresh() -> f64 {
    0.65
}

fn default_free_thresh() -> f64 {
    0.196
}

/// Encodes a grid as a binary graymap.
pub fn encode_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    for row in (0..grid.height()).rev() {
        out.extend((0..grid.width()).map(|col| match grid.get(col, row) {
            CellState::Occupied => PGM_OCCUPIED,
            CellState::Free => PGM_FREE,
            CellState::Unknown => PGM_UNKNOWN,
        }));
    }
    out
}

struct Graymap {
    width: usize,
    height: usize,
    maxval: u32,
    // Top row first.
    pixels: Vec<u32>,
}

fn parse_pgm(bytes: &[u8]) -> Result<Graymap> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated graymap header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::format(format!("bad graymap number '{s}'")))
    };
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)? as u32;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(format!("bad graymap maxval {maxval}")));
    }
    let n = width * height;
    let pixels = match magic.as_str() {
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let data = &bytes[(pos + 1).min(bytes.len())..];
            if maxval < 256 {
                if data.len() < n {
                    return Err(Error::format("truncated graymap raster"));
                }
                data[..n].iter().map(|&b| b as u32).collect()
            } else {
                if data.len() < 2 * n {
                    return Err(Error::format("truncated graymap raster"));
                }
                data[..2 * n]
                    .chunks(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                    .collect()
            }
        }
        "P2" => {
            let mut px = Vec::with_capacity(n);
            for _ in 0..n {
                px.push(num(token()?)? as u32);
            }
            px
        }
        other => return Err(Error::format(format!("unsupported graymap type '{other}'"))),
    };
    Ok(Graymap {
        width,
        height,
        maxval,
        pixels,
    })
}

/// Decodes a graymap into a grid using occupancy thresholds.
pub fn decode_pgm(bytes: &[u8], meta: &MapMetadata) -> Result<OccupancyGrid> {
    let gm = parse_pgm(bytes)?;
    let origin = [
        *meta.origin.first().unwrap_or(&0.0),
        *meta.origin.get(1).unwrap_or(&0.0),
    ];
    let mut cells = vec![CellState::Unknown; gm.width * gm.height];
    for (i, &v) in gm.pixels.iter().enumerate() {
        let (img_row, col) = (i / gm.width, i % gm.width);
        let row = gm.height - 1 - img_row;
        let mut p = (gm.maxval - v.min(gm.maxval)) as f64 / gm.maxval as f64;
        if meta.negate != 0 {
            p = 1.0 - p;
        }
        let state = if p > meta.occupied_thresh {
            CellState::Occupied
        } else if p < meta.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        };
        cells[row * gm.width + col] = state;
    }
    OccupancyGrid::new(gm.width, gm.height, meta.resolution, origin, cells)
}

/// Writes `<stem>.yaml` and `<stem>.pgm`. Returns the sidecar path.
pub fn save_map(grid: &OccupancyGrid, yaml_path: impl AsRef<Path>) -> Result<PathBuf> {
    let yaml_path = yaml_path.as_ref().to_path_buf();
    let pgm_path = yaml_path.with_extension("pgm");
    let image = pgm_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::input("map path has no file name"))?;
    let meta = MapMetadata {
        image,
        resolution: grid.resolution(),
        origin: vec![grid.origin()[0], grid.origin()[1], 0.0],
        negate: 0,
        occupied_thresh: default_occupied_thresh(),
        free_thresh: default_free_thresh(),
    };
    fs::write(&pgm_path, encode_pgm(grid))?;
    let yaml = serde_yaml::to_string(&meta).map_err(|e| Error::format(e.to_string()))?;
    fs::write(&yaml_path, yaml)?;
    Ok(yaml_path)
}

/// Loads a map from its YAML sidecar; the image path is relative to it.
pub fn load_map(yaml_path: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let yaml_path = yaml_path.as_ref();
    let text = fs::read_to_string(yaml_path)?;
    let meta: MapMetadata = serde_yaml::from_str(&text)
        .map_err(|e| Error::format(format!("{}: {e}", yaml_path.display())))?;
    let image = Path::new(&meta.image);
    let image = if image.is_absolute() {
        image.to_path_buf()
    } else {
        yaml_path.parent().unwrap_or(Path::new(".")).join(image)
    };
    decode_pgm(&fs::read(image)?, &meta)
}

pub fn write_field<W: Write>(field: &DistanceField, mut w: W) -> Result<()> {
    let mut header = [0u8; FIELD_HEADER_LEN];
    header[..3].copy_from_slice(FIELD_MAGIC);
    header[3] = field.policy().tag();
    header[4..8].copy_from_slice(&(field.width() as u32).to_le_bytes());
    header[8..12].copy_from_slice(&(field.height() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(field.r_max() as f32).to_le_bytes());
    w.write_all(&header)?;
    match field.raw() {
        FieldValues::Full(v) => {
            let mut buf = Vec::with_capacity(v.len() * 4);
            v.iter()
                .for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
            w.write_all(&buf)?;
        }
        FieldValues::Quantized(c) => w.write_all(c)?,
    }
    Ok(())
}

/// Reads an exported field. The header carries no placement, so resolution
/// and origin are supplied by the caller (usually from the map sidecar).
pub fn read_field<R: Read>(mut r: R, resolution: f64, origin: [f64; 2]) -> Result<DistanceField> {
    let mut header = [0u8; FIELD_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..3] != FIELD_MAGIC {
        return Err(Error::format("not a distance field file"));
    }
    let policy = NumericPolicy::from_tag(header[3])
        .ok_or_else(|| Error::format(format!("unknown policy tag {}", header[3])))?;
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let r_max = f32::from_le_bytes(header[12..16].try_into().unwrap()) as f64;
    let n = width * height;
    let values = if policy.quantized_map() {
        let mut c = vec![0u8; n];
        r.read_exact(&mut c)?;
        FieldValues::Quantized(c)
    } else {
        let mut buf = vec![0u8; 4 * n];
        r.read_exact(&mut buf)?;
        FieldValues::Full(
            buf.chunks(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    };
    DistanceField::from_parts(width, height, resolution, origin, r_max, policy, values)
}
