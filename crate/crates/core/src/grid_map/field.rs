use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Scalar;

use super::OccupancyGrid;

/// Storage precision of the distance field and the particles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericPolicy {
    /// 32-bit field values, 32-bit particles.
    #[default]
    Fp32,
    /// 8-bit quantized field, 32-bit particles.
    Fp32Qm,
    /// 8-bit quantized field, 16-bit particles.
    Fp16Qm,
}

impl NumericPolicy {
    pub const ALL: [NumericPolicy; 3] = [Self::Fp32, Self::Fp32Qm, Self::Fp16Qm];

    pub fn quantized_map(self) -> bool {
        !matches!(self, Self::Fp32)
    }

    pub fn half_particles(self) -> bool {
        matches!(self, Self::Fp16Qm)
    }

    pub fn tag(self) -> u8 {
        match self {
            Self::Fp32 => 0,
            Self::Fp32Qm => 1,
            Self::Fp16Qm => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.tag() == tag)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fp32 => "fp32",
            Self::Fp32Qm => "fp32qm",
            Self::Fp16Qm => "fp16qm",
        }
    }

    /// Bytes per map cell: occupancy byte plus one field value.
    pub fn bytes_per_cell(self) -> u64 {
        if self.quantized_map() {
            2
        } else {
            5
        }
    }

    /// Bytes per particle: four components, double-buffered.
    pub fn bytes_per_particle(self) -> u64 {
        if self.half_particles() {
            2 * 4 * 2
        } else {
            2 * 4 * 4
        }
    }
}

impl fmt::Display for NumericPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NumericPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" => Ok(Self::Fp32),
            "fp32qm" => Ok(Self::Fp32Qm),
            "fp16qm" => Ok(Self::Fp16Qm),
            other => Err(Error::input(format!(
                "unknown policy '{other}' (expected fp32, fp32qm or fp16qm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MemoryFootprint {
    pub map_bytes: u64,
    pub particle_bytes: u64,
}

impl MemoryFootprint {
    pub fn total(&self) -> u64 {
        self.map_bytes + self.particle_bytes
    }
}

/// Bytes needed for a map of `grid_cells` cells and `n_particles` particles.
pub fn memory_footprint(
    grid_cells: u64,
    n_particles: u64,
    policy: NumericPolicy,
) -> MemoryFootprint {
    MemoryFootprint {
        map_bytes: grid_cells * policy.bytes_per_cell(),
        particle_bytes: n_particles * policy.bytes_per_particle(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    Full(Vec<f32>),
    /// Codes `round(v / r_max * 255)`.
    Quantized(Vec<u8>),
}

/// Truncated distance to the nearest obstacle for every cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    r_max: f64,
    policy: NumericPolicy,
    values: FieldValues,
    // Dequantization table for the quantized policies.
    lut: Box<[f64; 256]>,
}

#[inline]
pub(crate) fn quantize_value(v: f64, r_max: f64) -> u8 {
    // Round half up; inputs are already in [0, r_max].
    (v / r_max * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
pub(crate) fn dequantize_code(code: u8, r_max: f64) -> f64 {
    code as f64 * r_max / 255.0
}

fn make_lut(r_max: f64) -> Box<[f64; 256]> {
    let mut lut = Box::new([0.0; 256]);
    for (c, v) in lut.iter_mut().enumerate() {
        *v = dequantize_code(c as u8, r_max);
    }
    lut
}

impl DistanceField {
    pub(crate) fn from_full(grid: &OccupancyGrid, r_max: f64, values: Vec<f32>) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: grid.origin(),
            r_max,
            policy: NumericPolicy::Fp32,
            values: FieldValues::Full(values),
            lut: make_lut(r_max),
        }
    }

    /// Assembles a field from raw parts, e.g. when reading an exported file.
    pub fn from_parts(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        r_max: f64,
        policy: NumericPolicy,
        values: FieldValues,
    ) -> crate::Result<Self> {
        let len = match &values {
            FieldValues::Full(v) => v.len(),
            FieldValues::Quantized(v) => v.len(),
        };
        if len != width * height {
            return Err(Error::input(format!(
                "field of {width}x{height} needs {} values, got {len}",
                width * height
            )));
        }
        if matches!(values, FieldValues::Full(_)) == policy.quantized_map() {
            return Err(Error::input(format!(
                "value storage does not match policy {policy}"
            )));
        }
        if !(r_max > 0.0) {
            return Err(Error::input("r_max must be positive"));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            r_max,
            policy,
            values,
            lut: make_lut(r_max),
        })
    }

    /// Stores the field under `policy`. Quantized policies keep 8-bit codes;
    /// converting a quantized field back to fp32 yields its dequantized values.
    pub fn with_policy(&self, policy: NumericPolicy) -> DistanceField {
        let values = if policy.quantized_map() {
            FieldValues::Quantized(
                (0..self.len())
                    .map(|i| quantize_value(self.value_at(i), self.r_max))
                    .collect(),
            )
        } else {
            FieldValues::Full((0..self.len()).map(|i| self.value_at(i) as f32).collect())
        };
        DistanceField {
            policy,
            values,
            ..self.clone()
        }
    }

    /// 8-bit quantized copy of this field (fp32qm).
    pub fn quantize(&self) -> DistanceField {
        self.with_policy(NumericPolicy::Fp32Qm)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn policy(&self) -> NumericPolicy {
        self.policy
    }

    pub fn raw(&self) -> &FieldValues {
        &self.values
    }

    /// Quantization step `r_max / 255`, or 0 at full precision.
    pub fn step(&self) -> f64 {
        if self.policy.quantized_map() {
            self.r_max / 255.0
        } else {
            0.0
        }
    }

    /// Dequantized value of the cell with storage index `i`.
    #[inline]
    pub fn value_at(&self, i: usize) -> f64 {
        match &self.values {
            FieldValues::Full(v) => v[i] as f64,
            FieldValues::Quantized(c) => self.lut[c[i] as usize],
        }
    }

    #[inline]
    pub fn value(&self, col: usize, row: usize) -> f64 {
        self.value_at(row * self.width + col)
    }

    pub fn values_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value_at(i)).collect()
    }

    /// Distance at a world point: the value of the containing cell, or
    /// `r_max` outside the map (and for non-finite input).
    #[inline]
    pub fn lookup(&self, x: f64, y: f64) -> f64 {
        let cx = (x - self.origin[0]) / self.resolution;
        let cy = (y - self.origin[1]) / self.resolution;
        // Negated comparisons also reject NaN.
        if !(cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64) {
            return self.r_max;
        }
        self.value(cx as usize, cy as usize)
    }

    /// [`lookup`](Self::lookup) in the caller's scalar type.
    #[inline]
    pub fn lookup_point<T: Scalar>(&self, x: T, y: T) -> T {
        T::of(self.lookup(x.as_f64(), y.as_f64()))
    }
}
