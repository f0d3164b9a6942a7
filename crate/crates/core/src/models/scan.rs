use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Horizontal field of view of the multizone sensor.
pub const DEFAULT_FOV_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorId {
    Front,
    Rear,
}

impl SensorId {
    /// Mounting yaw relative to the body x axis.
    pub fn mount_yaw(self) -> f64 {
        match self {
            SensorId::Front => 0.0,
            SensorId::Rear => std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZoneLayout {
    #[serde(rename = "4x4")]
    Grid4x4,
    #[default]
    #[serde(rename = "8x8")]
    Grid8x8,
}

impl ZoneLayout {
    pub fn side(self) -> usize {
        match self {
            ZoneLayout::Grid4x4 => 4,
            ZoneLayout::Grid8x8 => 8,
        }
    }

    pub fn zones(self) -> usize {
        self.side() * self.side()
    }

    pub fn from_zone_count(k: usize) -> Option<Self> {
        match k {
            16 => Some(ZoneLayout::Grid4x4),
            64 => Some(ZoneLayout::Grid8x8),
            _ => None,
        }
    }

    /// Rows whose zones look roughly horizontal: the central half.
    pub fn central_rows(self) -> std::ops::Range<usize> {
        let s = self.side();
        s / 4..s - s / 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub range: f64,
    pub valid: bool,
}

impl Zone {
    pub fn valid(range: f64) -> Self {
        Self { range, valid: true }
    }

    pub fn invalid() -> Self {
        Self {
            range: 0.0,
            valid: false,
        }
    }
}

/// One frame of a multizone sensor, zones row-major with row 0 on top and
/// azimuth increasing with the column index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToFScan {
    pub timestamp: f64,
    pub sensor: SensorId,
    zones: Vec<Zone>,
}

impl ToFScan {
    pub fn new(timestamp: f64, sensor: SensorId, zones: Vec<Zone>) -> Result<Self> {
        if ZoneLayout::from_zone_count(zones.len()).is_none() {
            return Err(Error::input(format!(
                "scan must have 16 or 64 zones, got {}",
                zones.len()
            )));
        }
        Ok(Self {
            timestamp,
            sensor,
            zones,
        })
    }

    pub fn layout(&self) -> ZoneLayout {
        ZoneLayout::from_zone_count(self.zones.len()).expect("checked at construction")
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn valid_count(&self) -> usize {
        self.zones.iter().filter(|z| z.valid).count()
    }

    /// Collapses the zone matrix to one reading per column: the median of
    /// the valid zones in the central rows, or `None` if there are none.
    pub fn column_readings(&self) -> Vec<Option<f64>> {
        let layout = self.layout();
        let side = layout.side();
        let mut buf = Vec::with_capacity(side);
        (0..side)
            .map(|col| {
                buf.clear();
                buf.extend(
                    layout
                        .central_rows()
                        .map(|row| self.zones[row * side + col])
                        .filter(|z| z.valid)
                        .map(|z| z.range),
                );
                median(&mut buf)
            })
            .collect()
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Beam directions of one sensor relative to the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry<T> {
    azimuths: Vec<T>,
    mount_yaw: T,
    fov: T,
}

impl<T: Scalar> BeamGeometry<T> {
    pub fn new(azimuths: Vec<T>, mount_yaw: T, fov: T) -> Result<Self> {
        if azimuths.is_empty() {
            return Err(Error::input("beam geometry needs at least one beam"));
        }
        if !(fov > T::zero()) {
            return Err(Error::input("field of view must be positive"));
        }
        let half = fov / T::of(2.0);
        if azimuths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("beam azimuths must be strictly increasing"));
        }
        if azimuths.iter().any(|a| a.abs() > half) {
            return Err(Error::input("beam azimuth outside the field of view"));
        }
        Ok(Self {
            azimuths,
            mount_yaw,
            fov,
        })
    }

    /// `columns` beams at the centers of equal slices of the field of view.
    pub fn evenly_spaced(columns: usize, fov: T, mount_yaw: T) -> Result<Self> {
        let n = T::of(columns as f64);
        let azimuths = (0..columns)
            .map(|c| -fov / T::of(2.0) + (T::of(c as f64) + T::of(0.5)) * fov / n)
            .collect();
        Self::new(azimuths, mount_yaw, fov)
    }

    pub fn for_sensor(sensor: SensorId, layout: ZoneLayout, fov: T) -> Self {
        Self::evenly_spaced(layout.side(), fov, T::of(sensor.mount_yaw()))
            .expect("evenly spaced beams are valid")
    }

    pub fn azimuths(&self) -> &[T] {
        &self.azimuths
    }

    pub fn mount_yaw(&self) -> T {
        self.mount_yaw
    }

    pub fn fov(&self) -> T {
        self.fov
    }

    pub fn len(&self) -> usize {
        self.azimuths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuths.is_empty()
    }
}

/// Front and rear sensor geometries of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub layout: ZoneLayout,
    pub front: BeamGeometry<f64>,
    pub rear: BeamGeometry<f64>,
}

impl SensorRig {
    pub fn new(layout: ZoneLayout, fov_deg: f64) -> Self {
        let fov = fov_deg.to_radians();
        Self {
            layout,
            front: BeamGeometry::for_sensor(SensorId::Front, layout, fov),
            rear: BeamGeometry::for_sensor(SensorId::Rear, layout, fov),
        }
    }

    pub fn geometry(&self, sensor: SensorId) -> &BeamGeometry<f64> {
        match sensor {
            SensorId::Front => &self.front,
            SensorId::Rear => &self.rear,
        }
    }
}

impl Default for SensorRig {
    fn default() -> Self {
        Self::new(ZoneLayout::Grid8x8, DEFAULT_FOV_DEG)
    }
}
