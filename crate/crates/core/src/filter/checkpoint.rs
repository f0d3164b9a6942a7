//! Binary filter checkpoints.
//!
//! Layout, little endian: magic, version `u32`, storage width `u8`,
//! length-prefixed JSON of the config and the sensor rig, the motion and
//! resampling epochs, motion since the last correction, the current
//! estimate, the particle count and then `x, y, θ, w` of every particle as
//! `f64`. Storage values widen to `f64` exactly, so a restored filter
//! continues bit-identically.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::models::{OdometryDelta, Pose2D, SensorRig};
use crate::scalar::StorageScalar;

use super::pool::{Particle, ParticlePool};
use super::{FilterConfig, ParticleFilter};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TOFMCLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_JSON: u32 = 1 << 20;

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_json<T: serde::Serialize>(out: &mut Vec<u8>, v: &T) -> Result<()> {
    let json = serde_json::to_vec(v).map_err(|e| Error::format(e.to_string()))?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::format(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self) -> Result<T> {
        let len = self.u32()?;
        if len > MAX_JSON {
            return Err(Error::format("checkpoint section too large"));
        }
        let mut buf = vec![0u8; len as usize];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::format(format!("truncated checkpoint: {e}")))?;
        serde_json::from_slice(&buf)
            .map_err(|e| Error::format(format!("bad checkpoint section: {e}")))
    }
}

impl<S: StorageScalar> ParticleFilter<S> {
    pub fn save_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = Vec::with_capacity(128 + 32 * self.len());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.push(S::BYTES as u8);
        put_json(&mut buf, &self.config)?;
        put_json(&mut buf, &self.rig)?;
        buf.extend_from_slice(&self.motion_epoch.to_le_bytes());
        buf.extend_from_slice(&self.resample_epoch.to_le_bytes());
        let u = self.since_correction;
        for v in [
            u.dx,
            u.dy,
            u.dtheta,
            self.estimate.x,
            self.estimate.y,
            self.estimate.theta,
        ] {
            put_f64(&mut buf, v);
        }
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for p in self.particles() {
            for v in [p.x.load(), p.y.load(), p.theta.load(), p.weight.load()] {
                put_f64(&mut buf, v);
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn load_checkpoint<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader { inner: input };
        if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
            return Err(Error::format("not a filter checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let [width] = r.bytes::<1>()?;
        if width as usize != S::BYTES {
            return Err(Error::format(format!(
                "checkpoint stores {width}-byte particles, expected {} ({})",
                S::BYTES,
                S::NAME
            )));
        }
        let config: FilterConfig = r.json()?;
        let rig: SensorRig = r.json()?;
        let motion_epoch = r.u64()?;
        let resample_epoch = r.u64()?;
        let since_correction = OdometryDelta::new(r.f64()?, r.f64()?, r.f64()?);
        let estimate = Pose2D {
            x: r.f64()?,
            y: r.f64()?,
            theta: r.f64()?,
        };
        let n = r.u64()? as usize;
        if n != config.particles {
            return Err(Error::format(
                "checkpoint particle count disagrees with its config",
            ));
        }
        let mut particles = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let (x, y, theta, w) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let p = Particle {
                x: S::store(x),
                y: S::store(y),
                theta: S::store(theta),
                weight: S::store(w),
            };
            if p.x.load().to_bits() != x.to_bits() || p.theta.load().to_bits() != theta.to_bits() {
                return Err(Error::format(
                    "checkpoint value not representable in storage type",
                ));
            }
            particles.push(p);
        }
        let mut filter = Self::with_pool(config, rig, ParticlePool::new(particles))?;
        filter.motion_epoch = motion_epoch;
        filter.resample_epoch = resample_epoch;
        filter.since_correction = since_correction;
        filter.estimate = estimate;
        Ok(filter)
    }
}
