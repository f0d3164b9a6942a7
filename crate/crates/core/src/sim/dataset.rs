//! Sequence files.
//!
//! JSON lines: the first line is the [`SequenceHeader`], then one object per
//! tick with fields in this order:
//!
//! ```text
//! {"t": time, "truth": [x, y, θ], "odom": [dx, dy, dθ] | null,
//!  "front": {"t": time, "r": [range | null; zones]} | null, "rear": ...}
//! ```
//!
//! Invalid zones are written as `null`. The binary variant stores the same
//! content little endian: magic, `u32` version, length-prefixed header
//! JSON, then per tick `t`, truth and odometry as `f64`, a presence byte
//! (bit 0 odometry, bit 1 front, bit 2 rear), and per present scan its
//! timestamp, zone count `u8`, validity mask `u64` and valid ranges as `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{OdometryDelta, Pose2D, SensorId, ToFScan, Zone};

use super::sequence::{SequenceHeader, SequenceRecord, Tick};

pub const BINARY_MAGIC: &[u8; 8] = b"TOFMCLSQ";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanLine {
    t: f64,
    r: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TickLine {
    t: f64,
    truth: [f64; 3],
    odom: Option<[f64; 3]>,
    front: Option<ScanLine>,
    rear: Option<ScanLine>,
}

fn scan_line(s: &ToFScan) -> ScanLine {
    ScanLine {
        t: s.timestamp,
        r: s.zones()
            .iter()
            .map(|z| z.valid.then_some(z.range))
            .collect(),
    }
}

fn scan_from_line(line: ScanLine, sensor: SensorId) -> Result<ToFScan> {
    let zones = line
        .r
        .into_iter()
        .map(|r| r.map_or(Zone::invalid(), Zone::valid))
        .collect();
    ToFScan::new(line.t, sensor, zones)
}

pub fn write_jsonl<W: Write>(record: &SequenceRecord, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let json = |e: serde_json::Error| Error::format(e.to_string());
    serde_json::to_writer(&mut out, &record.header).map_err(json)?;
    out.write_all(b"\n")?;
    for t in &record.ticks {
        let line = TickLine {
            t: t.time,
            truth: [t.truth.x, t.truth.y, t.truth.theta],
            odom: t.odometry.map(|u| [u.dx, u.dy, u.dtheta]),
            front: t.front.as_ref().map(scan_line),
            rear: t.rear.as_ref().map(scan_line),
        };
        serde_json::to_writer(&mut out, &line).map_err(json)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: Read>(input: R) -> Result<SequenceRecord> {
    let mut lines = BufReader::new(input).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format("empty sequence file"))??;
    let header: SequenceHeader = serde_json::from_str(&first)
        .map_err(|e| Error::format(format!("line 1: bad header: {e}")))?;
    let mut ticks = Vec::with_capacity(header.ticks);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: String| Error::format(format!("line {}: {e}", i + 2));
        let l: TickLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        ticks.push(Tick {
            time: l.t,
            truth: Pose2D {
                x: l.truth[0],
                y: l.truth[1],
                theta: l.truth[2],
            },
            odometry: l.odom.map(|o| OdometryDelta::new(o[0], o[1], o[2])),
            front: l
                .front
                .map(|s| scan_from_line(s, SensorId::Front))
                .transpose()
                .map_err(|e| at(e.to_string()))?,
            rear: l
                .rear
                .map(|s| scan_from_line(s, SensorId::Rear))
                .transpose()
                .map_err(|e| at(e.to_string()))?,
        });
    }
    let record = SequenceRecord { header, ticks };
    record.validate()?;
    Ok(record)
}

pub fn write_binary<W: Write>(record: &SequenceRecord, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let header = serde_json::to_vec(&record.header).map_err(|e| Error::format(e.to_string()))?;
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&super::sequence::SCHEMA_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for t in &record.ticks {
        let u = t.odometry.unwrap_or_default();
        for v in [
            t.time,
            t.truth.x,
            t.truth.y,
            t.truth.theta,
            u.dx,
            u.dy,
            u.dtheta,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        let flags = t.odometry.is_some() as u8
            | (t.front.is_some() as u8) << 1
            | (t.rear.is_some() as u8) << 2;
        out.write_all(&[flags])?;
        for s in [&t.front, &t.rear].into_iter().flatten() {
            out.write_all(&s.timestamp.to_le_bytes())?;
            out.write_all(&[s.zones().len() as u8])?;
            let mask = s
                .zones()
                .iter()
                .enumerate()
                .fold(0u64, |m, (i, z)| m | (z.valid as u64) << i);
            out.write_all(&mask.to_le_bytes())?;
            for z in s.zones().iter().filter(|z| z.valid) {
                out.write_all(&z.range.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

struct Bytes<R> {
    inner: R,
}

impl<R: Read> Bytes<R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::format(format!("truncated sequence file: {e}")))?;
        Ok(b)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_binary<R: Read>(input: R) -> Result<SequenceRecord> {
    let mut r = Bytes {
        inner: BufReader::new(input),
    };
    if &r.take::<8>()? != BINARY_MAGIC {
        return Err(Error::format("not a binary sequence file"));
    }
    let version = u32::from_le_bytes(r.take()?);
    if version != super::sequence::SCHEMA_VERSION {
        return Err(Error::format(format!(
            "sequence schema v{version} is not supported (expected v{})",
            super::sequence::SCHEMA_VERSION
        )));
    }
    let len = u32::from_le_bytes(r.take()?) as usize;
    if len > 1 << 20 {
        return Err(Error::format("sequence header too large"));
    }
    let mut buf = vec![0u8; len];
    r.inner.read_exact(&mut buf)?;
    let header: SequenceHeader =
        serde_json::from_slice(&buf).map_err(|e| Error::format(format!("bad header: {e}")))?;
    let mut ticks = Vec::with_capacity(header.ticks.min(1 << 24));
    for _ in 0..header.ticks {
        let mut v = [0.0f64; 7];
        for x in v.iter_mut() {
            *x = r.f64()?;
        }
        let [flags] = r.take::<1>()?;
        let mut scan = |sensor| -> Result<ToFScan> {
            let t = r.f64()?;
            let [count] = r.take::<1>()?;
            let mask = u64::from_le_bytes(r.take()?);
            let mut zones = Vec::with_capacity(count as usize);
            for i in 0..count as usize {
                zones.push(if mask >> i & 1 == 1 {
                    Zone::valid(r.f64()?)
                } else {
                    Zone::invalid()
                });
            }
            ToFScan::new(t, sensor, zones)
        };
        let front = if flags & 2 != 0 {
            Some(scan(SensorId::Front)?)
        } else {
            None
        };
        let rear = if flags & 4 != 0 {
            Some(scan(SensorId::Rear)?)
        } else {
            None
        };
        ticks.push(Tick {
            time: v[0],
            truth: Pose2D {
                x: v[1],
                y: v[2],
                theta: v[3],
            },
            odometry: (flags & 1 != 0).then(|| OdometryDelta::new(v[4], v[5], v[6])),
            front,
            rear,
        });
    }
    let record = SequenceRecord { header, ticks };
    record.validate()?;
    Ok(record)
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Writes a sequence; `.bin` files use the binary layout, others JSON lines.
pub fn save_sequence(record: &SequenceRecord, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    if is_binary(path) {
        write_binary(record, file)
    } else {
        write_jsonl(record, file)
    }
}

pub fn load_sequence(path: &Path) -> Result<SequenceRecord> {
    let file = File::open(path)?;
    if is_binary(path) {
        read_binary(file)
    } else {
        read_jsonl(file)
    }
}
