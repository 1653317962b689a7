//! JSON-lines walk traces and replay sessions.
//!
//! One record per line, discriminated by `type`:
//!
//! ```text
//! {"type":"Meta","key":"format_version","value":1}
//! {"type":"WaypointTap","t":0.0,"lon":-122.4,"lat":37.79}
//! {"type":"Gnss","t":0.0,"lon":-122.4001,"lat":37.7901,"uncertainty_radius":14.2}
//! {"type":"Footstep","t":0.0}
//! {"type":"Velocity","t":0.0,"vx":0.0,"vy":0.0}
//! ```
//!
//! Times are seconds since session start, velocities m/s east/north,
//! radii meters. Lines of unknown type are kept as `Meta` records with key
//! [`UNKNOWN_RECORD_KEY`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::filter::{GnssFix, VelocitySample};
use crate::geomap::{GeoPoint, GeoSegmentMap};
use crate::geometry::LocalPoint;

pub const FORMAT_VERSION: u64 = 1;
pub const UNKNOWN_RECORD_KEY: &str = "unknown_record";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: timestamp {t} is earlier than the previous {previous}")]
    TimestampRegression { line: usize, t: f64, previous: f64 },
    #[error("unsupported trace format version {0}")]
    UnsupportedVersion(Value),
    #[error("need at least 2 waypoint taps, got {0}")]
    TooFewTaps(usize),
    #[error("waypoint taps at {0} and {1} are not in strictly increasing time")]
    TapOrder(f64, f64),
    #[error("footstep at t = {0} lies outside the waypoint taps")]
    FootstepOutsideTaps(f64),
    #[error("footstep at t = {0} has no velocity record")]
    MissingVelocity(f64),
    #[error("trace has no footsteps")]
    NoFootsteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TraceRecord {
    Footstep { t: f64 },
    Velocity { t: f64, vx: f64, vy: f64 },
    Gnss { t: f64, lon: f64, lat: f64, uncertainty_radius: f64 },
    WaypointTap { t: f64, lon: f64, lat: f64 },
    Meta { key: String, value: Value },
}

const KNOWN_TYPES: [&str; 5] = ["Footstep", "Velocity", "Gnss", "WaypointTap", "Meta"];

impl TraceRecord {
    pub fn timestamp(&self) -> Option<f64> {
        match *self {
            Self::Footstep { t }
            | Self::Velocity { t, .. }
            | Self::Gnss { t, .. }
            | Self::WaypointTap { t, .. } => Some(t),
            Self::Meta { .. } => None,
        }
    }
}

/// Parses one line; `line` is 1-based and only used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<TraceRecord, TraceError> {
    let malformed = |message: String| TraceError::Malformed { line, message };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing string field `type`".into()))?;
    if !KNOWN_TYPES.contains(&kind) {
        return Ok(TraceRecord::Meta {
            key: UNKNOWN_RECORD_KEY.into(),
            value,
        });
    }
    let record: TraceRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    if let Some(t) = record.timestamp() {
        if !t.is_finite() {
            return Err(malformed(format!("timestamp {t} is not finite")));
        }
    }
    Ok(record)
}

pub fn parse_trace(reader: impl BufRead) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line, line_no)?;
        if let TraceRecord::Meta { key, value } = &record {
            if key == "format_version" && value.as_u64() != Some(FORMAT_VERSION) {
                return Err(TraceError::UnsupportedVersion(value.clone()));
            }
        }
        if let Some(t) = record.timestamp() {
            if t < previous {
                return Err(TraceError::TimestampRegression {
                    line: line_no,
                    t,
                    previous,
                });
            }
            previous = t;
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TraceError> {
    parse_trace(BufReader::new(File::open(path)?))
}

pub fn write_records(records: &[TraceRecord], mut out: impl Write) -> Result<(), TraceError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes records as given; callers put the `format_version` header first.
pub fn write_trace(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<(), TraceError> {
    write_records(records, BufWriter::new(File::create(path)?))
}

/// Places footsteps on the straight segments between consecutive taps. A
/// footstep at a tap time sits on the tap; the `k` footsteps strictly inside
/// an interval sit at fractions `j / (k + 1)` of its segment.
pub fn derive_ground_truth(taps: &[(f64, LocalPoint)], footsteps: &[f64]) -> Result<Vec<LocalPoint>, TraceError> {
    if taps.len() < 2 {
        return Err(TraceError::TooFewTaps(taps.len()));
    }
    if let Some(w) = taps.windows(2).find(|w| !(w[0].0 < w[1].0)) {
        return Err(TraceError::TapOrder(w[0].0, w[1].0));
    }
    let (first, last) = (taps[0].0, taps[taps.len() - 1].0);
    if let Some(&t) = footsteps.iter().find(|&&t| t < first || t > last) {
        return Err(TraceError::FootstepOutsideTaps(t));
    }

    let mut out = Vec::with_capacity(footsteps.len());
    let mut i = 0;
    while i < footsteps.len() {
        let t = footsteps[i];
        // index of the last tap at or before t
        let k = taps.partition_point(|tap| tap.0 <= t) - 1;
        if taps[k].0 == t {
            out.push(taps[k].1);
            i += 1;
            continue;
        }
        let (a, b) = (taps[k], taps[k + 1]);
        let inside = footsteps[i..].iter().take_while(|&&s| s < b.0).count();
        let gaps = (inside + 1) as f64;
        for j in 1..=inside {
            out.push(a.1 + (b.1 - a.1) * (j as f64 / gaps));
        }
        i += inside;
    }
    Ok(out)
}

/// A trace projected into a map's local frame, with per-footstep velocity
/// and derived ground truth.
#[derive(Clone, Debug)]
pub struct ReplaySession {
    pub records: Vec<TraceRecord>,
    pub map: Arc<GeoSegmentMap>,
    pub footstep_times: Vec<f64>,
    /// Velocity reported at each footstep, aligned with `footstep_times`.
    pub velocities: Vec<VelocitySample>,
    pub fixes: Vec<GnssFix>,
    pub taps: Vec<(f64, LocalPoint)>,
    pub truth: Vec<LocalPoint>,
}

impl ReplaySession {
    pub fn new(records: Vec<TraceRecord>, map: Arc<GeoSegmentMap>) -> Result<Self, TraceError> {
        let proj = *map.projection();
        let local = |lon, lat| proj.to_local(GeoPoint::new(lon, lat));
        let mut footstep_times = Vec::new();
        let mut velocity_at = HashMap::new();
        let mut fixes = Vec::new();
        let mut taps = Vec::new();
        for r in &records {
            match *r {
                TraceRecord::Footstep { t } => footstep_times.push(t),
                TraceRecord::Velocity { t, vx, vy } => {
                    velocity_at.insert(t.to_bits(), LocalPoint::new(vx, vy));
                }
                TraceRecord::Gnss {
                    t,
                    lon,
                    lat,
                    uncertainty_radius,
                } => fixes.push(GnssFix {
                    position: local(lon, lat),
                    uncertainty_radius,
                    timestamp: t,
                }),
                TraceRecord::WaypointTap { t, lon, lat } => taps.push((t, local(lon, lat))),
                TraceRecord::Meta { .. } => {}
            }
        }
        if footstep_times.is_empty() {
            return Err(TraceError::NoFootsteps);
        }
        let velocities = footstep_times
            .iter()
            .map(|&t| {
                velocity_at
                    .get(&t.to_bits())
                    .map(|&v| VelocitySample { v, timestamp: t })
                    .ok_or(TraceError::MissingVelocity(t))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let truth = derive_ground_truth(&taps, &footstep_times)?;
        Ok(Self {
            records,
            map,
            footstep_times,
            velocities,
            fixes,
            taps,
            truth,
        })
    }

    /// Session start: the first waypoint tap.
    pub fn start(&self) -> (f64, LocalPoint) {
        self.taps[0]
    }
}
