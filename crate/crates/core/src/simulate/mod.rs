//! Synthetic walks: ground truth from waypoints, a drifting velocity
//! source, street-aligned GNSS noise and a handful of built-in canyon maps.

mod scenarios;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenarios::{builtin_scenario, Scenario, SCENARIO_NAMES};

use crate::filter::{GnssFix, VelocitySample};
use crate::geomap::{GeoMapError, GeoSegmentMap, LocalProjection};
use crate::geometry::LocalPoint;
use crate::trace_io::{TraceRecord, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid waypoint path: {0}")]
    InvalidPath(String),
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("need at least 2 footsteps, got {0}")]
    TooFewFootsteps(usize),
    #[error("unknown scenario '{0}' (expected one of: {list})", list = SCENARIO_NAMES.join(", "))]
    UnknownScenario(String),
    #[error(transparent)]
    Map(#[from] GeoMapError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub waypoints: Vec<LocalPoint>,
    /// Meters per footstep.
    pub step_length: f64,
    /// Footsteps per second.
    pub cadence: f64,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<LocalPoint>, step_length: f64, cadence: f64) -> Result<Self, SimulateError> {
        let path = Self {
            waypoints,
            step_length,
            cadence,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: String| Err(SimulateError::InvalidPath(m));
        if self.waypoints.len() < 2 {
            return bad(format!("need at least 2 waypoints, got {}", self.waypoints.len()));
        }
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return bad(format!("step_length must be positive, got {}", self.step_length));
        }
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return bad(format!("cadence must be positive, got {}", self.cadence));
        }
        if let Some(i) = self.waypoints.iter().position(|w| !w.is_finite()) {
            return bad(format!("waypoint {i} is not finite"));
        }
        if let Some(i) = self.waypoints.windows(2).position(|w| w[0] == w[1]) {
            return bad(format!("waypoints {i} and {} coincide", i + 1));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub timestamp: f64,
    pub position: LocalPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub footsteps: Vec<Footstep>,
    /// Time at which each waypoint is reached, one per waypoint.
    pub tap_times: Vec<f64>,
}

/// Walks each segment at `step_length` spacing; a segment's last (possibly
/// short) step lands exactly on its end waypoint.
pub fn generate_ground_truth(path: &WaypointPath) -> Result<GroundTruth, SimulateError> {
    path.validate()?;
    let mut positions = vec![path.waypoints[0]];
    let mut tap_steps = vec![0usize];
    for w in path.waypoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        // tolerance keeps exact multiples from gaining a zero-length step
        let n = ((len / path.step_length) - 1e-9).ceil().max(1.0) as usize;
        let dir = (b - a) * (1.0 / len);
        for k in 1..n {
            positions.push(a + dir * (k as f64 * path.step_length));
        }
        positions.push(b);
        tap_steps.push(positions.len() - 1);
    }
    let time = |i: usize| i as f64 / path.cadence;
    Ok(GroundTruth {
        footsteps: positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| Footstep {
                timestamp: time(i),
                position,
            })
            .collect(),
        tap_times: tap_steps.into_iter().map(time).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuDriftModel {
    /// Rate at which the velocity frame rotates counterclockwise, rad/s.
    pub heading_drift_rate: f64,
    /// Per-axis velocity noise, m/s.
    pub velocity_noise_sigma: f64,
    pub seed: u64,
}

impl ImuDriftModel {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if !self.heading_drift_rate.is_finite() {
            return Err(SimulateError::InvalidModel("heading_drift_rate is not finite".into()));
        }
        if !(self.velocity_noise_sigma >= 0.0 && self.velocity_noise_sigma.is_finite()) {
            return Err(SimulateError::InvalidModel(format!(
                "velocity_noise_sigma must be nonnegative, got {}",
                self.velocity_noise_sigma
            )));
        }
        Ok(())
    }
}

/// One velocity per footstep: the displacement since the previous footstep
/// over the elapsed time, rotated by `rate × t` and perturbed per axis.
/// Footstep 0 reports zero velocity.
pub fn synthesize_velocity(truth: &[Footstep], drift: &ImuDriftModel) -> Result<Vec<VelocitySample>, SimulateError> {
    drift.validate()?;
    if truth.len() < 2 {
        return Err(SimulateError::TooFewFootsteps(truth.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(drift.seed);
    let mut out = Vec::with_capacity(truth.len());
    out.push(VelocitySample {
        v: LocalPoint::ORIGIN,
        timestamp: truth[0].timestamp,
    });
    for w in truth.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        let dt = cur.timestamp - prev.timestamp;
        let v = (cur.position - prev.position) * (1.0 / dt);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let noise = LocalPoint::new(nx, ny) * drift.velocity_noise_sigma;
        out.push(VelocitySample {
            v: v.rotated(drift.heading_drift_rate * cur.timestamp) + noise,
            timestamp: cur.timestamp,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnssNoiseModel {
    pub along_sigma: f64,
    pub across_sigma: f64,
    /// Mean across-street offset, toward the left of the nearest sidewalk's
    /// bearing. Scenario sidewalks are oriented so that this is the roadway.
    pub across_bias: f64,
    /// Reported uncertainty radius is drawn uniformly from `[min, max]`.
    pub uncertainty_radius_range: (f64, f64),
    /// Closed `[t0, t1]` windows with no fixes.
    pub outage_intervals: Vec<(f64, f64)>,
    pub fix_period: f64,
    pub seed: u64,
}

impl GnssNoiseModel {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: String| Err(SimulateError::InvalidModel(m));
        for (name, v) in [("along_sigma", self.along_sigma), ("across_sigma", self.across_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !self.across_bias.is_finite() {
            return bad("across_bias is not finite".into());
        }
        let (lo, hi) = self.uncertainty_radius_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("bad uncertainty_radius_range [{lo}, {hi}]"));
        }
        if !(self.fix_period > 0.0 && self.fix_period.is_finite()) {
            return bad(format!("fix_period must be positive, got {}", self.fix_period));
        }
        if let Some(&(a, b)) = self.outage_intervals.iter().find(|(a, b)| !(a <= b)) {
            return bad(format!("bad outage interval [{a}, {b}]"));
        }
        Ok(())
    }

    pub fn in_outage(&self, t: f64) -> bool {
        self.outage_intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }
}

/// Linear interpolation of the walked position at time `t`.
pub fn position_at(truth: &[Footstep], t: f64) -> LocalPoint {
    let i = truth.partition_point(|f| f.timestamp <= t);
    if i == 0 {
        return truth[0].position;
    }
    if i == truth.len() {
        return truth[i - 1].position;
    }
    let (a, b) = (truth[i - 1], truth[i]);
    let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
    a.position + (b.position - a.position) * s
}

/// Fixes every `fix_period` seconds from the first footstep, skipping
/// outages. Noise is drawn in the frame of the street nearest the true
/// position: along its bearing and across it (left normal).
pub fn synthesize_gnss(
    truth: &[Footstep],
    map: &GeoSegmentMap,
    model: &GnssNoiseModel,
) -> Result<Vec<GnssFix>, SimulateError> {
    model.validate()?;
    if map.sidewalks().is_empty() {
        return Err(GeoMapError::NoSidewalks.into());
    }
    let Some((first, last)) = truth.first().zip(truth.last()) else {
        return Ok(Vec::new());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let (lo, hi) = model.uncertainty_radius_range;
    let mut fixes = Vec::new();
    for k in 0.. {
        let t = first.timestamp + k as f64 * model.fix_period;
        if t > last.timestamp {
            break;
        }
        if model.in_outage(t) {
            continue;
        }
        let p = position_at(truth, t);
        let along_dir = map.street_direction_at(p)?;
        let za: f64 = rng.sample(StandardNormal);
        let zc: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let along = za * model.along_sigma;
        let across = model.across_bias + zc * model.across_sigma;
        fixes.push(GnssFix {
            position: p + along_dir * along + along_dir.perp() * across,
            uncertainty_radius: lo + (hi - lo) * u,
            timestamp: t,
        });
    }
    Ok(fixes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTrace {
    pub footsteps: Vec<Footstep>,
    pub velocities: Vec<VelocitySample>,
    pub fixes: Vec<GnssFix>,
    pub waypoint_tap_times: Vec<f64>,
    /// Waypoint positions, aligned with `waypoint_tap_times`.
    pub waypoints: Vec<LocalPoint>,
}

impl SyntheticTrace {
    /// Trace records in time order: a format header, then per instant taps,
    /// fixes, footsteps and velocities. Positions become geodetic through
    /// `projection`.
    pub fn to_records(&self, projection: &LocalProjection) -> Vec<TraceRecord> {
        enum Ev<'a> {
            Tap(f64, LocalPoint),
            Fix(&'a GnssFix),
            Step(&'a Footstep, &'a VelocitySample),
        }
        let mut events: Vec<(f64, u8, Ev)> = Vec::new();
        for (&t, &p) in self.waypoint_tap_times.iter().zip(&self.waypoints) {
            events.push((t, 0, Ev::Tap(t, p)));
        }
        for f in &self.fixes {
            events.push((f.timestamp, 1, Ev::Fix(f)));
        }
        for (f, v) in self.footsteps.iter().zip(&self.velocities) {
            events.push((f.timestamp, 2, Ev::Step(f, v)));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut records = vec![TraceRecord::Meta {
            key: "format_version".into(),
            value: FORMAT_VERSION.into(),
        }];
        for (_, _, ev) in events {
            match ev {
                Ev::Tap(t, p) => {
                    let g = projection.to_geo(p);
                    records.push(TraceRecord::WaypointTap {
                        t,
                        lon: g.longitude,
                        lat: g.latitude,
                    });
                }
                Ev::Fix(f) => {
                    let g = projection.to_geo(f.position);
                    records.push(TraceRecord::Gnss {
                        t: f.timestamp,
                        lon: g.longitude,
                        lat: g.latitude,
                        uncertainty_radius: f.uncertainty_radius,
                    });
                }
                Ev::Step(f, v) => {
                    records.push(TraceRecord::Footstep { t: f.timestamp });
                    records.push(TraceRecord::Velocity {
                        t: v.timestamp,
                        vx: v.v.x,
                        vy: v.v.y,
                    });
                }
            }
        }
        records
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
