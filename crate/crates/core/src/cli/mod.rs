//! Run pipeline behind the `canyon` binary: scenario or trace input, one of
//! three tracking modes, metric reports and parameter sweeps.

mod args;
mod sweep;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject, Value as GeoValue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use args::{main_with_args, Cli, Command};
pub use sweep::{sweep, write_sweep_csv, Averaging, SweepRow, SweepSpec};

use crate::filter::{FilterConfig, FilterError, GnssFix, Tracker};
use crate::geomap::{self, GeoMapError, GeoSegmentMap};
use crate::geometry::LocalPoint;
use crate::metrics::{self, FootstepEval, MetricSummary, MetricsError};
use crate::simulate::{builtin_scenario, mix_seed, Scenario, SimulateError};
use crate::trace_io::{self, ReplaySession, TraceError, TraceRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Map(#[from] GeoMapError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("trace has no GNSS fixes; gnss_only needs at least one")]
    NoFixes,
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("{0}")]
    InvalidMap(String),
}

impl CliError {
    /// Stable machine-readable category for error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Filter(FilterError::UnknownParameter(_)) => "unknown_parameter",
            Self::Filter(_) => "filter",
            Self::Map(GeoMapError::Io(_)) | Self::Trace(TraceError::Io(_)) | Self::Io { .. } => "io",
            Self::Map(_) => "map",
            Self::Metrics(_) => "metrics",
            Self::Simulate(SimulateError::UnknownScenario(_)) => "unknown_scenario",
            Self::Simulate(_) => "simulate",
            Self::Trace(_) => "trace",
            Self::Config { .. } => "config",
            Self::NoFixes => "no_fixes",
            Self::Sweep(_) => "sweep",
            Self::Usage(_) => "usage",
            Self::InvalidMap(_) => "invalid_map",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"error": self.kind(), "message": self.to_string()})
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    /// Raw GNSS fixes held at footstep times.
    GnssOnly,
    /// Particle filter on the velocity stream and map, no GNSS.
    RoninPf,
    /// Particle filter fusing velocity, map and GNSS.
    GnssRoninPf,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::GnssOnly, Mode::RoninPf, Mode::GnssRoninPf];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GnssOnly => "gnss_only",
            Self::RoninPf => "ronin_pf",
            Self::GnssRoninPf => "gnss_ronin_pf",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Scenario(String),
    Trace { trace: PathBuf, map: PathBuf },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub filter: FilterConfig,
    pub input: Input,
    pub output_dir: Option<PathBuf>,
    /// Drives scenario noise and, mixed with `filter.seed`, the particle RNG.
    pub seed: u64,
}

/// Reproducible description of a run. Contains nothing that depends on
/// where the input came from, so a replayed export summarizes identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    /// Omitted for `gnss_only`, which never reads the filter config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterConfig>,
    pub fixes_used: usize,
    /// Circular mean particle drift angle after the last footstep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_mean_theta: Option<f64>,
    #[serde(flatten)]
    pub metrics: MetricSummary,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub evals: Vec<FootstepEval>,
    pub estimates: Vec<LocalPoint>,
}

impl RunResult {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Particle RNG seed for a run.
pub fn filter_seed(run_seed: u64, config: &FilterConfig) -> u64 {
    mix_seed(run_seed, config.seed ^ 0x5eed)
}

/// Builds the replay session for a synthetic run, going through the same
/// records a file replay would read.
pub fn scenario_session(scenario: &Scenario, seed: u64) -> Result<ReplaySession, CliError> {
    let trace = scenario.synthesize(seed)?;
    let records = trace.to_records(scenario.map.projection());
    Ok(ReplaySession::new(records, Arc::clone(&scenario.map))?)
}

pub fn load_session(trace: &Path, map: &Path) -> Result<ReplaySession, CliError> {
    let map = geomap::load_map(map)?;
    let records = trace_io::read_trace(trace)?;
    Ok(ReplaySession::new(records, Arc::new(map))?)
}

/// Tracks one session in `mode` and evaluates against its derived truth.
pub fn run_session(
    session: &ReplaySession,
    mode: Mode,
    filter: &FilterConfig,
    seed: u64,
) -> Result<RunResult, CliError> {
    let (estimates, fixes_used, final_mean_theta) = match mode {
        Mode::GnssOnly => {
            let (est, used) = gnss_hold(&session.footstep_times, &session.fixes)?;
            (est, used, None)
        }
        Mode::RoninPf | Mode::GnssRoninPf => {
            filter.validate()?;
            let config = FilterConfig {
                seed: filter_seed(seed, filter),
                ..filter.clone()
            };
            let fixes = if mode == Mode::GnssRoninPf {
                session.fixes.as_slice()
            } else {
                &[]
            };
            let (est, used, theta) = track(session, fixes, config)?;
            (est, used, Some(theta))
        }
    };
    let evals = metrics::evaluate(&session.footstep_times, &estimates, &session.truth, &session.map)?;
    let summary = RunSummary {
        mode,
        seed,
        filter: (mode != Mode::GnssOnly).then(|| filter.clone()),
        fixes_used,
        final_mean_theta,
        metrics: metrics::summarize(&evals)?,
    };
    Ok(RunResult {
        summary,
        evals,
        estimates,
    })
}

/// Zero-order hold: each footstep takes the latest fix at or before it;
/// footsteps before the first fix take the first fix.
pub fn gnss_hold(times: &[f64], fixes: &[GnssFix]) -> Result<(Vec<LocalPoint>, usize), CliError> {
    if fixes.is_empty() {
        return Err(CliError::NoFixes);
    }
    let mut used = vec![false; fixes.len()];
    let estimates = times
        .iter()
        .map(|&t| {
            let k = fixes.partition_point(|f| f.timestamp <= t).saturating_sub(1);
            used[k] = true;
            fixes[k].position
        })
        .collect();
    Ok((estimates, used.iter().filter(|&&u| u).count()))
}

/// Runs the filter from the first tap. Returns estimates per footstep, the
/// number of fixes fused and the final mean drift angle.
fn track(
    session: &ReplaySession,
    fixes: &[GnssFix],
    config: FilterConfig,
) -> Result<(Vec<LocalPoint>, usize, f64), CliError> {
    let (t0, start) = session.start();
    let mut tracker = Tracker::new(Arc::clone(&session.map), start, 0.0, t0, config)?;
    let mut estimates = Vec::with_capacity(session.footstep_times.len());
    let mut used = 0;
    let mut last_t = t0;
    let mut next_fix = fixes.partition_point(|f| f.timestamp <= t0);
    let mut theta = tracker.current_estimate().mean_theta;
    for v in &session.velocities {
        if v.timestamp <= last_t {
            // footsteps at the start tap have nothing to propagate
            estimates.push(tracker.current_estimate().position);
            continue;
        }
        // latest fix in (last_t, t]
        let mut fix = None;
        while next_fix < fixes.len() && fixes[next_fix].timestamp <= v.timestamp {
            fix = Some(&fixes[next_fix]);
            next_fix += 1;
        }
        let out = tracker.step(v, fix)?;
        used += usize::from(out.gnss_applied);
        theta = out.estimate.mean_theta;
        estimates.push(out.estimate.position);
        last_t = v.timestamp;
    }
    Ok((estimates, used, theta))
}

pub fn run(config: &RunConfig) -> Result<RunResult, CliError> {
    let session = match &config.input {
        Input::Scenario(name) => scenario_session(&builtin_scenario(name)?, config.seed)?,
        Input::Trace { trace, map } => load_session(trace, map)?,
    };
    let result = run_session(&session, config.mode, &config.filter, config.seed)?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(dir, &result, &session.map)?;
    }
    Ok(result)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes `summary.json`, `evals.csv`, `cdf.csv` and `track.geojson`.
pub fn write_artifacts(dir: &Path, result: &RunResult, map: &GeoSegmentMap) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    fs::write(dir.join("summary.json"), result.summary_json() + "\n").map_err(io_err(dir))?;
    metrics::write_evals_csv(&result.evals, create(&dir.join("evals.csv"))?)?;
    metrics::write_cdf_csv(&result.summary.metrics, create(&dir.join("cdf.csv"))?)?;
    let truth: Vec<LocalPoint> = result.evals.iter().map(|e| e.truth).collect();
    let tracks = FeatureCollection {
        bbox: None,
        features: vec![
            track_feature(&result.estimates, map, result.summary.mode.as_str()),
            track_feature(&truth, map, "truth"),
        ],
        foreign_members: None,
    };
    write_json(&dir.join("track.geojson"), &tracks)
}

fn track_feature(points: &[LocalPoint], map: &GeoSegmentMap, mode: &str) -> Feature {
    let proj = map.projection();
    let coords = points
        .iter()
        .map(|&p| {
            let g = proj.to_geo(p);
            vec![g.longitude, g.latitude]
        })
        .collect();
    let mut props = JsonObject::new();
    props.insert("mode".into(), mode.into());
    Feature {
        bbox: None,
        geometry: Some(Geometry::new(GeoValue::LineString(coords))),
        id: None,
        properties: Some(props),
        foreign_members: None,
    }
}

/// Writes `trace.jsonl` and `map.geojson` for a synthetic run so it can be
/// replayed from files.
pub fn export_scenario(scenario: &Scenario, seed: u64, dir: &Path) -> Result<Vec<TraceRecord>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let trace = scenario.synthesize(seed)?;
    let records = trace.to_records(scenario.map.projection());
    let trace_path = dir.join("trace.jsonl");
    trace_io::write_trace(&records, &trace_path)?;
    write_json(&dir.join("map.geojson"), &scenario.map_geojson)?;
    Ok(records)
}

/// Reads a JSON filter config; missing fields keep their defaults.
pub fn read_filter_config(path: &Path) -> Result<FilterConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config: FilterConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}
