//! Map-conditioned particle filter with GNSS reweighting.
//!
//! Every particle carries a position, an orientation-drift angle and a
//! weight. One footstep runs
//! propagate → map weights → GNSS (optional) → normalize → estimate → resample.
//! The map weight *replaces* the particle weight; the GNSS likelihood then
//! multiplies it. Resampling happens on every step and resets weights to 1/N.

mod config;
mod resample;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::FilterConfig;

use crate::geomap::{GeoSegmentMap, SurfaceLabel};
use crate::geometry::LocalPoint;

/// Scatter attempts (with doubling spread) before giving up on finding a
/// particle with nonzero map weight.
const RECOVERY_ATTEMPTS: usize = 6;

/// Tolerance used to decide whether a weight vector is normalized.
const NORMALIZED_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("GNSS standard deviation is zero (gnss_sigma_scale = {scale}, radius = {radius})")]
    DegenerateGnssSigma { scale: f64, radius: f64 },
    #[error("all particle weights are zero")]
    ZeroWeights,
    #[error("weights must be normalized before resampling (sum = {0})")]
    NotNormalized(f64),
    #[error("unknown filter parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid value {value} for parameter '{name}'")]
    InvalidParameterValue { name: String, value: f64 },
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: LocalPoint,
    /// Orientation drift of the velocity source, radians in (−π, π].
    pub theta: f64,
    pub weight: f64,
}

/// World-frame walking velocity reported at a footstep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub v: LocalPoint,
    pub timestamp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub position: LocalPoint,
    /// Reported horizontal accuracy, meters.
    pub uncertainty_radius: f64,
    pub timestamp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub position: LocalPoint,
    /// Circular weighted mean of the particle drift angles.
    pub mean_theta: f64,
    pub effective_sample_size: f64,
    pub timestamp: f64,
}

/// Whether [`ParticleSet::normalize`] had to rebuild a degenerate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Normalized,
    Recovered,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub estimate: StateEstimate,
    pub gnss_applied: bool,
    pub recovered: bool,
}

/// The filter's sample set plus its private random stream.
#[derive(Clone, Debug)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
    /// Known rotation from the velocity frame to the world frame at start;
    /// particle θ is drift on top of it.
    heading_offset: f64,
    last_estimate: LocalPoint,
}

impl ParticleSet {
    /// Scatters `n_particles` around `start` with uniform weights.
    pub fn init(start: LocalPoint, heading_hint: f64, config: &FilterConfig) -> Result<Self, FilterError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.n_particles;
        let particles = (0..n)
            .map(|_| {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                let dt: f64 = rng.sample(StandardNormal);
                Particle {
                    position: start + LocalPoint::new(dx, dy) * config.init_pos_sigma,
                    theta: wrap_angle(dt * config.init_theta_sigma),
                    weight: 1.0 / n as f64,
                }
            })
            .collect();
        Ok(Self {
            particles,
            rng,
            heading_offset: heading_hint,
            last_estimate: start,
        })
    }

    /// Builds a set from explicit particles (weights taken as given).
    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Self {
        let last_estimate = particles.first().map_or(LocalPoint::ORIGIN, |p| p.position);
        Self {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
            heading_offset: 0.0,
            last_estimate,
        }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn last_estimate(&self) -> LocalPoint {
        self.last_estimate
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Moves every particle by its drift-rotated velocity and adds noise.
    /// Weights are left alone.
    pub fn propagate(&mut self, v: &VelocitySample, dt: f64, config: &FilterConfig) -> Result<(), FilterError> {
        if !(dt > 0.0) {
            return Err(FilterError::NonPositiveDt(dt));
        }
        let step = v.v * dt;
        for p in &mut self.particles {
            let (s, c) = (p.theta + self.heading_offset).sin_cos();
            let nx: f64 = self.rng.sample(StandardNormal);
            let ny: f64 = self.rng.sample(StandardNormal);
            let nt: f64 = self.rng.sample(StandardNormal);
            p.position.x += c * step.x - s * step.y + nx * config.pos_noise_sigma;
            p.position.y += s * step.x + c * step.y + ny * config.pos_noise_sigma;
            p.theta = wrap_angle(p.theta + nt * config.theta_noise_sigma);
        }
        Ok(())
    }

    /// Sets each weight from the surface under the particle:
    /// building → 0, street → `jaywalk_weight`, anything else → 1.
    pub fn apply_map_weights(&mut self, map: &GeoSegmentMap, config: &FilterConfig) {
        for p in &mut self.particles {
            p.weight = surface_weight(map.classify(p.position), config.jaywalk_weight);
        }
    }

    /// Multiplies weights by an isotropic Gaussian centered on the fix with
    /// σ = `gnss_sigma_scale` × radius. The density's normalizing constant is
    /// dropped. Fixes at or above `gnss_radius_threshold` are ignored and
    /// `Ok(false)` is returned.
    pub fn apply_gnss(&mut self, fix: &GnssFix, config: &FilterConfig) -> Result<bool, FilterError> {
        if fix.uncertainty_radius >= config.gnss_radius_threshold {
            return Ok(false);
        }
        let sigma = config.gnss_sigma_scale * fix.uncertainty_radius;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FilterError::DegenerateGnssSigma {
                scale: config.gnss_sigma_scale,
                radius: fix.uncertainty_radius,
            });
        }
        let inv = 1.0 / (2.0 * sigma * sigma);
        for p in &mut self.particles {
            p.weight *= (-(p.position - fix.position).norm_squared() * inv).exp();
        }
        Ok(true)
    }

    /// Scales weights to unit sum. An all-zero set is rebuilt around the last
    /// estimate (spread 2 × `pos_noise_sigma`) with uniform weights.
    pub fn normalize(&mut self, config: &FilterConfig) -> Normalization {
        let total = self.total_weight();
        if total > 0.0 {
            self.scale_weights(total);
            Normalization::Normalized
        } else {
            self.recover(None, config);
            Normalization::Recovered
        }
    }

    fn scale_weights(&mut self, total: f64) {
        for p in &mut self.particles {
            p.weight /= total;
        }
    }

    fn set_uniform(&mut self) {
        let w = 1.0 / self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = w;
        }
    }

    fn scatter(&mut self, sigma: f64) {
        let center = self.last_estimate;
        for p in &mut self.particles {
            let dx: f64 = self.rng.sample(StandardNormal);
            let dy: f64 = self.rng.sample(StandardNormal);
            p.position = center + LocalPoint::new(dx, dy) * sigma;
        }
    }

    /// Degenerate-set recovery. With a map, scattered particles are re-weighted
    /// by surface so none is left inside a building; the spread doubles until
    /// some particle lands on open ground.
    fn recover(&mut self, map: Option<&GeoSegmentMap>, config: &FilterConfig) {
        let mut sigma = 2.0 * config.pos_noise_sigma;
        let Some(map) = map else {
            self.scatter(sigma);
            self.set_uniform();
            return;
        };
        for _ in 0..RECOVERY_ATTEMPTS {
            self.scatter(sigma);
            self.apply_map_weights(map, config);
            let total = self.total_weight();
            if total > 0.0 {
                self.scale_weights(total);
                return;
            }
            if sigma == 0.0 {
                break;
            }
            sigma *= 2.0;
        }
        self.set_uniform();
    }

    /// Draws N particles by systematic resampling; weights become 1/N.
    pub fn resample(&mut self) -> Result<(), FilterError> {
        let total = self.total_weight();
        if (total - 1.0).abs() > NORMALIZED_TOL {
            return Err(FilterError::NotNormalized(total));
        }
        let u: f64 = self.rng.random();
        let picks = resample::systematic(&self.particles, u);
        let w = 1.0 / self.particles.len() as f64;
        self.particles = picks
            .into_iter()
            .map(|i| Particle {
                weight: w,
                ..self.particles[i]
            })
            .collect();
        Ok(())
    }

    /// Weighted mean position, circular mean drift and effective sample size.
    pub fn estimate(&self, timestamp: f64) -> Result<StateEstimate, FilterError> {
        let (mut sw, mut sw2) = (0.0, 0.0);
        let (mut sx, mut sy, mut ss, mut sc) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.particles {
            let w = p.weight;
            sw += w;
            sw2 += w * w;
            sx += w * p.position.x;
            sy += w * p.position.y;
            ss += w * p.theta.sin();
            sc += w * p.theta.cos();
        }
        if !(sw > 0.0) {
            return Err(FilterError::ZeroWeights);
        }
        Ok(StateEstimate {
            position: LocalPoint::new(sx / sw, sy / sw),
            mean_theta: ss.atan2(sc),
            effective_sample_size: sw * sw / sw2,
            timestamp,
        })
    }

    /// One footstep of the filter. The returned estimate is taken after
    /// normalization and before resampling.
    pub fn step(
        &mut self,
        v: &VelocitySample,
        dt: f64,
        fix: Option<&GnssFix>,
        map: &GeoSegmentMap,
        config: &FilterConfig,
    ) -> Result<StepOutcome, FilterError> {
        self.propagate(v, dt, config)?;
        self.apply_map_weights(map, config);
        let gnss_applied = match fix {
            Some(fix) => self.apply_gnss(fix, config)?,
            None => false,
        };
        let total = self.total_weight();
        let recovered = if total > 0.0 {
            self.scale_weights(total);
            false
        } else {
            self.recover(Some(map), config);
            true
        };
        let estimate = self.estimate(v.timestamp)?;
        self.last_estimate = estimate.position;
        self.resample()?;
        Ok(StepOutcome {
            estimate,
            gnss_applied,
            recovered,
        })
    }
}

fn surface_weight(label: SurfaceLabel, jaywalk_weight: f64) -> f64 {
    match label {
        SurfaceLabel::Impenetrable => 0.0,
        SurfaceLabel::Street => jaywalk_weight,
        SurfaceLabel::Traversable => 1.0,
    }
}

/// A particle set bound to a map and config, stepping on timestamps.
#[derive(Clone, Debug)]
pub struct Tracker {
    map: Arc<GeoSegmentMap>,
    config: FilterConfig,
    set: ParticleSet,
    last_time: f64,
}

impl Tracker {
    pub fn new(
        map: Arc<GeoSegmentMap>,
        start: LocalPoint,
        heading_hint: f64,
        start_time: f64,
        config: FilterConfig,
    ) -> Result<Self, FilterError> {
        let set = ParticleSet::init(start, heading_hint, &config)?;
        Ok(Self {
            map,
            config,
            set,
            last_time: start_time,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn map(&self) -> &GeoSegmentMap {
        &self.map
    }

    /// Estimate of the current (uniformly weighted) particle cloud.
    pub fn current_estimate(&self) -> StateEstimate {
        self.set
            .estimate(self.last_time)
            .expect("weights are uniform between steps")
    }

    /// Advances to `v.timestamp`, fusing `fix` when given.
    pub fn step(&mut self, v: &VelocitySample, fix: Option<&GnssFix>) -> Result<StepOutcome, FilterError> {
        let dt = v.timestamp - self.last_time;
        let outcome = self.set.step(v, dt, fix, &self.map, &self.config)?;
        self.last_time = v.timestamp;
        Ok(outcome)
    }
}
