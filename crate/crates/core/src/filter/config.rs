use serde::{Deserialize, Serialize};

use super::FilterError;

/// Filter tuning. Only `n_particles` and the jaywalk weight have published
/// reference values (500 and 0.4); the noise levels, GNSS scale/threshold and
/// initial spread are engineering defaults meant to be swept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Position noise per footstep, meters.
    pub pos_noise_sigma: f64,
    /// Drift-angle noise per footstep, radians.
    pub theta_noise_sigma: f64,
    /// Weight given to particles on street surfaces, in [0, 1].
    pub jaywalk_weight: f64,
    /// GNSS σ as a multiple of the fix's uncertainty radius.
    pub gnss_sigma_scale: f64,
    /// Fixes whose uncertainty radius reaches this value (meters) are ignored.
    pub gnss_radius_threshold: f64,
    pub init_pos_sigma: f64,
    pub init_theta_sigma: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            pos_noise_sigma: 0.15,
            theta_noise_sigma: 0.5_f64.to_radians(),
            jaywalk_weight: 0.4,
            gnss_sigma_scale: 1.0,
            gnss_radius_threshold: 30.0,
            init_pos_sigma: 1.0,
            init_theta_sigma: 5.0_f64.to_radians(),
            seed: 0,
        }
    }
}

impl FilterConfig {
    /// Field names accepted by [`set_param`](Self::set_param).
    pub const PARAMETERS: [&'static str; 9] = [
        "n_particles",
        "pos_noise_sigma",
        "theta_noise_sigma",
        "jaywalk_weight",
        "gnss_sigma_scale",
        "gnss_radius_threshold",
        "init_pos_sigma",
        "init_theta_sigma",
        "seed",
    ];

    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |msg: String| Err(FilterError::InvalidConfig(msg));
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1".into());
        }
        for (name, value) in [
            ("pos_noise_sigma", self.pos_noise_sigma),
            ("theta_noise_sigma", self.theta_noise_sigma),
            ("gnss_sigma_scale", self.gnss_sigma_scale),
            ("init_pos_sigma", self.init_pos_sigma),
            ("init_theta_sigma", self.init_theta_sigma),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return bad(format!("{name} must be a finite nonnegative number, got {value}"));
            }
        }
        if !(0.0..=1.0).contains(&self.jaywalk_weight) {
            return bad(format!("jaywalk_weight must be in [0, 1], got {}", self.jaywalk_weight));
        }
        if self.gnss_radius_threshold.is_nan() {
            return bad("gnss_radius_threshold is NaN".into());
        }
        Ok(())
    }

    /// Sets one field by name; the result is validated.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), FilterError> {
        let invalid = || FilterError::InvalidParameterValue {
            name: name.to_string(),
            value,
        };
        let as_count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(invalid())
            }
        };
        let mut next = self.clone();
        match name {
            "n_particles" => next.n_particles = as_count()? as usize,
            "pos_noise_sigma" => next.pos_noise_sigma = value,
            "theta_noise_sigma" => next.theta_noise_sigma = value,
            "jaywalk_weight" => next.jaywalk_weight = value,
            "gnss_sigma_scale" => next.gnss_sigma_scale = value,
            "gnss_radius_threshold" => next.gnss_radius_threshold = value,
            "init_pos_sigma" => next.init_pos_sigma = value,
            "init_theta_sigma" => next.init_theta_sigma = value,
            "seed" => next.seed = as_count()?,
            _ => return Err(FilterError::UnknownParameter(name.to_string())),
        }
        next.validate().map_err(|_| invalid())?;
        *self = next;
        Ok(())
    }
}
