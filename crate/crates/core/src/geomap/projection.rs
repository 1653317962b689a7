use serde::{Deserialize, Serialize};

use crate::geometry::LocalPoint;

// WGS84
const SEMI_MAJOR_AXIS: f64 = 6_378_137.0;
const FLATTENING: f64 = 1.0 / 298.257_223_563;

/// WGS84 longitude/latitude in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub longitude: f64,
    pub latitude: f64,
}

impl GeoPoint {
    pub const fn new(longitude: f64, latitude: f64) -> Self {
        Self {
            longitude,
            latitude,
        }
    }

    pub fn is_valid(&self) -> bool {
        (-180.0..=180.0).contains(&self.longitude) && (-90.0..=90.0).contains(&self.latitude)
    }
}

/// Equirectangular tangent-plane projection about an origin, using the
/// ellipsoid's meridional and prime-vertical radii at the origin latitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalProjection {
    origin: GeoPoint,
    meters_per_deg_lon: f64,
    meters_per_deg_lat: f64,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Self {
        let e2 = FLATTENING * (2.0 - FLATTENING);
        let phi = origin.latitude.to_radians();
        let w = 1.0 - e2 * phi.sin().powi(2);
        let meridional = SEMI_MAJOR_AXIS * (1.0 - e2) / w.powf(1.5);
        let prime_vertical = SEMI_MAJOR_AXIS / w.sqrt();
        let rad = std::f64::consts::PI / 180.0;
        Self {
            origin,
            meters_per_deg_lon: prime_vertical * phi.cos() * rad,
            meters_per_deg_lat: meridional * rad,
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn meters_per_degree(&self) -> (f64, f64) {
        (self.meters_per_deg_lon, self.meters_per_deg_lat)
    }

    pub fn to_local(&self, p: GeoPoint) -> LocalPoint {
        LocalPoint::new(
            (p.longitude - self.origin.longitude) * self.meters_per_deg_lon,
            (p.latitude - self.origin.latitude) * self.meters_per_deg_lat,
        )
    }

    pub fn to_geo(&self, p: LocalPoint) -> GeoPoint {
        GeoPoint::new(
            self.origin.longitude + p.x / self.meters_per_deg_lon,
            self.origin.latitude + p.y / self.meters_per_deg_lat,
        )
    }
}

impl Default for LocalProjection {
    /// Anchored at (0°, 0°).
    fn default() -> Self {
        Self::new(GeoPoint::new(0.0, 0.0))
    }
}
