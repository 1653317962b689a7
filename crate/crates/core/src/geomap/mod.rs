//! Labeled geosegment map: building footprints, street surfaces and
//! sidewalk segments, queried in a local planar frame.
//!
//! Anything not covered by an obstacle or street polygon is freely
//! traversable. Where an obstacle and a street overlap, the obstacle wins.

pub(crate) mod geojson_io;
mod index;
mod projection;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geojson_io::{load_map, parse_map, to_geojson};
pub use projection::{GeoPoint, LocalProjection};
pub use validate::{map_validate, validate_geojson, ValidationReport};

use crate::geometry::{LocalPoint, Polygon};
use index::GridIndex;

#[derive(Debug, Error)]
pub enum GeoMapError {
    #[error("cannot read map file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid GeoJSON: {0}")]
    Parse(String),
    #[error("missing label at feature {index}")]
    MissingLabel { index: usize },
    #[error("unknown label '{label}' at feature {index}")]
    UnknownLabel { index: usize, label: String },
    #[error("open ring at feature {index}")]
    OpenRing { index: usize },
    #[error("ring with fewer than 3 distinct vertices at feature {index}")]
    DegenerateRing { index: usize },
    #[error("self-intersecting ring at feature {index}")]
    SelfIntersecting { index: usize },
    #[error("unsupported geometry '{kind}' at feature {index}")]
    UnsupportedGeometry { index: usize, kind: String },
    #[error("coordinate out of range at feature {index}")]
    BadCoordinate { index: usize },
    #[error("missing sidewalk id at feature {index}")]
    MissingSidewalkId { index: usize },
    #[error("duplicate sidewalk id '{id}' at feature {index}")]
    DuplicateSidewalkId { index: usize, id: String },
    #[error("missing sidewalk bearing at feature {index}")]
    MissingBearing { index: usize },
    #[error("sidewalk polygons must not have holes (feature {index})")]
    SidewalkWithHoles { index: usize },
    #[error("invalid origin: {0}")]
    BadOrigin(String),
    #[error("sidewalk '{0}' has a non-unit street bearing")]
    BadBearing(String),
    #[error("map has no sidewalk segments")]
    NoSidewalks,
}

/// Surface class of a location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceLabel {
    Impenetrable,
    Street,
    Traversable,
}

impl fmt::Display for SurfaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceLabel::Impenetrable => "impenetrable",
            SurfaceLabel::Street => "street",
            SurfaceLabel::Traversable => "traversable",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LabeledPolygon {
    pub polygon: Polygon,
    pub label: SurfaceLabel,
}

#[derive(Clone, Debug)]
pub struct SidewalkSegment {
    pub id: String,
    pub polygon: Polygon,
    /// Unit vector along the adjacent street.
    pub street_bearing: LocalPoint,
}

impl SidewalkSegment {
    /// `bearing_deg` is measured counterclockwise from east, so 90° is north.
    pub fn new(id: impl Into<String>, polygon: Polygon, bearing_deg: f64) -> Self {
        Self {
            id: id.into(),
            polygon,
            street_bearing: LocalPoint::from_angle(bearing_deg.to_radians()),
        }
    }

    pub fn bearing_deg(&self) -> f64 {
        self.street_bearing.y.atan2(self.street_bearing.x).to_degrees()
    }
}

/// Result of projecting a point onto the closest sidewalk.
#[derive(Clone, Debug, PartialEq)]
pub struct SidewalkHit<'a> {
    pub id: &'a str,
    pub index: usize,
    pub projected: LocalPoint,
    pub distance: f64,
}

/// Immutable after construction; safe to share across threads.
#[derive(Clone, Debug)]
pub struct GeoSegmentMap {
    projection: LocalProjection,
    obstacles: Vec<LabeledPolygon>,
    streets: Vec<LabeledPolygon>,
    sidewalks: Vec<SidewalkSegment>,
    obstacle_index: GridIndex,
    street_index: GridIndex,
}

impl GeoSegmentMap {
    pub fn new(
        projection: LocalProjection,
        obstacles: Vec<Polygon>,
        streets: Vec<Polygon>,
        sidewalks: Vec<SidewalkSegment>,
    ) -> Result<Self, GeoMapError> {
        let mut ids = std::collections::HashSet::new();
        for (i, s) in sidewalks.iter().enumerate() {
            if !ids.insert(s.id.as_str()) {
                return Err(GeoMapError::DuplicateSidewalkId {
                    index: i,
                    id: s.id.clone(),
                });
            }
            if !s.street_bearing.is_finite() || (s.street_bearing.norm() - 1.0).abs() > 1e-9 {
                return Err(GeoMapError::BadBearing(s.id.clone()));
            }
        }
        let label = |label| move |polygon| LabeledPolygon { polygon, label };
        let obstacles: Vec<_> = obstacles.into_iter().map(label(SurfaceLabel::Impenetrable)).collect();
        let streets: Vec<_> = streets.into_iter().map(label(SurfaceLabel::Street)).collect();
        let obstacle_index = GridIndex::build(obstacles.iter().map(|p| *p.polygon.bbox()));
        let street_index = GridIndex::build(streets.iter().map(|p| *p.polygon.bbox()));
        Ok(Self {
            projection,
            obstacles,
            streets,
            sidewalks,
            obstacle_index,
            street_index,
        })
    }

    pub fn projection(&self) -> &LocalProjection {
        &self.projection
    }

    pub fn obstacles(&self) -> &[LabeledPolygon] {
        &self.obstacles
    }

    pub fn streets(&self) -> &[LabeledPolygon] {
        &self.streets
    }

    pub fn sidewalks(&self) -> &[SidewalkSegment] {
        &self.sidewalks
    }

    pub fn polygon_count(&self) -> usize {
        self.obstacles.len() + self.streets.len() + self.sidewalks.len()
    }

    /// Surface label at `p`. Total: every point gets exactly one label.
    pub fn classify(&self, p: LocalPoint) -> SurfaceLabel {
        let hit = |index: &GridIndex, polys: &[LabeledPolygon]| {
            index
                .candidates(p)
                .iter()
                .any(|&i| polys[i as usize].polygon.contains(p))
        };
        if hit(&self.obstacle_index, &self.obstacles) {
            SurfaceLabel::Impenetrable
        } else if hit(&self.street_index, &self.streets) {
            SurfaceLabel::Street
        } else {
            SurfaceLabel::Traversable
        }
    }

    /// Same answer as [`classify`](Self::classify) without the grid index.
    pub fn classify_linear(&self, p: LocalPoint) -> SurfaceLabel {
        if self.obstacles.iter().any(|o| o.polygon.contains(p)) {
            SurfaceLabel::Impenetrable
        } else if self.streets.iter().any(|s| s.polygon.contains(p)) {
            SurfaceLabel::Street
        } else {
            SurfaceLabel::Traversable
        }
    }

    /// Closest sidewalk polygon to `p`; distance is zero inside a polygon.
    /// Ties go to the lexicographically smallest id.
    ///
    /// Candidates are visited in order of their bounding-box distance and the
    /// search stops once that lower bound exceeds the best exact distance.
    pub fn nearest_sidewalk(&self, p: LocalPoint) -> Result<SidewalkHit<'_>, GeoMapError> {
        if self.sidewalks.is_empty() {
            return Err(GeoMapError::NoSidewalks);
        }
        let mut order: Vec<(f64, usize)> = self
            .sidewalks
            .iter()
            .enumerate()
            .map(|(i, s)| (s.polygon.bbox().distance_to(p), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<SidewalkHit<'_>> = None;
        for (lower_bound, i) in order {
            if let Some(b) = &best {
                if lower_bound > b.distance {
                    break;
                }
            }
            let candidate = self.sidewalk_hit(i, p);
            if best.as_ref().is_none_or(|b| better_hit(&candidate, b)) {
                best = Some(candidate);
            }
        }
        Ok(best.expect("at least one sidewalk"))
    }

    /// Exhaustive variant of [`nearest_sidewalk`](Self::nearest_sidewalk).
    pub fn nearest_sidewalk_linear(&self, p: LocalPoint) -> Result<SidewalkHit<'_>, GeoMapError> {
        (0..self.sidewalks.len())
            .map(|i| self.sidewalk_hit(i, p))
            .reduce(|best, c| if better_hit(&c, &best) { c } else { best })
            .ok_or(GeoMapError::NoSidewalks)
    }

    fn sidewalk_hit(&self, index: usize, p: LocalPoint) -> SidewalkHit<'_> {
        let s = &self.sidewalks[index];
        let (projected, distance) = s.polygon.closest_point(p);
        SidewalkHit {
            id: &s.id,
            index,
            projected,
            distance,
        }
    }

    /// Along-street unit vector of the sidewalk nearest to `p`.
    pub fn street_direction_at(&self, p: LocalPoint) -> Result<LocalPoint, GeoMapError> {
        let hit = self.nearest_sidewalk(p)?;
        Ok(self.sidewalks[hit.index].street_bearing)
    }
}

fn better_hit(candidate: &SidewalkHit<'_>, best: &SidewalkHit<'_>) -> bool {
    candidate.distance < best.distance || (candidate.distance == best.distance && candidate.id < best.id)
}
