//! GeoJSON (RFC 7946) reading and writing of geosegment maps.
//!
//! Each feature carries a `label` property: `impenetrable`, `street` or
//! `sidewalk`. Sidewalks also carry `id` and `bearing_deg` (counterclockwise
//! from east). An optional top-level `origin: [lon, lat]` anchors the local
//! frame; otherwise the vertex centroid is used.

use std::path::Path;
use std::str::FromStr;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject, JsonValue, Value};

use super::{GeoMapError, GeoPoint, GeoSegmentMap, LocalProjection, SidewalkSegment};
use crate::geometry::{Polygon, Ring, RingDefect};

pub(crate) type GeoRing = Vec<GeoPoint>;

/// A polygon in geodetic coordinates: exterior followed by holes, each closed.
pub(crate) type GeoPolygon = Vec<GeoRing>;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum FeatureKind {
    Impenetrable,
    Street,
    Sidewalk { id: String, bearing_deg: f64 },
}

#[derive(Clone, Debug)]
pub(crate) struct RawFeature {
    pub kind: FeatureKind,
    pub polygons: Vec<GeoPolygon>,
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GeoSegmentMap, GeoMapError> {
    let text = std::fs::read_to_string(path)?;
    parse_map(&text)
}

pub fn parse_map(text: &str) -> Result<GeoSegmentMap, GeoMapError> {
    let collection = parse_collection(text)?;
    map_from_collection(&collection)
}

pub(crate) fn parse_collection(text: &str) -> Result<FeatureCollection, GeoMapError> {
    FeatureCollection::from_str(text).map_err(|e| GeoMapError::Parse(e.to_string()))
}

pub(crate) fn map_from_collection(collection: &FeatureCollection) -> Result<GeoSegmentMap, GeoMapError> {
    let raw = collection
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| read_feature(i, f))
        .collect::<Result<Vec<_>, _>>()?;
    let projection = LocalProjection::new(origin_of(collection, &raw)?);

    let mut obstacles = Vec::new();
    let mut streets = Vec::new();
    let mut sidewalks = Vec::new();
    for (index, feature) in raw.iter().enumerate() {
        let polygons = project_polygons(index, &feature.polygons, &projection)?;
        match &feature.kind {
            FeatureKind::Impenetrable => obstacles.extend(polygons),
            FeatureKind::Street => streets.extend(polygons),
            FeatureKind::Sidewalk { id, bearing_deg } => {
                let polygon = polygons.into_iter().next().expect("sidewalk has one polygon");
                if sidewalks.iter().any(|s: &SidewalkSegment| &s.id == id) {
                    return Err(GeoMapError::DuplicateSidewalkId {
                        index,
                        id: id.clone(),
                    });
                }
                sidewalks.push(SidewalkSegment::new(id.clone(), polygon, *bearing_deg));
            }
        }
    }
    GeoSegmentMap::new(projection, obstacles, streets, sidewalks)
}

pub(crate) fn read_feature(index: usize, feature: &Feature) -> Result<RawFeature, GeoMapError> {
    let props = feature.properties.as_ref();
    let label = props
        .and_then(|p| p.get("label"))
        .and_then(JsonValue::as_str)
        .ok_or(GeoMapError::MissingLabel { index })?;
    let kind = match label {
        "impenetrable" => FeatureKind::Impenetrable,
        "street" => FeatureKind::Street,
        "sidewalk" => {
            let id = props
                .and_then(|p| p.get("id"))
                .and_then(|v| match v {
                    JsonValue::String(s) => Some(s.clone()),
                    JsonValue::Number(n) => Some(n.to_string()),
                    _ => None,
                })
                .ok_or(GeoMapError::MissingSidewalkId { index })?;
            let bearing_deg = props
                .and_then(|p| p.get("bearing_deg"))
                .and_then(JsonValue::as_f64)
                .filter(|b| b.is_finite())
                .ok_or(GeoMapError::MissingBearing { index })?;
            FeatureKind::Sidewalk { id, bearing_deg }
        }
        other => {
            return Err(GeoMapError::UnknownLabel {
                index,
                label: other.to_string(),
            })
        }
    };

    let geometry = feature.geometry.as_ref().ok_or_else(|| GeoMapError::UnsupportedGeometry {
        index,
        kind: "null".into(),
    })?;
    let polygons = match &geometry.value {
        Value::Polygon(rings) => vec![geo_polygon(index, rings)?],
        Value::MultiPolygon(polys) if !matches!(kind, FeatureKind::Sidewalk { .. }) => polys
            .iter()
            .map(|rings| geo_polygon(index, rings))
            .collect::<Result<_, _>>()?,
        other => {
            return Err(GeoMapError::UnsupportedGeometry {
                index,
                kind: other.type_name().to_string(),
            })
        }
    };
    if matches!(kind, FeatureKind::Sidewalk { .. }) && polygons[0].len() > 1 {
        return Err(GeoMapError::SidewalkWithHoles { index });
    }
    Ok(RawFeature { kind, polygons })
}

fn geo_polygon(index: usize, rings: &[Vec<Vec<f64>>]) -> Result<GeoPolygon, GeoMapError> {
    if rings.is_empty() {
        return Err(GeoMapError::DegenerateRing { index });
    }
    rings
        .iter()
        .map(|ring| {
            let ring: GeoRing = ring
                .iter()
                .map(|pos| match pos.as_slice() {
                    [lon, lat, ..] => {
                        let g = GeoPoint::new(*lon, *lat);
                        if g.is_valid() {
                            Ok(g)
                        } else {
                            Err(GeoMapError::BadCoordinate { index })
                        }
                    }
                    _ => Err(GeoMapError::BadCoordinate { index }),
                })
                .collect::<Result<_, _>>()?;
            if ring.len() < 2 || ring.first() != ring.last() {
                return Err(GeoMapError::OpenRing { index });
            }
            Ok(ring)
        })
        .collect()
}

fn origin_of(collection: &FeatureCollection, raw: &[RawFeature]) -> Result<GeoPoint, GeoMapError> {
    if let Some(origin) = collection.foreign_members.as_ref().and_then(|m| m.get("origin")) {
        let coords: Vec<f64> = origin
            .as_array()
            .map(|a| a.iter().filter_map(JsonValue::as_f64).collect())
            .unwrap_or_default();
        return match coords.as_slice() {
            [lon, lat] if GeoPoint::new(*lon, *lat).is_valid() => Ok(GeoPoint::new(*lon, *lat)),
            _ => Err(GeoMapError::BadOrigin(origin.to_string())),
        };
    }
    // vertex centroid, closing vertices excluded
    let (mut lon, mut lat, mut n) = (0.0, 0.0, 0usize);
    for ring in raw.iter().flat_map(|f| f.polygons.iter().flatten()) {
        for g in &ring[..ring.len() - 1] {
            lon += g.longitude;
            lat += g.latitude;
            n += 1;
        }
    }
    if n == 0 {
        return Ok(GeoPoint::new(0.0, 0.0));
    }
    Ok(GeoPoint::new(lon / n as f64, lat / n as f64))
}

pub(crate) fn project_polygons(
    index: usize,
    polygons: &[GeoPolygon],
    projection: &LocalProjection,
) -> Result<Vec<Polygon>, GeoMapError> {
    polygons
        .iter()
        .map(|rings| {
            let mut rings = rings.iter().map(|ring| {
                Ring::from_closed(ring.iter().map(|g| projection.to_local(*g)).collect())
                    .map_err(|d| ring_error(index, d))
            });
            let exterior = rings.next().expect("non-empty")?;
            let holes = rings.collect::<Result<Vec<_>, _>>()?;
            Ok(Polygon::new(exterior, holes))
        })
        .collect()
}

fn ring_error(index: usize, defect: RingDefect) -> GeoMapError {
    match defect {
        RingDefect::Open => GeoMapError::OpenRing { index },
        RingDefect::Degenerate => GeoMapError::DegenerateRing { index },
        RingDefect::SelfIntersecting => GeoMapError::SelfIntersecting { index },
    }
}

fn polygon_value(polygon: &Polygon, projection: &LocalProjection) -> Vec<Vec<Vec<f64>>> {
    std::iter::once(polygon.exterior())
        .chain(polygon.holes())
        .map(|ring| {
            ring.closed_vertices()
                .into_iter()
                .map(|p| {
                    let g = projection.to_geo(p);
                    vec![g.longitude, g.latitude]
                })
                .collect()
        })
        .collect()
}

fn feature(value: Value, props: JsonObject) -> Feature {
    Feature {
        bbox: None,
        geometry: Some(Geometry::new(value)),
        id: None,
        properties: Some(props),
        foreign_members: None,
    }
}

fn props(pairs: &[(&str, JsonValue)]) -> JsonObject {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Exports `map` as a FeatureCollection, origin included.
pub fn to_geojson(map: &GeoSegmentMap) -> FeatureCollection {
    let proj = map.projection();
    let mut features = Vec::with_capacity(map.polygon_count());
    for o in map.obstacles() {
        features.push(feature(
            Value::Polygon(polygon_value(&o.polygon, proj)),
            props(&[("label", "impenetrable".into())]),
        ));
    }
    for s in map.streets() {
        features.push(feature(
            Value::Polygon(polygon_value(&s.polygon, proj)),
            props(&[("label", "street".into())]),
        ));
    }
    for s in map.sidewalks() {
        features.push(feature(
            Value::Polygon(polygon_value(&s.polygon, proj)),
            props(&[
                ("label", "sidewalk".into()),
                ("id", s.id.clone().into()),
                ("bearing_deg", s.bearing_deg().into()),
            ]),
        ));
    }
    let origin = proj.origin();
    let mut foreign = JsonObject::new();
    foreign.insert("origin".into(), serde_json::json!([origin.longitude, origin.latitude]));
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(foreign),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::SurfaceLabel;
    use crate::geometry::LocalPoint;

    fn square_feature(label: &str, lon0: f64, lat0: f64, size: f64, extra: &str) -> String {
        let (a, b) = (lon0 + size, lat0 + size);
        format!(
            r#"{{"type":"Feature","properties":{{"label":"{label}"{extra}}},"geometry":{{"type":"Polygon","coordinates":[[[{lon0},{lat0}],[{a},{lat0}],[{a},{b}],[{lon0},{b}],[{lon0},{lat0}]]]}}}}"#
        )
    }

    fn collection(features: &[String]) -> String {
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(","))
    }

    #[test]
    fn minimal_obstacle_map() {
        let text = collection(&[square_feature("impenetrable", -122.4, 37.79, 0.0001, "")]);
        let map = parse_map(&text).unwrap();
        assert_eq!(map.obstacles().len(), 1);
        assert_eq!(map.streets().len(), 0);
        assert_eq!(map.sidewalks().len(), 0);
        // origin defaults to the centroid, which is inside the square
        assert_eq!(map.classify(LocalPoint::ORIGIN), SurfaceLabel::Impenetrable);
    }

    #[test]
    fn unknown_label_reports_feature_index() {
        let text = collection(&[square_feature("building", 0.0, 0.0, 0.001, "")]);
        let err = parse_map(&text).unwrap_err();
        assert_eq!(err.to_string(), "unknown label 'building' at feature 0");
    }

    #[test]
    fn overlap_prefers_impenetrable() {
        let text = collection(&[
            square_feature("street", 0.0, 0.0, 0.0002, ""),
            square_feature("impenetrable", 0.0001, 0.0001, 0.0002, ""),
        ]);
        let map = parse_map(&text).unwrap();
        let q = map.projection().to_local(GeoPoint::new(0.00015, 0.00015));
        // oracle: both rings contain q
        assert!(map.obstacles()[0].polygon.contains(q));
        assert!(map.streets()[0].polygon.contains(q));
        assert_eq!(map.classify(q), SurfaceLabel::Impenetrable);
    }

    #[test]
    fn open_ring_and_missing_bearing() {
        let open = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"label":"street"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[0.001,0],[0.001,0.001],[0,0.001]]]}}]}"#;
        assert_eq!(parse_map(open).unwrap_err().to_string(), "open ring at feature 0");

        let text = collection(&[
            square_feature("street", 0.0, 0.0, 0.001, ""),
            square_feature("sidewalk", 0.01, 0.0, 0.001, r#","id":"a""#),
        ]);
        assert_eq!(parse_map(&text).unwrap_err().to_string(), "missing sidewalk bearing at feature 1");
    }

    #[test]
    fn explicit_origin_and_sidewalk_properties() {
        let text = format!(
            r#"{{"type":"FeatureCollection","origin":[0.0,0.0],"features":[{}]}}"#,
            square_feature("sidewalk", 0.0, 0.0, 0.001, r#","id":"S1","bearing_deg":90"#)
        );
        let map = parse_map(&text).unwrap();
        assert_eq!(map.projection().origin(), GeoPoint::new(0.0, 0.0));
        let s = &map.sidewalks()[0];
        assert_eq!(s.id, "S1");
        assert!(s.street_bearing.x.abs() < 1e-12 && (s.street_bearing.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn export_reload_preserves_geometry() {
        let text = format!(
            r#"{{"type":"FeatureCollection","origin":[-122.4,37.79],"features":[{},{},{}]}}"#,
            square_feature("impenetrable", -122.4, 37.79, 0.0002, ""),
            square_feature("street", -122.3995, 37.79, 0.0002, ""),
            square_feature("sidewalk", -122.399, 37.79, 0.0001, r#","id":"x","bearing_deg":30"#),
        );
        let map = parse_map(&text).unwrap();
        let again = map_from_collection(&to_geojson(&map)).unwrap();
        assert_eq!(again.obstacles().len(), 1);
        assert_eq!(again.streets().len(), 1);
        let (a, b) = (&map.sidewalks()[0], &again.sidewalks()[0]);
        assert_eq!(a.id, b.id);
        assert!((a.bearing_deg() - b.bearing_deg()).abs() < 1e-9);
        for (p, q) in a.polygon.exterior().vertices().iter().zip(b.polygon.exterior().vertices()) {
            assert!(p.distance(*q) < 1e-6);
        }
    }
}
