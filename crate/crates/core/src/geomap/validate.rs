use std::collections::BTreeMap;
use std::path::Path;

use geojson::JsonValue;
use serde::Serialize;

use super::geojson_io::{parse_collection, project_polygons, read_feature, FeatureKind};
use super::{GeoMapError, GeoPoint, LocalProjection};
use crate::geometry::{LocalPoint, Polygon};

/// Largest tolerated angle between a sidewalk's authored bearing and the
/// principal axis of its polygon.
pub const BEARING_TOLERANCE_DEG: f64 = 25.0;

/// Principal axes are only meaningful for elongated polygons.
const MIN_AXIS_RATIO: f64 = 1.5;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub label_counts: BTreeMap<String, usize>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks a map file without stopping at the first problem. Only an
/// unreadable file is an `Err`; everything else lands in the report.
pub fn map_validate(path: impl AsRef<Path>) -> Result<ValidationReport, GeoMapError> {
    let text = std::fs::read_to_string(path)?;
    Ok(validate_geojson(&text))
}

struct Checked {
    index: usize,
    kind: FeatureKind,
    polygons: Vec<Polygon>,
}

pub fn validate_geojson(text: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    let collection = match parse_collection(text) {
        Ok(c) => c,
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    };

    let mut raw = Vec::new();
    for (index, feature) in collection.features.iter().enumerate() {
        let label = feature
            .properties
            .as_ref()
            .and_then(|p| p.get("label"))
            .and_then(JsonValue::as_str)
            .unwrap_or("<missing>");
        *report.label_counts.entry(label.to_string()).or_default() += 1;
        match read_feature(index, feature) {
            Ok(f) => raw.push((index, f)),
            Err(e) => report.errors.push(e.to_string()),
        }
    }

    let origin = collection
        .foreign_members
        .as_ref()
        .and_then(|m| m.get("origin"))
        .and_then(JsonValue::as_array)
        .and_then(|a| match a.as_slice() {
            [lon, lat] => Some(GeoPoint::new(lon.as_f64()?, lat.as_f64()?)),
            _ => None,
        });
    let origin = origin.unwrap_or_else(|| {
        let pts: Vec<GeoPoint> = raw
            .iter()
            .flat_map(|(_, f)| f.polygons.iter().flatten())
            .flat_map(|ring| ring[..ring.len() - 1].iter().copied())
            .collect();
        let n = pts.len().max(1) as f64;
        GeoPoint::new(
            pts.iter().map(|g| g.longitude).sum::<f64>() / n,
            pts.iter().map(|g| g.latitude).sum::<f64>() / n,
        )
    });
    let projection = LocalProjection::new(origin);

    let mut checked = Vec::new();
    let mut seen_ids = BTreeMap::new();
    for (index, f) in raw {
        if let FeatureKind::Sidewalk { id, .. } = &f.kind {
            if let Some(first) = seen_ids.insert(id.clone(), index) {
                report
                    .errors
                    .push(format!("duplicate sidewalk id '{id}' at features {first} and {index}"));
            }
        }
        match project_polygons(index, &f.polygons, &projection) {
            Ok(polygons) => checked.push(Checked {
                index,
                kind: f.kind,
                polygons,
            }),
            Err(e) => report.errors.push(e.to_string()),
        }
    }

    overlap_warnings(&checked, &mut report);
    bearing_warnings(&checked, &mut report);
    report
}

fn kind_name(kind: &FeatureKind) -> &'static str {
    match kind {
        FeatureKind::Impenetrable => "impenetrable",
        FeatureKind::Street => "street",
        FeatureKind::Sidewalk { .. } => "sidewalk",
    }
}

fn overlap_warnings(checked: &[Checked], report: &mut ValidationReport) {
    for (i, a) in checked.iter().enumerate() {
        for b in &checked[i + 1..] {
            // overlapping streets and overlapping sidewalks are harmless
            let relevant = matches!(
                (&a.kind, &b.kind),
                (FeatureKind::Impenetrable, _) | (_, FeatureKind::Impenetrable)
            ) || (matches!(a.kind, FeatureKind::Street) != matches!(b.kind, FeatureKind::Street));
            if !relevant {
                continue;
            }
            let overlaps = a
                .polygons
                .iter()
                .any(|p| b.polygons.iter().any(|q| interiors_overlap(p, q)));
            if overlaps {
                report.warnings.push(format!(
                    "feature {} ({}) overlaps feature {} ({})",
                    a.index,
                    kind_name(&a.kind),
                    b.index,
                    kind_name(&b.kind)
                ));
            }
        }
    }
}

fn strictly_inside(poly: &Polygon, p: LocalPoint) -> bool {
    poly.contains(p) && !std::iter::once(poly.exterior()).chain(poly.holes()).any(|r| r.on_boundary(p))
}

/// Positive-area overlap test: proper edge crossings, or vertices / edge
/// midpoints strictly inside the other polygon. Shared edges don't count.
fn interiors_overlap(a: &Polygon, b: &Polygon) -> bool {
    if !a.bbox().intersects(b.bbox()) {
        return false;
    }
    let proper = |p1: LocalPoint, p2: LocalPoint, q1: LocalPoint, q2: LocalPoint| {
        let o = |a: LocalPoint, b: LocalPoint, c: LocalPoint| (b - a).cross(c - a);
        let (d1, d2) = (o(q1, q2, p1), o(q1, q2, p2));
        let (d3, d4) = (o(p1, p2, q1), o(p1, p2, q2));
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    };
    let edges_a: Vec<_> = a.exterior().edges().collect();
    let edges_b: Vec<_> = b.exterior().edges().collect();
    if edges_a
        .iter()
        .any(|&(p1, p2)| edges_b.iter().any(|&(q1, q2)| proper(p1, p2, q1, q2)))
    {
        return true;
    }
    let probes = |edges: &[(LocalPoint, LocalPoint)], other: &Polygon| {
        edges
            .iter()
            .any(|&(p, q)| strictly_inside(other, p) || strictly_inside(other, (p + q) * 0.5))
    };
    probes(&edges_a, b) || probes(&edges_b, a)
}

fn bearing_warnings(checked: &[Checked], report: &mut ValidationReport) {
    for c in checked {
        let FeatureKind::Sidewalk { id, bearing_deg } = &c.kind else {
            continue;
        };
        let (axis, ratio) = c.polygons[0].principal_axis();
        if ratio < MIN_AXIS_RATIO {
            continue;
        }
        let bearing = LocalPoint::from_angle(bearing_deg.to_radians());
        // axes are undirected
        let angle = bearing.dot(axis).abs().min(1.0).acos().to_degrees();
        if angle > BEARING_TOLERANCE_DEG {
            report.warnings.push(format!(
                "sidewalk '{id}' (feature {}) bearing {bearing_deg:.1}° is {angle:.1}° off its polygon axis",
                c.index
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_feature(label: &str, x0: f64, y0: f64, x1: f64, y1: f64, extra: &str) -> String {
        format!(
            r#"{{"type":"Feature","properties":{{"label":"{label}"{extra}}},"geometry":{{"type":"Polygon","coordinates":[[[{x0},{y0}],[{x1},{y0}],[{x1},{y1}],[{x0},{y1}],[{x0},{y0}]]]}}}}"#
        )
    }

    fn doc(features: &[String]) -> String {
        format!(
            r#"{{"type":"FeatureCollection","origin":[0.0,0.0],"features":[{}]}}"#,
            features.join(",")
        )
    }

    #[test]
    fn collects_all_feature_errors() {
        let open = r#"{"type":"Feature","properties":{"label":"street"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[0.001,0],[0.001,0.001]]]}}"#;
        let text = doc(&[
            open.to_string(),
            rect_feature("building", 0.0, 0.0, 0.001, 0.001, ""),
            rect_feature("impenetrable", 0.0, 0.0, 0.001, 0.001, ""),
        ]);
        let report = validate_geojson(&text);
        assert_eq!(report.errors.len(), 2, "{:?}", report.errors);
        assert!(report.errors[0].contains("feature 0"));
        assert!(report.errors[1].contains("'building'"));
        assert_eq!(report.label_counts["impenetrable"], 1);
    }

    #[test]
    fn overlap_and_adjacency() {
        let overlapping = doc(&[
            rect_feature("impenetrable", 0.0, 0.0, 0.0002, 0.0002, ""),
            rect_feature("street", 0.0001, 0.0001, 0.0003, 0.0003, ""),
        ]);
        let report = validate_geojson(&overlapping);
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);

        let adjacent = doc(&[
            rect_feature("impenetrable", 0.0, 0.0, 0.0002, 0.0002, ""),
            rect_feature("street", 0.0002, 0.0, 0.0004, 0.0002, ""),
        ]);
        assert!(validate_geojson(&adjacent).warnings.is_empty());
    }

    #[test]
    fn sidewalk_bearing_sanity() {
        // long east-west strip
        let ok = doc(&[rect_feature("sidewalk", 0.0, 0.0, 0.001, 0.00003, r#","id":"a","bearing_deg":180"#)]);
        assert!(validate_geojson(&ok).warnings.is_empty());
        let off = doc(&[rect_feature("sidewalk", 0.0, 0.0, 0.001, 0.00003, r#","id":"a","bearing_deg":90"#)]);
        let report = validate_geojson(&off);
        assert_eq!(report.warnings.len(), 1, "{:?}", report.warnings);
        assert!(report.warnings[0].contains("'a'"));
    }

    #[test]
    fn principal_axis_matches_sampled_covariance() {
        // oracle: covariance eigenvector of grid samples inside an L-shaped polygon
        let pts = [(0.0, 0.0), (30.0, 0.0), (30.0, 4.0), (6.0, 4.0), (6.0, 10.0), (0.0, 10.0)];
        let ring = crate::geometry::Ring::from_open(pts.iter().map(|&(x, y)| LocalPoint::new(x, y)).collect()).unwrap();
        let poly = Polygon::new(ring, vec![]);
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let h = 0.02;
        let mut y = h / 2.0;
        while y < 10.0 {
            let mut x = h / 2.0;
            while x < 30.0 {
                if poly.contains(LocalPoint::new(x, y)) {
                    n += 1.0;
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
                x += h;
            }
            y += h;
        }
        let (mx, my) = (sx / n, sy / n);
        let (cxx, cyy, cxy) = (sxx / n - mx * mx, syy / n - my * my, sxy / n - mx * my);
        let oracle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        let (axis, _) = poly.principal_axis();
        let got = axis.y.atan2(axis.x);
        assert!((got - oracle).abs() < 1e-3, "{got} vs {oracle}");
        assert!((poly.area() - 156.0).abs() < 1e-9);
    }
}
