//! Per-footstep error metrics and their summaries: sidewalk assignment,
//! Euclidean error and its along/across-street decomposition.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomap::{GeoMapError, GeoSegmentMap};
use crate::geometry::LocalPoint;

/// Directions this close to unit length are renormalized with a warning.
pub const UNIT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("street direction has length {0}, expected 1")]
    NonUnitDirection(f64),
    #[error("cannot summarize an empty evaluation")]
    Empty,
    #[error("{estimates} estimates for {truth} ground-truth footsteps")]
    LengthMismatch { estimates: usize, truth: usize },
    #[error(transparent)]
    Map(#[from] GeoMapError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn euclidean_error(estimate: LocalPoint, truth: LocalPoint) -> f64 {
    estimate.distance(truth)
}

/// Magnitudes of the error components along `street_dir` and across it.
pub fn along_across_error(
    estimate: LocalPoint,
    truth: LocalPoint,
    street_dir: LocalPoint,
) -> Result<(f64, f64), MetricsError> {
    let len = street_dir.norm();
    let dir = if (len - 1.0).abs() <= 1e-12 {
        street_dir
    } else if (len - 1.0).abs() <= UNIT_TOLERANCE {
        log::warn!("renormalizing street direction of length {len}");
        street_dir * (1.0 / len)
    } else {
        return Err(MetricsError::NonUnitDirection(len));
    };
    let e = estimate - truth;
    Ok((e.dot(dir).abs(), e.dot(dir.perp()).abs()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub assigned: String,
    pub truth: String,
    pub correct: bool,
}

/// Projects both points onto their nearest sidewalks and compares ids.
pub fn sidewalk_assignment(
    estimate: LocalPoint,
    truth: LocalPoint,
    map: &GeoSegmentMap,
) -> Result<Assignment, MetricsError> {
    let assigned = map.nearest_sidewalk(estimate)?.id;
    let truth = map.nearest_sidewalk(truth)?.id;
    Ok(Assignment {
        assigned: assigned.to_string(),
        truth: truth.to_string(),
        correct: assigned == truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootstepEval {
    pub timestamp: f64,
    pub truth: LocalPoint,
    pub estimate: LocalPoint,
    pub euclidean: f64,
    pub along: f64,
    pub across: f64,
    pub assigned_sidewalk: String,
    pub truth_sidewalk: String,
    pub correct: bool,
}

/// All three metrics for one footstep. The street direction is taken at the
/// true position.
pub fn evaluate_footstep(
    timestamp: f64,
    estimate: LocalPoint,
    truth: LocalPoint,
    map: &GeoSegmentMap,
) -> Result<FootstepEval, MetricsError> {
    let a = sidewalk_assignment(estimate, truth, map)?;
    let (along, across) = along_across_error(estimate, truth, map.street_direction_at(truth)?)?;
    Ok(FootstepEval {
        timestamp,
        truth,
        estimate,
        euclidean: euclidean_error(estimate, truth),
        along,
        across,
        assigned_sidewalk: a.assigned,
        truth_sidewalk: a.truth,
        correct: a.correct,
    })
}

pub fn evaluate(
    timestamps: &[f64],
    estimates: &[LocalPoint],
    truth: &[LocalPoint],
    map: &GeoSegmentMap,
) -> Result<Vec<FootstepEval>, MetricsError> {
    if estimates.len() != truth.len() || timestamps.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            estimates: estimates.len(),
            truth: truth.len(),
        });
    }
    timestamps
        .iter()
        .zip(estimates.iter().zip(truth))
        .map(|(&t, (&e, &g))| evaluate_footstep(t, e, g, map))
        .collect()
}

/// Quantile by linear interpolation between order statistics: position
/// `q (n − 1)` in the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub footsteps: usize,
    pub correct_sidewalk_proportion: f64,
    pub euclidean_mean: f64,
    pub euclidean_median: f64,
    pub euclidean_p90: f64,
    pub along_median: f64,
    pub along_p90: f64,
    pub across_median: f64,
    pub across_p90: f64,
    /// Sorted Euclidean errors.
    #[serde(skip)]
    pub cdf: Vec<f64>,
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn summarize(evals: &[FootstepEval]) -> Result<MetricSummary, MetricsError> {
    if evals.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = evals.len();
    let euclid = sorted(evals.iter().map(|e| e.euclidean));
    let along = sorted(evals.iter().map(|e| e.along));
    let across = sorted(evals.iter().map(|e| e.across));
    let correct = evals.iter().filter(|e| e.correct).count();
    Ok(MetricSummary {
        footsteps: n,
        correct_sidewalk_proportion: correct as f64 / n as f64,
        euclidean_mean: evals.iter().map(|e| e.euclidean).sum::<f64>() / n as f64,
        euclidean_median: quantile(&euclid, 0.5),
        euclidean_p90: quantile(&euclid, 0.9),
        along_median: quantile(&along, 0.5),
        along_p90: quantile(&along, 0.9),
        across_median: quantile(&across, 0.5),
        across_p90: quantile(&across, 0.9),
        cdf: euclid,
    })
}

impl MetricSummary {
    /// `(error, cumulative fraction)` pairs; the i-th of n sorted errors sits
    /// at `i / (n − 1)`, the same positions [`quantile`] interpolates over.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.cdf.len();
        let denom = (n.max(2) - 1) as f64;
        self.cdf
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, if n == 1 { 1.0 } else { i as f64 / denom }))
            .collect()
    }
}

/// Error at cumulative fraction `q`, read off CDF points by linear
/// interpolation.
pub fn cdf_inverse(points: &[(f64, f64)], q: f64) -> f64 {
    let i = points.partition_point(|&(_, f)| f < q);
    if i == 0 {
        return points[0].0;
    }
    if i == points.len() {
        return points[i - 1].0;
    }
    let ((e0, f0), (e1, f1)) = (points[i - 1], points[i]);
    e0 + (q - f0) / (f1 - f0) * (e1 - e0)
}

#[derive(Serialize)]
struct EvalRow<'a> {
    timestamp: f64,
    truth_x: f64,
    truth_y: f64,
    estimate_x: f64,
    estimate_y: f64,
    euclidean: f64,
    along: f64,
    across: f64,
    assigned_sidewalk: &'a str,
    truth_sidewalk: &'a str,
    correct: bool,
}

pub fn write_evals_csv(evals: &[FootstepEval], out: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for e in evals {
        w.serialize(EvalRow {
            timestamp: e.timestamp,
            truth_x: e.truth.x,
            truth_y: e.truth.y,
            estimate_x: e.estimate.x,
            estimate_y: e.estimate.y,
            euclidean: e.euclidean,
            along: e.along,
            across: e.across,
            assigned_sidewalk: &e.assigned_sidewalk,
            truth_sidewalk: &e.truth_sidewalk,
            correct: e.correct,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf_csv(summary: &MetricSummary, out: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["euclidean", "fraction"])?;
    for (e, f) in summary.cdf_points() {
        w.write_record([e.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::SQRT_2;

    use proptest::prelude::*;

    use super::*;
    use crate::geomap::{LocalProjection, SidewalkSegment};
    use crate::geometry::Polygon;

    fn p(x: f64, y: f64) -> LocalPoint {
        LocalPoint::new(x, y)
    }

    fn two_sided_street() -> GeoSegmentMap {
        GeoSegmentMap::new(
            LocalProjection::default(),
            vec![],
            vec![Polygon::rectangle(p(-100.0, -6.0), p(100.0, 6.0))],
            vec![
                SidewalkSegment::new("north", Polygon::rectangle(p(-100.0, 6.0), p(100.0, 10.0)), 180.0),
                SidewalkSegment::new("south", Polygon::rectangle(p(-100.0, -10.0), p(100.0, -6.0)), 0.0),
            ],
        )
        .unwrap()
    }

    fn eval(euclidean: f64, correct: bool) -> FootstepEval {
        FootstepEval {
            timestamp: 0.0,
            truth: LocalPoint::ORIGIN,
            estimate: p(euclidean, 0.0),
            euclidean,
            along: euclidean,
            across: 0.0,
            assigned_sidewalk: "a".into(),
            truth_sidewalk: "a".into(),
            correct,
        }
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_error(p(0.0, 0.0), p(0.0, 0.0)), 0.0);
        assert_eq!(euclidean_error(p(0.0, 0.0), p(3.0, 4.0)), 5.0);
        assert!((euclidean_error(p(1.5, -2.0), p(-0.5, 1.0)) - 13f64.sqrt()).abs() < 1e-12);
        assert!((13f64.sqrt() - 3.6056).abs() < 1e-4);
    }

    #[test]
    fn along_across_examples() {
        assert_eq!(along_across_error(p(3.0, 4.0), LocalPoint::ORIGIN, p(1.0, 0.0)).unwrap(), (3.0, 4.0));
        let (a, c) = along_across_error(p(5.0, 0.0), LocalPoint::ORIGIN, p(0.0, 1.0)).unwrap();
        assert_eq!((a, c), (0.0, 5.0));
        let d = p(SQRT_2 / 2.0, SQRT_2 / 2.0);
        let (a, c) = along_across_error(p(1.0, 1.0), LocalPoint::ORIGIN, d).unwrap();
        assert!((a - SQRT_2).abs() < 1e-12 && c.abs() < 1e-12);
    }

    #[test]
    fn near_unit_directions_are_renormalized() {
        let (a, c) = along_across_error(p(3.0, 4.0), LocalPoint::ORIGIN, p(1.0005, 0.0)).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && (c - 4.0).abs() < 1e-12);
        assert!(matches!(
            along_across_error(p(3.0, 4.0), LocalPoint::ORIGIN, p(2.0, 0.0)),
            Err(MetricsError::NonUnitDirection(_))
        ));
    }

    #[test]
    fn assignment_examples() {
        let map = two_sided_street();
        assert!(sidewalk_assignment(p(0.0, 7.0), p(1.0, 9.0), &map).unwrap().correct);
        // the wrong-side-of-the-street mode
        let a = sidewalk_assignment(p(0.0, -8.0), p(0.0, 8.0), &map).unwrap();
        assert!(!a.correct);
        assert_eq!((a.assigned.as_str(), a.truth.as_str()), ("south", "north"));
        // mid-street but closer to the true sidewalk
        let est = p(0.0, 1.0);
        let north = map.nearest_sidewalk(est).unwrap().distance;
        assert!(north < 7.0);
        assert!(sidewalk_assignment(est, p(0.0, 8.0), &map).unwrap().correct);

        let empty = GeoSegmentMap::new(LocalProjection::default(), vec![], vec![], vec![]).unwrap();
        assert!(matches!(
            sidewalk_assignment(est, est, &empty),
            Err(MetricsError::Map(GeoMapError::NoSidewalks))
        ));
    }

    #[test]
    fn summarize_examples() {
        let evals: Vec<FootstepEval> = (1..=100).map(|i| eval(i as f64, true)).collect();
        let s = summarize(&evals).unwrap();
        assert_eq!(s.correct_sidewalk_proportion, 1.0);
        assert!((s.euclidean_median - 50.5).abs() < 1e-12);
        assert!((s.euclidean_p90 - 90.1).abs() < 1e-12);
        assert!((s.euclidean_mean - 50.5).abs() < 1e-12);

        let s = summarize(&[eval(2.5, false)]).unwrap();
        assert_eq!(s.correct_sidewalk_proportion, 0.0);
        assert_eq!((s.euclidean_mean, s.euclidean_median, s.euclidean_p90), (2.5, 2.5, 2.5));
        assert_eq!(cdf_inverse(&s.cdf_points(), 0.9), 2.5);

        assert!(matches!(summarize(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn summary_json_omits_cdf() {
        let s = summarize(&[eval(1.0, true)]).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert!(json.get("cdf").is_none());
        assert_eq!(json["footsteps"], 1);
    }

    #[test]
    fn csv_outputs() {
        let evals: Vec<FootstepEval> = (1..=3).map(|i| eval(i as f64, i != 2)).collect();
        let mut buf = Vec::new();
        write_evals_csv(&evals, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("timestamp,truth_x,truth_y"));
        assert_eq!(lines.count(), 3);

        let mut buf = Vec::new();
        write_cdf_csv(&summarize(&evals).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "euclidean,fraction\n1,0\n2,0.5\n3,1\n");
    }

    fn rigid(t: (f64, f64, f64), q: LocalPoint) -> LocalPoint {
        q.rotated(t.2) + p(t.0, t.1)
    }

    proptest! {
        #[test]
        fn pythagorean_identity(
            ex in -1e3f64..1e3, ey in -1e3f64..1e3, tx in -1e3f64..1e3, ty in -1e3f64..1e3,
            angle in -7.0f64..7.0,
        ) {
            let (e, t) = (p(ex, ey), p(tx, ty));
            let (a, c) = along_across_error(e, t, LocalPoint::from_angle(angle)).unwrap();
            let d = euclidean_error(e, t);
            prop_assert!(d >= 0.0);
            prop_assert!((a * a + c * c - d * d).abs() <= 1e-6 * (d * d).max(1e-12));
        }

        #[test]
        fn cdf_is_monotone_and_agrees_with_p90(errors in prop::collection::vec(0.0f64..100.0, 1..300)) {
            let evals: Vec<FootstepEval> = errors.iter().map(|&e| eval(e, e < 50.0)).collect();
            let s = summarize(&evals).unwrap();
            let pts = s.cdf_points();
            prop_assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            prop_assert!((cdf_inverse(&pts, 0.9) - s.euclidean_p90).abs() < 1e-9);
            prop_assert!(s.euclidean_median <= s.euclidean_p90);
            prop_assert!((0.0..=1.0).contains(&s.correct_sidewalk_proportion));
        }

        #[test]
        fn metrics_are_rigid_motion_invariant(
            pts in prop::collection::vec((-90.0f64..90.0, -15.0f64..15.0, -90.0f64..90.0, -9.5f64..9.5), 1..30),
            tx in -500.0f64..500.0, ty in -500.0f64..500.0, angle in -3.1f64..3.1,
        ) {
            let map = two_sided_street();
            let motion = (tx, ty, angle);
            let moved = GeoSegmentMap::new(
                LocalProjection::default(),
                vec![],
                map.streets().iter().map(|s| transform_polygon(&s.polygon, motion)).collect(),
                map.sidewalks()
                    .iter()
                    .map(|s| SidewalkSegment::new(
                        s.id.clone(),
                        transform_polygon(&s.polygon, motion),
                        s.bearing_deg() + angle.to_degrees(),
                    ))
                    .collect(),
            )
            .unwrap();
            let est: Vec<LocalPoint> = pts.iter().map(|q| p(q.0, q.1)).collect();
            let truth: Vec<LocalPoint> = pts.iter().map(|q| p(q.2, q.3)).collect();
            let ts: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
            let a = evaluate(&ts, &est, &truth, &map).unwrap();
            let est2: Vec<LocalPoint> = est.iter().map(|&q| rigid(motion, q)).collect();
            let truth2: Vec<LocalPoint> = truth.iter().map(|&q| rigid(motion, q)).collect();
            let b = evaluate(&ts, &est2, &truth2, &moved).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.euclidean - y.euclidean).abs() < 1e-6);
                prop_assert!((x.along - y.along).abs() < 1e-6);
                prop_assert!((x.across - y.across).abs() < 1e-6);
                // points equidistant from both sidewalks may flip under rounding
                let tie = (x.estimate.y.abs() < 1e-6) || (x.truth.y.abs() < 1e-6);
                if !tie {
                    prop_assert_eq!(x.correct, y.correct);
                }
            }
        }
    }

    fn transform_polygon(poly: &Polygon, motion: (f64, f64, f64)) -> Polygon {
        let ring = |r: &crate::geometry::Ring| {
            crate::geometry::Ring::from_open(r.vertices().iter().map(|&q| rigid(motion, q)).collect()).unwrap()
        };
        Polygon::new(ring(poly.exterior()), poly.holes().iter().map(ring).collect())
    }
}
