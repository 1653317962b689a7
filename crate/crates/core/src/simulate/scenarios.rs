use std::sync::Arc;

use geojson::FeatureCollection;

use super::{
    generate_ground_truth, mix_seed, synthesize_gnss, synthesize_velocity, GnssNoiseModel, ImuDriftModel,
    SimulateError, SyntheticTrace, WaypointPath,
};
use crate::geomap::{geojson_io, GeoPoint, GeoSegmentMap, LocalProjection, SidewalkSegment};
use crate::geometry::{LocalPoint, Polygon};

pub const SCENARIO_NAMES: [&str; 5] = ["straight_canyon", "l_corner", "block_loop", "jaywalk_cross", "covered_hub"];

/// Scenario maps are anchored downtown so geodetic export looks plausible.
const ORIGIN: GeoPoint = GeoPoint::new(-122.4, 37.79);
const STEP_LENGTH: f64 = 0.75;
const CADENCE: f64 = 1.8;
const SIDEWALK: f64 = 4.0;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub map: Arc<GeoSegmentMap>,
    /// Geodetic form of `map`; parsing it reproduces `map` exactly.
    pub map_geojson: FeatureCollection,
    pub path: WaypointPath,
    pub drift: ImuDriftModel,
    pub gnss: GnssNoiseModel,
}

impl Scenario {
    /// Walks the path and draws velocity and GNSS streams. `seed` replaces
    /// the models' own seeds.
    pub fn synthesize(&self, seed: u64) -> Result<SyntheticTrace, SimulateError> {
        let drift = ImuDriftModel {
            seed: mix_seed(seed, 1),
            ..self.drift
        };
        let gnss = GnssNoiseModel {
            seed: mix_seed(seed, 2),
            ..self.gnss.clone()
        };
        let truth = generate_ground_truth(&self.path)?;
        let velocities = synthesize_velocity(&truth.footsteps, &drift)?;
        let fixes = synthesize_gnss(&truth.footsteps, &self.map, &gnss)?;
        Ok(SyntheticTrace {
            footsteps: truth.footsteps,
            velocities,
            fixes,
            waypoint_tap_times: truth.tap_times,
            waypoints: self.path.waypoints.clone(),
        })
    }

    /// Seconds from the first to the last footstep.
    pub fn duration(&self) -> f64 {
        let truth = generate_ground_truth(&self.path).expect("built-in paths are valid");
        truth.footsteps.last().map_or(0.0, |f| f.timestamp)
    }
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, SimulateError> {
    match name {
        "straight_canyon" => straight_canyon(),
        "l_corner" => l_corner(),
        "block_loop" => block_loop(),
        "jaywalk_cross" => jaywalk_cross(),
        "covered_hub" => covered_hub(),
        _ => Err(SimulateError::UnknownScenario(name.to_string())),
    }
}

fn p(x: f64, y: f64) -> LocalPoint {
    LocalPoint::new(x, y)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::rectangle(p(x0, y0), p(x1, y1))
}

#[derive(Default)]
struct Layout {
    obstacles: Vec<Polygon>,
    streets: Vec<Polygon>,
    sidewalks: Vec<SidewalkSegment>,
}

#[derive(Clone, Copy, Default)]
struct Sides {
    n: bool,
    s: bool,
    e: bool,
    w: bool,
}

impl Layout {
    /// A block with a building and sidewalks along the given sides. North and
    /// south sidewalks span the full block width. Bearings are chosen so the
    /// left normal points away from the building.
    fn block(&mut self, id: &str, x0: f64, y0: f64, x1: f64, y1: f64, sides: Sides) {
        let sw = SIDEWALK;
        let pad = |on: bool| if on { sw } else { 0.0 };
        let (bx0, bx1) = (x0 + pad(sides.w), x1 - pad(sides.e));
        let (by0, by1) = (y0 + pad(sides.s), y1 - pad(sides.n));
        self.obstacles.push(rect(bx0, by0, bx1, by1));
        if sides.n {
            self.sidewalk(&format!("{id}_n"), rect(x0, by1, x1, y1), 0.0);
        }
        if sides.s {
            self.sidewalk(&format!("{id}_s"), rect(x0, y0, x1, by0), 180.0);
        }
        if sides.e {
            self.sidewalk(&format!("{id}_e"), rect(bx1, by0, x1, by1), 270.0);
        }
        if sides.w {
            self.sidewalk(&format!("{id}_w"), rect(x0, by0, bx0, by1), 90.0);
        }
    }

    fn sidewalk(&mut self, id: &str, polygon: Polygon, bearing_deg: f64) {
        self.sidewalks.push(SidewalkSegment::new(id, polygon, bearing_deg));
    }

    /// Returns the map as it reads back from its own geodetic export, so
    /// in-memory runs and file replays see identical coordinates.
    fn finish(self, origin: GeoPoint) -> Result<(Arc<GeoSegmentMap>, FeatureCollection), SimulateError> {
        let draft = GeoSegmentMap::new(LocalProjection::new(origin), self.obstacles, self.streets, self.sidewalks)?;
        let collection = geojson_io::to_geojson(&draft);
        let map = geojson_io::map_from_collection(&collection)?;
        Ok((Arc::new(map), collection))
    }
}

/// An `nx × ny` grid of square blocks separated by roads. Road segments
/// leave a crosswalk gap next to each intersection; intersections are street.
fn grid_city(nx: usize, ny: usize, block: f64, road: f64, crosswalk: f64) -> Layout {
    let mut layout = Layout::default();
    let pitch = block + road;
    let origin = |i: usize| i as f64 * pitch;
    for i in 0..nx {
        for j in 0..ny {
            let sides = Sides {
                n: j + 1 < ny,
                s: j > 0,
                e: i + 1 < nx,
                w: i > 0,
            };
            let (x0, y0) = (origin(i), origin(j));
            layout.block(&format!("b{i}{j}"), x0, y0, x0 + block, y0 + block, sides);
        }
    }
    // vertical roads after column i, horizontal roads after row j
    for i in 0..nx.saturating_sub(1) {
        let rx = origin(i) + block;
        for j in 0..ny {
            let (y0, y1) = (origin(j), origin(j) + block);
            let lo = if j > 0 { y0 + crosswalk } else { y0 };
            let hi = if j + 1 < ny { y1 - crosswalk } else { y1 };
            layout.streets.push(rect(rx, lo, rx + road, hi));
        }
    }
    for j in 0..ny.saturating_sub(1) {
        let ry = origin(j) + block;
        for i in 0..nx {
            let (x0, x1) = (origin(i), origin(i) + block);
            let lo = if i > 0 { x0 + crosswalk } else { x0 };
            let hi = if i + 1 < nx { x1 - crosswalk } else { x1 };
            layout.streets.push(rect(lo, ry, hi, ry + road));
        }
    }
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            let (x, y) = (origin(i) + block, origin(j) + block);
            layout.streets.push(rect(x, y, x + road, y + road));
        }
    }
    layout
}

fn path(waypoints: &[(f64, f64)]) -> Result<WaypointPath, SimulateError> {
    WaypointPath::new(waypoints.iter().map(|&(x, y)| p(x, y)).collect(), STEP_LENGTH, CADENCE)
}

/// 300 m along the north sidewalk of one long street.
fn straight_canyon() -> Result<Scenario, SimulateError> {
    let mut layout = Layout::default();
    let (x0, x1) = (-30.0, 330.0);
    layout.obstacles.push(rect(x0, 10.0, x1, 40.0));
    layout.obstacles.push(rect(x0, -40.0, x1, -10.0));
    layout.streets.push(rect(x0, -6.0, x1, 6.0));
    layout.sidewalk("north", rect(x0, 6.0, x1, 10.0), 180.0);
    layout.sidewalk("south", rect(x0, -10.0, x1, -6.0), 0.0);
    let (map, map_geojson) = layout.finish(ORIGIN)?;
    Ok(Scenario {
        name: "straight_canyon".into(),
        map,
        map_geojson,
        path: path(&[(0.0, 8.0), (300.0, 8.0)])?,
        drift: ImuDriftModel {
            heading_drift_rate: 0.005,
            velocity_noise_sigma: 0.05,
            seed: 0,
        },
        gnss: GnssNoiseModel {
            along_sigma: 4.0,
            across_sigma: 8.0,
            across_bias: 6.0,
            uncertainty_radius_range: (10.0, 25.0),
            outage_intervals: vec![],
            fix_period: 1.0,
            seed: 0,
        },
    })
}

/// Along a block's north side, then around its north-east corner.
fn l_corner() -> Result<Scenario, SimulateError> {
    let layout = grid_city(2, 2, 100.0, 14.0, SIDEWALK);
    let (map, map_geojson) = layout.finish(ORIGIN)?;
    Ok(Scenario {
        name: "l_corner".into(),
        map,
        map_geojson,
        path: path(&[(11.0, 98.0), (98.0, 98.0), (98.0, 11.0)])?,
        drift: ImuDriftModel {
            heading_drift_rate: 0.004,
            velocity_noise_sigma: 0.05,
            seed: 0,
        },
        gnss: GnssNoiseModel {
            along_sigma: 5.0,
            across_sigma: 9.0,
            across_bias: 6.0,
            uncertainty_radius_range: (12.0, 26.0),
            outage_intervals: vec![],
            fix_period: 1.0,
            seed: 0,
        },
    })
}

/// Once around the central block of a 3 × 3 grid.
fn block_loop() -> Result<Scenario, SimulateError> {
    let layout = grid_city(3, 3, 85.0, 14.0, SIDEWALK);
    let (map, map_geojson) = layout.finish(ORIGIN)?;
    // central block spans [99, 184]; sidewalk centerlines 2 m inside
    let (lo, hi, mid) = (101.0, 182.0, 141.5);
    Ok(Scenario {
        name: "block_loop".into(),
        map,
        map_geojson,
        path: path(&[(mid, hi), (hi, hi), (hi, lo), (lo, lo), (lo, hi), (mid, hi)])?,
        drift: ImuDriftModel {
            heading_drift_rate: 0.008,
            velocity_noise_sigma: 0.1,
            seed: 0,
        },
        gnss: GnssNoiseModel {
            along_sigma: 8.0,
            across_sigma: 11.5,
            across_bias: 9.0,
            uncertainty_radius_range: (12.0, 28.0),
            outage_intervals: vec![],
            fix_period: 1.0,
            seed: 0,
        },
    })
}

/// East along the south sidewalk, straight across the road mid-block, then
/// east along the north sidewalk. Crosswalks exist only near the ends.
fn jaywalk_cross() -> Result<Scenario, SimulateError> {
    let mut layout = Layout::default();
    let (x0, x1) = (-30.0, 330.0);
    layout.obstacles.push(rect(x0, 11.0, x1, 40.0));
    layout.obstacles.push(rect(x0, -40.0, x1, -11.0));
    layout.streets.push(rect(x0, -7.0, -10.0, 7.0));
    layout.streets.push(rect(-6.0, -7.0, 306.0, 7.0));
    layout.streets.push(rect(310.0, -7.0, x1, 7.0));
    layout.sidewalk("north", rect(x0, 7.0, x1, 11.0), 180.0);
    layout.sidewalk("south", rect(x0, -11.0, x1, -7.0), 0.0);
    let (map, map_geojson) = layout.finish(ORIGIN)?;
    Ok(Scenario {
        name: "jaywalk_cross".into(),
        map,
        map_geojson,
        path: path(&[(0.0, -9.0), (150.0, -9.0), (150.0, 9.0), (300.0, 9.0)])?,
        drift: ImuDriftModel {
            heading_drift_rate: 0.006,
            velocity_noise_sigma: 0.05,
            seed: 0,
        },
        gnss: GnssNoiseModel {
            along_sigma: 5.0,
            across_sigma: 9.0,
            across_bias: 6.0,
            uncertainty_radius_range: (12.0, 26.0),
            outage_intervals: vec![],
            fix_period: 1.0,
            seed: 0,
        },
    })
}

/// A covered bus terminal: a bus lane between two platforms under a roof
/// that blocks GNSS. The walk enters from the open west end, goes out along
/// one platform, crosses at the far crosswalk and comes back.
fn covered_hub() -> Result<Scenario, SimulateError> {
    let mut layout = Layout::default();
    layout.obstacles.push(rect(0.0, 60.0, 200.0, 80.0));
    layout.obstacles.push(rect(0.0, -20.0, 200.0, 0.0));
    layout.obstacles.push(rect(200.0, -20.0, 220.0, 80.0));
    // columns along both concourses
    for k in 0..10 {
        let x = 10.0 + 20.0 * k as f64;
        layout.obstacles.push(rect(x, 9.0, x + 1.0, 10.0));
        layout.obstacles.push(rect(x, 50.0, x + 1.0, 51.0));
    }
    layout.streets.push(rect(-60.0, 26.0, 176.0, 34.0));
    layout.streets.push(rect(184.0, 26.0, 200.0, 34.0));
    layout.sidewalk("platform_south", rect(-60.0, 16.0, 200.0, 26.0), 0.0);
    layout.sidewalk("platform_north", rect(-60.0, 34.0, 200.0, 44.0), 180.0);
    let (map, map_geojson) = layout.finish(ORIGIN)?;

    let walk = path(&[(-30.0, 21.0), (180.0, 21.0), (180.0, 39.0), (-30.0, 39.0)])?;
    // under the roof from entering (x = 0) on the way out until leaving on
    // the way back
    let t_in = 30.0 / STEP_LENGTH / CADENCE;
    let t_out = (210.0 + 18.0 + 180.0) / STEP_LENGTH / CADENCE;
    Ok(Scenario {
        name: "covered_hub".into(),
        map,
        map_geojson,
        path: walk,
        drift: ImuDriftModel {
            heading_drift_rate: 0.003,
            velocity_noise_sigma: 0.05,
            seed: 0,
        },
        gnss: GnssNoiseModel {
            along_sigma: 5.0,
            across_sigma: 8.0,
            across_bias: 4.0,
            uncertainty_radius_range: (10.0, 25.0),
            outage_intervals: vec![(t_in, t_out)],
            fix_period: 1.0,
            seed: 0,
        },
    })
}
