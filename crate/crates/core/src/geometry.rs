//! Planar geometry in the local tangent frame: points, rings, polygons with
//! holes, and the handful of queries the map needs.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Tolerance (meters) under which a point is considered to lie on an edge.
pub const ON_EDGE_EPS: f64 = 1e-9;

/// A point (or vector) in the local frame: `x` meters east, `y` meters north.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians counterclockwise from east.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Left-hand normal: the vector rotated +90°.
    pub fn perp(self) -> Self {
        Self {
            x: -self.y,
            y: self.x,
        }
    }

    /// Rotates counterclockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for LocalPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for LocalPoint {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for LocalPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for LocalPoint {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for LocalPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: LocalPoint,
    pub max: LocalPoint,
}

impl BBox {
    pub fn empty() -> Self {
        Self {
            min: LocalPoint::new(f64::INFINITY, f64::INFINITY),
            max: LocalPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a LocalPoint>) -> Self {
        let mut bbox = Self::empty();
        for p in points {
            bbox.extend(*p);
        }
        bbox
    }

    pub fn extend(&mut self, p: LocalPoint) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let mut out = *self;
        out.extend(other.min);
        out.extend(other.max);
        out
    }

    pub fn contains(&self, p: LocalPoint) -> bool {
        p.x >= self.min.x - ON_EDGE_EPS
            && p.x <= self.max.x + ON_EDGE_EPS
            && p.y >= self.min.y - ON_EDGE_EPS
            && p.y <= self.max.y + ON_EDGE_EPS
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// Lower bound on the distance from `p` to anything inside the box.
    pub fn distance_to(&self, p: LocalPoint) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }
}

/// Closest point to `p` on segment `a`–`b`.
pub fn closest_on_segment(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> LocalPoint {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn orientation(a: LocalPoint, b: LocalPoint, c: LocalPoint) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_collinear(a: LocalPoint, b: LocalPoint, p: LocalPoint) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True when closed segments `p1`–`p2` and `q1`–`q2` share at least one point.
pub fn segments_intersect(p1: LocalPoint, p2: LocalPoint, q1: LocalPoint, q2: LocalPoint) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(q1, q2, p1))
        || (d2 == 0.0 && on_segment_collinear(q1, q2, p2))
        || (d3 == 0.0 && on_segment_collinear(p1, p2, q1))
        || (d4 == 0.0 && on_segment_collinear(p1, p2, q2))
}

/// A simple closed ring stored without the repeated closing vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Ring {
    vertices: Vec<LocalPoint>,
}

/// Why a vertex list cannot form a ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingDefect {
    /// First and last vertex differ.
    Open,
    /// Fewer than three distinct vertices.
    Degenerate,
    /// Two non-adjacent edges touch or cross.
    SelfIntersecting,
}

impl Ring {
    /// Builds a ring from a closed vertex list (first == last), as GeoJSON
    /// stores them.
    pub fn from_closed(mut vertices: Vec<LocalPoint>) -> Result<Self, RingDefect> {
        match (vertices.first(), vertices.last()) {
            (Some(first), Some(last)) if vertices.len() >= 2 && first == last => {}
            _ => return Err(RingDefect::Open),
        }
        vertices.pop();
        Self::from_open(vertices)
    }

    /// Builds a ring from an open vertex list; consecutive duplicates are dropped.
    pub fn from_open(mut vertices: Vec<LocalPoint>) -> Result<Self, RingDefect> {
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(RingDefect::Degenerate);
        }
        let ring = Self { vertices };
        if ring.signed_area() == 0.0 {
            return Err(RingDefect::Degenerate);
        }
        if ring.self_intersects() {
            return Err(RingDefect::SelfIntersecting);
        }
        Ok(ring)
    }

    /// Axis-aligned rectangle, counterclockwise.
    pub fn rectangle(min: LocalPoint, max: LocalPoint) -> Self {
        Self {
            vertices: vec![
                min,
                LocalPoint::new(max.x, min.y),
                max,
                LocalPoint::new(min.x, max.y),
            ],
        }
    }

    pub fn vertices(&self) -> &[LocalPoint] {
        &self.vertices
    }

    /// Vertex list with the closing vertex repeated.
    pub fn closed_vertices(&self) -> Vec<LocalPoint> {
        let mut out = self.vertices.clone();
        out.push(self.vertices[0]);
        out
    }

    pub fn edges(&self) -> impl Iterator<Item = (LocalPoint, LocalPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counterclockwise rings.
    pub fn signed_area(&self) -> f64 {
        let o = self.vertices[0];
        self.edges()
            .map(|(a, b)| (a - o).cross(b - o))
            .sum::<f64>()
            * 0.5
    }

    fn self_intersects(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if adjacent {
                    // Adjacent edges share one vertex; they only conflict when
                    // they fold back over each other.
                    let shared = if j == i + 1 { a2 } else { a1 };
                    let (u, v) = if j == i + 1 { (a1, b2) } else { (a2, b1) };
                    if orientation(shared, u, v) == 0.0 && (u - shared).dot(v - shared) > 0.0 {
                        return true;
                    }
                    continue;
                }
                if segments_intersect(a1, a2, b1, b2) {
                    return true;
                }
            }
        }
        false
    }

    /// True when `p` lies within `ON_EDGE_EPS` of an edge.
    pub fn on_boundary(&self, p: LocalPoint) -> bool {
        self.edges()
            .any(|(a, b)| closest_on_segment(p, a, b).distance(p) <= ON_EDGE_EPS)
    }

    /// Crossing-number test for the open interior; boundary handling is the
    /// caller's job.
    pub fn strictly_contains(&self, p: LocalPoint) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closest point on the boundary and its distance.
    pub fn closest_boundary_point(&self, p: LocalPoint) -> (LocalPoint, f64) {
        let mut best = (self.vertices[0], f64::INFINITY);
        for (a, b) in self.edges() {
            let q = closest_on_segment(p, a, b);
            let d = q.distance(p);
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }
}

/// Polygon with an exterior ring and optional holes.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    exterior: Ring,
    holes: Vec<Ring>,
    bbox: BBox,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        let bbox = BBox::from_points(exterior.vertices());
        Self {
            exterior,
            holes,
            bbox,
        }
    }

    pub fn rectangle(min: LocalPoint, max: LocalPoint) -> Self {
        Self::new(Ring::rectangle(min, max), Vec::new())
    }

    pub fn exterior(&self) -> &Ring {
        &self.exterior
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    /// Point-in-polygon with boundary points (including hole boundaries)
    /// counted as inside; points strictly inside a hole are outside.
    pub fn contains(&self, p: LocalPoint) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        if self.rings().any(|r| r.on_boundary(p)) {
            return true;
        }
        self.exterior.strictly_contains(p) && !self.holes.iter().any(|h| h.strictly_contains(p))
    }

    /// Closest point of the closed polygon region to `p` (p itself when inside).
    pub fn closest_point(&self, p: LocalPoint) -> (LocalPoint, f64) {
        if self.contains(p) {
            return (p, 0.0);
        }
        self.rings()
            .map(|r| r.closest_boundary_point(p))
            .fold((p, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    pub fn area(&self) -> f64 {
        self.exterior.signed_area().abs() - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    /// Unit vector along the major principal axis of the region's second
    /// moment of area, with the eigenvalue ratio (major / minor).
    pub fn principal_axis(&self) -> (LocalPoint, f64) {
        let o = self.exterior.vertices()[0];
        let mut area = 0.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (ring, sign) in self
            .rings()
            .enumerate()
            .map(|(i, r)| (r, if i == 0 { 1.0 } else { -1.0 }))
        {
            let orient = ring.signed_area().signum() * sign;
            for (a, b) in ring.edges() {
                let (a, b) = (a - o, b - o);
                let c = a.cross(b) * orient;
                area += c / 2.0;
                sx += (a.x + b.x) * c / 6.0;
                sy += (a.y + b.y) * c / 6.0;
                sxx += (a.x * a.x + a.x * b.x + b.x * b.x) * c / 12.0;
                syy += (a.y * a.y + a.y * b.y + b.y * b.y) * c / 12.0;
                sxy += (a.x * b.y + 2.0 * a.x * a.y + 2.0 * b.x * b.y + b.x * a.y) * c / 24.0;
            }
        }
        let (cx, cy) = (sx / area, sy / area);
        let cxx = sxx / area - cx * cx;
        let cyy = syy / area - cy * cy;
        let cxy = sxy / area - cx * cy;
        let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        let mean = 0.5 * (cxx + cyy);
        let spread = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
        let (major, minor) = (mean + spread, mean - spread);
        let ratio = if minor > 0.0 { major / minor } else { f64::INFINITY };
        (LocalPoint::from_angle(angle), ratio)
    }
}
