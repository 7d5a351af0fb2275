//! Planar primitives and the closed-set intersection predicates used by the
//! kinematic and collision layers.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for circle intersection, in length units.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("capsule radius must be finite and >= 0, got {0}")]
    BadRadius(f64),
    #[error("polygon `{id}` needs at least 3 vertices, got {count}")]
    TooFewVertices { id: String, count: usize },
    #[error("polygon `{id}` has zero area")]
    Degenerate { id: String },
    #[error("polygon `{id}` is self-intersecting (edges {first} and {second})")]
    SelfIntersecting {
        id: String,
        first: usize,
        second: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    /// Panics on NaN or infinite coordinates; use [`Point2::try_new`] for
    /// untrusted input.
    pub fn new(x: f64, y: f64) -> Self {
        assert!(x.is_finite() && y.is_finite(), "non-finite point ({x}, {y})");
        Self { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::NonFinite(x, y))
        }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Point2 {
        Point2 {
            x: -self.y,
            y: self.x,
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    /// Reflection across the x axis.
    pub fn mirrored_x(self) -> Point2 {
        Point2 {
            x: self.x,
            y: -self.y,
        }
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }
}

impl TryFrom<[f64; 2]> for Point2 {
    type Error = GeometryError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Point2::try_new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2 {
            x: self.x + o.x,
            y: self.y + o.y,
        }
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2 {
            x: self.x - o.x,
            y: self.y - o.y,
        }
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2 {
            x: self.x * k,
            y: self.y * k,
        }
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2 {
            x: -self.x,
            y: -self.y,
        }
    }
}

/// A segment; `a == b` is allowed and behaves as a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment2 {
    pub a: Point2,
    pub b: Point2,
}

impl Segment2 {
    pub fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn closest_point(&self, p: Point2) -> Point2 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        if len_sq == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Segment2 {
        Segment2::new(f(self.a), f(self.b))
    }
}

/// Euclidean distance from `p` to the nearest point of `s`.
pub fn segment_point_distance(s: &Segment2, p: Point2) -> f64 {
    s.closest_point(p).distance(p)
}

fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_bbox(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching endpoints count).
pub fn segments_intersect(s: &Segment2, t: &Segment2) -> bool {
    let d1 = orientation(t.a, t.b, s.a);
    let d2 = orientation(t.a, t.b, s.b);
    let d3 = orientation(s.a, s.b, t.a);
    let d4 = orientation(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_bbox(t.a, t.b, s.a))
        || (d2 == 0.0 && on_segment_bbox(t.a, t.b, s.b))
        || (d3 == 0.0 && on_segment_bbox(s.a, s.b, t.a))
        || (d4 == 0.0 && on_segment_bbox(s.a, s.b, t.b))
}

pub fn segment_segment_distance(s: &Segment2, t: &Segment2) -> f64 {
    if segments_intersect(s, t) {
        return 0.0;
    }
    segment_point_distance(s, t.a)
        .min(segment_point_distance(s, t.b))
        .min(segment_point_distance(t, s.a))
        .min(segment_point_distance(t, s.b))
}

/// A segment swept by a disc: the planar stand-in for a link volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule2 {
    pub axis: Segment2,
    pub radius: f64,
}

impl Capsule2 {
    pub fn new(axis: Segment2, radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Self { axis, radius })
    }

    /// Disc of `radius` centred at `center` (degenerate axis).
    pub fn disc(center: Point2, radius: f64) -> Result<Self, GeometryError> {
        Self::new(Segment2::new(center, center), radius)
    }
}

/// True iff the two capsules share at least one point (boundary contact counts).
pub fn capsule_capsule_intersects(p: &Capsule2, q: &Capsule2) -> bool {
    segment_segment_distance(&p.axis, &q.axis) <= p.radius + q.radius
}

/// Simple polygon, stored counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstaclePolygon {
    pub id: String,
    vertices: Vec<Point2>,
}

#[derive(Deserialize)]
struct RawPolygon {
    id: String,
    vertices: Vec<Point2>,
}

impl<'de> Deserialize<'de> for ObstaclePolygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawPolygon::deserialize(d)?;
        ObstaclePolygon::new(raw.id, raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl ObstaclePolygon {
    /// Validates simplicity; clockwise input is reversed.
    pub fn new(id: impl Into<String>, mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let id = id.into();
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices { id, count: n });
        }
        let area = signed_area(&vertices);
        if area.abs() <= f64::EPSILON {
            return Err(GeometryError::Degenerate { id });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let ei = Segment2::new(vertices[i], vertices[(i + 1) % n]);
                let ej = Segment2::new(vertices[j], vertices[(j + 1) % n]);
                let bad = if adjacent {
                    // Adjacent edges may only share their common vertex.
                    let (shared, far_i, far_j) = if j == i + 1 {
                        (ei.b, ei.a, ej.b)
                    } else {
                        (ei.a, ei.b, ej.a)
                    };
                    orientation(shared, far_i, far_j) == 0.0
                        && (far_i - shared).dot(far_j - shared) > 0.0
                } else {
                    segments_intersect(&ei, &ej)
                };
                if bad {
                    return Err(GeometryError::SelfIntersecting {
                        id,
                        first: i,
                        second: j,
                    });
                }
            }
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { id, vertices })
    }

    /// Axis-aligned square with lower-left corner `min`.
    pub fn square(id: impl Into<String>, min: Point2, side: f64) -> Result<Self, GeometryError> {
        Self::new(
            id,
            vec![
                min,
                min + Point2::new(side, 0.0),
                min + Point2::new(side, side),
                min + Point2::new(0.0, side),
            ],
        )
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment2> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment2::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Closed containment: boundary points are inside.
    pub fn contains(&self, p: Point2) -> bool {
        if self.edges().any(|e| segment_point_distance(&e, p) == 0.0) {
            return true;
        }
        let mut inside = false;
        for e in self.edges() {
            let (a, b) = (e.a, e.b);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, GeometryError> {
        Self::new(self.id.clone(), self.vertices.iter().map(|&v| f(v)).collect())
    }
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

/// True iff the capsule touches the polygon boundary or lies inside it.
pub fn capsule_polygon_intersects(c: &Capsule2, poly: &ObstaclePolygon) -> bool {
    if poly.contains(c.axis.a) {
        return true;
    }
    poly.edges()
        .any(|e| segment_segment_distance(&c.axis, &e) <= c.radius)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CircleIntersection {
    Empty,
    One(Point2),
    /// Ordered: the first point lies to the left of the directed line c1 -> c2.
    Two(Point2, Point2),
    /// Coincident circles: a continuum of solutions.
    Concentric,
}

impl CircleIntersection {
    pub fn points(&self) -> Vec<Point2> {
        match *self {
            CircleIntersection::Empty | CircleIntersection::Concentric => Vec::new(),
            CircleIntersection::One(p) => vec![p],
            CircleIntersection::Two(p, q) => vec![p, q],
        }
    }
}

pub fn circle_circle_intersection(
    c1: Point2,
    r1: f64,
    c2: Point2,
    r2: f64,
    tol: f64,
) -> CircleIntersection {
    let delta = c2 - c1;
    let d = delta.norm();
    if d <= tol {
        return if (r1 - r2).abs() <= tol {
            CircleIntersection::Concentric
        } else {
            CircleIntersection::Empty
        };
    }
    let u = delta * (1.0 / d);
    let outer = r1 + r2;
    let inner = (r1 - r2).abs();
    if (d - outer).abs() <= tol {
        return CircleIntersection::One(c1 + u * r1);
    }
    if (d - inner).abs() <= tol {
        let dir = if r1 >= r2 { u } else { -u };
        return CircleIntersection::One(c1 + dir * r1);
    }
    if d > outer || d < inner {
        return CircleIntersection::Empty;
    }
    let along = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h = (r1 * r1 - along * along).max(0.0).sqrt();
    let mid = c1 + u * along;
    let n = u.perp();
    CircleIntersection::Two(mid + n * h, mid - n * h)
}
