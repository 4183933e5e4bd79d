//! Convex polygons clipped by half-planes.

use crate::domain::{dot, sub, Vec2};

/// Area tolerance used when deciding a polygon is degenerate.
pub const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        [p[0].clamp(self.x0, self.x1), p[1].clamp(self.y0, self.y1)]
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon { vertices: vec![[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]] }
    }
}

/// `{p : normal · (p − origin) ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub origin: Vec2,
    pub normal: Vec2,
}

impl HalfPlane {
    pub fn new(origin: Vec2, normal: Vec2) -> Self {
        Self { origin, normal }
    }

    pub fn signed_distance(&self, p: Vec2) -> f64 {
        dot(self.normal, sub(p, self.origin))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p) >= 0.0
    }
}

/// Convex polygon with vertices in positive (shoelace) orientation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self { vertices: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= AREA_EPS
    }

    /// Shoelace area, clamped at zero.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a[0] * b[1] - b[0] * a[1];
        }
        (0.5 * s).max(0.0)
    }

    /// Sutherland–Hodgman step against one half-plane.
    pub fn clip(&self, hp: &HalfPlane) -> ConvexPolygon {
        let n = self.vertices.len();
        if n == 0 {
            return Self::empty();
        }
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let da = hp.signed_distance(a);
            let db = hp.signed_distance(b);
            if da >= 0.0 {
                out.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        dedup_vertices(&mut out);
        if out.len() < 3 {
            return Self::empty();
        }
        ConvexPolygon { vertices: out }
    }

    pub fn clip_all<'a>(&self, planes: impl IntoIterator<Item = &'a HalfPlane>) -> ConvexPolygon {
        let mut poly = self.clone();
        for hp in planes {
            if poly.vertices.is_empty() {
                break;
            }
            poly = poly.clip(hp);
        }
        poly
    }

    /// Intersection with another convex polygon, by clipping against its edges.
    pub fn intersect(&self, other: &ConvexPolygon) -> ConvexPolygon {
        let n = other.vertices.len();
        if n < 3 {
            return Self::empty();
        }
        let planes: Vec<HalfPlane> = (0..n)
            .map(|i| {
                let a = other.vertices[i];
                let b = other.vertices[(i + 1) % n];
                // inward normal of a positively oriented edge
                HalfPlane::new(a, [-(b[1] - a[1]), b[0] - a[0]])
            })
            .collect();
        self.clip_all(planes.iter())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-12
        })
    }
}

fn dedup_vertices(v: &mut Vec<Vec2>) {
    v.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if v.len() > 1 {
        let (f, l) = (v[0], v[v.len() - 1]);
        if (f[0] - l[0]).abs() < 1e-12 && (f[1] - l[1]).abs() < 1e-12 {
            v.pop();
        }
    }
}

/// Whether closed segments `p0→p1` and `q0→q1` intersect.
pub fn segments_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
        p[0] >= a[0].min(b[0]) - 1e-12
            && p[0] <= a[0].max(b[0]) + 1e-12
            && p[1] >= a[1].min(b[1]) - 1e-12
            && p[1] <= a[1].max(b[1]) + 1e-12
    }
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q0, q1, p0))
        || (d2 == 0.0 && on_segment(q0, q1, p1))
        || (d3 == 0.0 && on_segment(p0, p1, q0))
        || (d4 == 0.0 && on_segment(p0, p1, q1))
}
