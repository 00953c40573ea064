//! Core geometric types and the exact predicates the rest of the pipeline
//! is built on.

mod intersect;
mod mesh;
mod predicates;

pub use intersect::{segment_triangle_intersect, triangles_intersect};
pub use mesh::{EdgeKey, IndexedMesh, Triangle};
pub(crate) use predicates::orient2d_projected;
pub use predicates::{
    insphere, insphere_perturbed, insphere_perturbed_positive, orient3d, orient3d_perturbed_point, orient3d_sign,
    insphere_sign, Sign,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate in predicate input")]
    NonFinite,
    #[error("degenerate (coplanar) tetrahedron")]
    DegenerateTetrahedron,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

/// A 3D measurement together with its sampling scale and the cameras that
/// observed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisPoint {
    pub position: Point3,
    /// Average distance to neighbouring samples in the originating depthmap.
    pub scale: f64,
    /// Observing cameras. The first entry is the camera whose depthmap
    /// produced the point.
    pub cameras: Vec<u32>,
}

impl VisPoint {
    pub fn new(position: Point3, scale: f64, cameras: Vec<u32>) -> Result<Self, GeometryError> {
        let p = VisPoint {
            position,
            scale,
            cameras,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidPoint("non-finite position".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(GeometryError::InvalidPoint(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.cameras.is_empty() {
            return Err(GeometryError::InvalidPoint("no observing camera".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub id: u32,
    pub center: Point3,
}

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Aabb { min, max }
    }

    pub fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Aabb::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        b.grow(&other.min);
        b.grow(&other.max);
        b
    }

    pub fn center(&self) -> Point3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn extent(&self) -> Point3 {
        sub(&self.max, &self.min)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// True when the interiors overlap or the boxes touch.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// True when the open interiors overlap.
    pub fn overlaps_interior(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    /// Squared distance from `p` to the closed box (0 inside).
    pub fn distance2(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Distance from an interior point to the nearest face (0 when outside).
    pub fn inner_distance(&self, p: &Point3) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..3 {
            d = d.min(p[i] - self.min[i]).min(self.max[i] - p[i]);
        }
        d.max(0.0)
    }

    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [[0.0; 3]; 8];
        for (k, c) in out.iter_mut().enumerate() {
            for i in 0..3 {
                c[i] = if k >> i & 1 == 0 { self.min[i] } else { self.max[i] };
            }
        }
        out
    }

    pub fn farthest_corner_distance(&self, p: &Point3) -> f64 {
        self.corners()
            .iter()
            .map(|c| dist(c, p))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point3, b: &Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scaled(a: &Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add(a, &scaled(&ab, d1 / (d1 - d3)));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add(a, &scaled(&ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, &scaled(&sub(c, b), w));
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // degenerate triangle: fall back to the nearest edge point
        let cands = [(a, b), (b, c), (c, a)].map(|(u, v)| closest_on_segment(p, u, v));
        return *cands.iter().min_by(|x, y| dist2(p, x).total_cmp(&dist2(p, y))).unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    add(&add(a, &scaled(&ab, v)), &scaled(&ac, w))
}

fn closest_on_segment(p: &Point3, a: &Point3, b: &Point3) -> Point3 {
    let ab = sub(b, a);
    let l = dot(&ab, &ab);
    if l == 0.0 {
        return *a;
    }
    let t = (dot(&sub(p, a), &ab) / l).clamp(0.0, 1.0);
    add(a, &scaled(&ab, t))
}

pub fn point_triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    dist(p, &closest_point_on_triangle(p, a, b, c))
}

/// Circumcenter and squared radius of a tetrahedron, in floating point.
/// Returns `None` for flat tetrahedra.
pub fn circumsphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> Option<(Point3, f64)> {
    let ba = sub(b, a);
    let ca = sub(c, a);
    let da = sub(d, a);
    let det = dot(&ba, &cross(&ca, &da));
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let lb = dot(&ba, &ba);
    let lc = dot(&ca, &ca);
    let ld = dot(&da, &da);
    let num = add(
        &add(&scaled(&cross(&ca, &da), lb), &scaled(&cross(&da, &ba), lc)),
        &scaled(&cross(&ba, &ca), ld),
    );
    let off = scaled(&num, 0.5 / det);
    Some((add(a, &off), dot(&off, &off)))
}

/// Translation that moves the centre of a point set's bounding box to the
/// origin. Applied before processing and inverted on output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: Point3,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization { offset: [0.0; 3] }
    }

    pub fn centering<'a>(pts: impl IntoIterator<Item = &'a Point3>) -> Self {
        let b = Aabb::from_points(pts);
        if b.is_empty() {
            return Self::identity();
        }
        Normalization { offset: b.center() }
    }

    #[inline]
    pub fn to_local(&self, p: &Point3) -> Point3 {
        sub(p, &self.offset)
    }

    #[inline]
    pub fn to_global(&self, p: &Point3) -> Point3 {
        add(p, &self.offset)
    }
}
